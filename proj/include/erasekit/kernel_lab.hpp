#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <string_view>

#include "types.hpp"

namespace erasekit {

enum class KernelFamily { indicator, gaussian, laplace, cauchy };
enum class DistanceMetric { absolute, euclidean, cosine };

inline std::string_view to_string(KernelFamily family)
{
    switch (family) {
    case KernelFamily::indicator: return "indicator";
    case KernelFamily::gaussian: return "gaussian";
    case KernelFamily::laplace: return "laplace";
    case KernelFamily::cauchy: return "cauchy";
    }
    return "unknown";
}

inline std::string_view to_string(DistanceMetric metric)
{
    switch (metric) {
    case DistanceMetric::absolute: return "absolute";
    case DistanceMetric::euclidean: return "euclidean";
    case DistanceMetric::cosine: return "cosine";
    }
    return "unknown";
}

inline KernelFamily parse_kernel_family(std::string_view name)
{
    if (name == "indicator") return KernelFamily::indicator;
    if (name == "gaussian") return KernelFamily::gaussian;
    if (name == "laplace") return KernelFamily::laplace;
    if (name == "cauchy") return KernelFamily::cauchy;
    throw ConfigError("unknown kernel family '" + std::string(name) + "'");
}

inline DistanceMetric parse_distance_metric(std::string_view name)
{
    if (name == "absolute") return DistanceMetric::absolute;
    if (name == "euclidean") return DistanceMetric::euclidean;
    if (name == "cosine") return DistanceMetric::cosine;
    throw ConfigError("unknown distance metric '" + std::string(name) + "'");
}

/// Kernel family, label distance, and bandwidth.
///
/// The gaussian family defaults to exp(-d / sigma^2) on the unsquared
/// distance; `squared_exponential` switches it to exp(-d^2 / (2 sigma^2)).
struct KernelSpec {
    KernelFamily family = KernelFamily::gaussian;
    DistanceMetric distance = DistanceMetric::absolute;
    double sigma = 1.0;
    bool squared_exponential = false;

    void validate(ConceptLabels::Kind kind) const
    {
        if (family == KernelFamily::indicator) {
            if (kind != ConceptLabels::Kind::categorical) {
                throw InvalidArgument("indicator kernel requires categorical labels, got " +
                                      std::string(erasekit::to_string(kind)));
            }
            return;
        }
        if (kind == ConceptLabels::Kind::categorical) {
            throw InvalidArgument(std::string(to_string(family)) +
                                  " kernel requires continuous or vector labels");
        }
        if (!(sigma > 0.0) || !std::isfinite(sigma)) {
            throw InvalidArgument("kernel bandwidth sigma must be positive, got " + std::to_string(sigma));
        }
        if (kind == ConceptLabels::Kind::continuous && distance != DistanceMetric::absolute) {
            throw InvalidArgument("continuous labels use the absolute distance");
        }
        if (kind == ConceptLabels::Kind::vector && distance == DistanceMetric::absolute) {
            throw InvalidArgument("vector labels use the euclidean or cosine distance");
        }
    }
};

/// Symmetric n x n similarity matrix over concept labels.
///
/// Construction checks: square, symmetric to 1e-12, unit diagonal, entries
/// in [0, 1].
class KernelMatrix {
public:
    explicit KernelMatrix(Eigen::MatrixXd values) : values_(std::move(values))
    {
        if (values_.rows() != values_.cols()) throw InvalidArgument("kernel matrix must be square");
        for (Index i = 0; i < values_.rows(); ++i) {
            if (values_(i, i) != 1.0) throw InvalidArgument("kernel matrix diagonal must be exactly 1");
            for (Index j = 0; j < values_.cols(); ++j) {
                const double v = values_(i, j);
                if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument("kernel entries must lie in [0, 1]");
                if (std::abs(v - values_(j, i)) > 1e-12) throw InvalidArgument("kernel matrix must be symmetric");
            }
        }
    }

    static KernelMatrix ones(Index n) { return KernelMatrix(Eigen::MatrixXd::Ones(n, n)); }
    static KernelMatrix identity(Index n) { return KernelMatrix(Eigen::MatrixXd::Identity(n, n)); }

    Index size() const { return values_.rows(); }
    const Eigen::MatrixXd& values() const { return values_; }
    double operator()(Index i, Index j) const { return values_(i, j); }

private:
    Eigen::MatrixXd values_;
};

namespace detail {

inline double cosine_distance(const Eigen::Ref<const Eigen::RowVectorXd>& x,
                              const Eigen::Ref<const Eigen::RowVectorXd>& y)
{
    const double nx = x.norm();
    const double ny = y.norm();
    if (nx == 0.0 && ny == 0.0) return 0.0;
    if (nx == 0.0 || ny == 0.0) return 1.0;
    // Clamp: rounding can push the cosine slightly past +-1.
    const double cosine = std::clamp(x.dot(y) / (nx * ny), -1.0, 1.0);
    return 1.0 - cosine;
}

} // namespace detail

/// Pairwise label distances. Zero diagonal, symmetric by construction.
inline Eigen::MatrixXd pairwise_distance(const ConceptLabels& labels, DistanceMetric metric)
{
    const auto n = static_cast<Index>(labels.size());
    Eigen::MatrixXd dist = Eigen::MatrixXd::Zero(n, n);
    switch (labels.kind()) {
    case ConceptLabels::Kind::categorical:
        throw InvalidArgument("pairwise_distance is not defined for categorical labels");
    case ConceptLabels::Kind::continuous: {
        if (metric != DistanceMetric::absolute) {
            throw InvalidArgument("continuous labels support only the absolute distance");
        }
        const auto& a = labels.scalars();
        for (Index i = 0; i < n; ++i) {
            for (Index j = i + 1; j < n; ++j) {
                const double d = std::abs(a[static_cast<std::size_t>(i)] - a[static_cast<std::size_t>(j)]);
                dist(i, j) = d;
                dist(j, i) = d;
            }
        }
        return dist;
    }
    case ConceptLabels::Kind::vector: {
        const auto& v = labels.vectors();
        if (v.hasNaN()) throw InvalidArgument("vector labels contain NaN");
        if (metric == DistanceMetric::absolute) {
            throw InvalidArgument("vector labels support the euclidean or cosine distance");
        }
        for (Index i = 0; i < n; ++i) {
            for (Index j = i + 1; j < n; ++j) {
                const double d = metric == DistanceMetric::euclidean ? (v.row(i) - v.row(j)).norm()
                                                                      : detail::cosine_distance(v.row(i), v.row(j));
                dist(i, j) = d;
                dist(j, i) = d;
            }
        }
        return dist;
    }
    }
    return dist;
}

/// Kernel value for a label distance `d >= 0`. Every family maps 0 to 1.
inline double kernel_value(const KernelSpec& spec, double d)
{
    switch (spec.family) {
    case KernelFamily::indicator: return d == 0.0 ? 1.0 : 0.0;
    case KernelFamily::gaussian:
        if (spec.squared_exponential) return std::exp(-d * d / (2.0 * spec.sigma * spec.sigma));
        return std::exp(-d / (spec.sigma * spec.sigma));
    case KernelFamily::laplace: return std::exp(-d / spec.sigma);
    case KernelFamily::cauchy: return 1.0 / (1.0 + d * d / (spec.sigma * spec.sigma));
    }
    return 0.0;
}

inline KernelMatrix build_kernel(const ConceptLabels& labels, const KernelSpec& spec)
{
    spec.validate(labels.kind());
    const auto n = static_cast<Index>(labels.size());
    Eigen::MatrixXd k(n, n);
    if (spec.family == KernelFamily::indicator) {
        const auto& a = labels.classes();
        for (Index i = 0; i < n; ++i) {
            for (Index j = 0; j < n; ++j) {
                k(i, j) = a[static_cast<std::size_t>(i)] == a[static_cast<std::size_t>(j)] ? 1.0 : 0.0;
            }
        }
        return KernelMatrix(std::move(k));
    }
    const Eigen::MatrixXd dist = pairwise_distance(labels, spec.distance);
    for (Index i = 0; i < n; ++i) {
        k(i, i) = 1.0;
        for (Index j = i + 1; j < n; ++j) {
            const double v = kernel_value(spec, dist(i, j));
            k(i, j) = v;
            k(j, i) = v;
        }
    }
    return KernelMatrix(std::move(k));
}

} // namespace erasekit
