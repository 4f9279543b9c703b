#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "kd_tree.hpp"
#include "rng.hpp"
#include "types.hpp"

namespace erasekit {

/// Per-point k-nearest-neighbor index lists (self excluded), nearest first.
inline std::vector<std::vector<Index>> knn_sets(const FeatureMatrix& points, Index k)
{
    const NeighborIndex<EuclideanMetric> index(points);
    std::vector<std::vector<Index>> sets(static_cast<std::size_t>(points.rows()));
    for (Index i = 0; i < points.rows(); ++i) {
        auto& out = sets[static_cast<std::size_t>(i)];
        for (const auto& nb : index.knn(i, k)) out.push_back(nb.index);
    }
    return sets;
}

struct AlignmentReport {
    Index k = 0;
    Index n = 0;
    double a_k = 0.0;
    std::vector<Index> overlaps; // per point, each in [0, k]

    /// Number of points for each overlap value 0..k.
    std::vector<Index> overlap_histogram() const
    {
        std::vector<Index> hist(static_cast<std::size_t>(k) + 1, 0);
        for (Index o : overlaps) ++hist[static_cast<std::size_t>(o)];
        return hist;
    }

    nlohmann::json to_json() const
    {
        return {{"k", k}, {"n", n}, {"a_k", a_k}, {"overlap_histogram", overlap_histogram()}};
    }
};

/// Default neighborhood size for alignment reports: floor(n / 2).
inline Index default_alignment_k(Index n) { return std::max<Index>(1, n / 2); }

/// A_k against precomputed neighbor sets of the reference points. Useful
/// when one X is compared with many Z.
inline AlignmentReport alignment_score(const std::vector<std::vector<Index>>& sets_x, const FeatureMatrix& z, Index k)
{
    const Index n = z.rows();
    if (static_cast<Index>(sets_x.size()) != n) {
        throw InvalidArgument("alignment needs matching rows, got " + std::to_string(sets_x.size()) + " and " +
                              std::to_string(n));
    }
    if (k < 1 || k > n - 1) {
        throw InvalidArgument("alignment k must lie in [1, n-1], got k=" + std::to_string(k) + " for n=" + std::to_string(n));
    }
    const auto sets_z = knn_sets(z, k);

    AlignmentReport report;
    report.k = k;
    report.n = n;
    report.overlaps.resize(static_cast<std::size_t>(n));
    std::vector<Index> mark(static_cast<std::size_t>(n), -1);
    Index total = 0;
    for (Index i = 0; i < n; ++i) {
        const auto& set_x = sets_x[static_cast<std::size_t>(i)];
        if (static_cast<Index>(set_x.size()) != k) throw InvalidArgument("reference neighbor sets do not have size k");
        for (Index j : set_x) mark[static_cast<std::size_t>(j)] = i;
        Index overlap = 0;
        for (Index j : sets_z[static_cast<std::size_t>(i)]) overlap += mark[static_cast<std::size_t>(j)] == i ? 1 : 0;
        report.overlaps[static_cast<std::size_t>(i)] = overlap;
        total += overlap;
    }
    report.a_k = static_cast<double>(total) / static_cast<double>(n) / static_cast<double>(k);
    return report;
}

/// A_k = (1/n) sum_i |knn_X(i) ∩ knn_Z(i)| / k with exact Euclidean kNN.
inline AlignmentReport alignment_score(const FeatureMatrix& x, const FeatureMatrix& z, Index k)
{
    if (x.rows() != z.rows()) {
        throw InvalidArgument("alignment needs matching rows, got " + std::to_string(x.rows()) + " and " +
                              std::to_string(z.rows()));
    }
    const Index n = x.rows();
    if (k < 1 || k > n - 1) {
        throw InvalidArgument("alignment k must lie in [1, n-1], got k=" + std::to_string(k) + " for n=" + std::to_string(n));
    }
    return alignment_score(knn_sets(x, k), z, k);
}

/// Digamma function for x > 0: upward recurrence to x >= 10, then the
/// asymptotic series.
inline double digamma(double x)
{
    if (!(x > 0.0)) throw InvalidArgument("digamma is implemented for x > 0");
    double shift = 0.0;
    while (x < 10.0) {
        shift -= 1.0 / x;
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    // Bernoulli terms B_2k / (2k x^2k), k = 1..6.
    const double series =
        inv2 * (1.0 / 12 - inv2 * (1.0 / 120 - inv2 * (1.0 / 252 - inv2 * (1.0 / 240 - inv2 * (1.0 / 132 - inv2 * 691.0 / 32760)))));
    return shift + std::log(x) - 0.5 * inv - series;
}

/// Kraskov-Stoegbauer-Grassberger mutual information estimate, in nats.
///
///   I = psi(k) - 1/k - <psi(n_x) + psi(n_z)> + psi(N)
///
/// For each point the k nearest joint neighbors are found under the max
/// norm on (x, z). The marginal radius in each space is the largest marginal
/// max-norm distance among those k neighbors, and n_x, n_z count the other
/// points within that radius (inclusive). Points get a deterministic
/// 1e-10-scale jitter first so duplicate rows cannot tie.
inline double ksg_mi(const FeatureMatrix& x, const FeatureMatrix& z, Index k)
{
    if (x.rows() != z.rows()) throw InvalidArgument("ksg_mi needs matching rows");
    const Index n = x.rows();
    if (k < 1 || k >= n) throw InvalidArgument("ksg_mi needs 1 <= k < n");

    Eigen::MatrixXd joint(n, x.cols() + z.cols());
    joint << x, z;
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < joint.cols(); ++j) {
            const auto h = splitmix64(static_cast<std::uint64_t>(i) * static_cast<std::uint64_t>(joint.cols()) +
                                      static_cast<std::uint64_t>(j));
            joint(i, j) += 1e-10 * (static_cast<double>(h >> 11) * 0x1.0p-53 - 0.5);
        }
    }
    const Eigen::MatrixXd xs = joint.leftCols(x.cols());
    const Eigen::MatrixXd zs = joint.rightCols(z.cols());
    const NeighborIndex<ChebyshevMetric> joint_index(joint);
    const NeighborIndex<ChebyshevMetric> x_index(xs);
    const NeighborIndex<ChebyshevMetric> z_index(zs);
    const auto dx = static_cast<std::size_t>(x.cols());
    const auto dz = static_cast<std::size_t>(z.cols());

    double acc = 0.0;
    for (Index i = 0; i < n; ++i) {
        double rx = 0.0, rz = 0.0;
        for (const auto& nb : joint_index.knn(i, k)) {
            rx = std::max(rx, ChebyshevMetric::distance(x_index.point(i), x_index.point(nb.index), dx));
            rz = std::max(rz, ChebyshevMetric::distance(z_index.point(i), z_index.point(nb.index), dz));
        }
        const Index nx = x_index.count_within(x_index.point(i), rx, false, i);
        const Index nz = z_index.count_within(z_index.point(i), rz, false, i);
        acc += digamma(static_cast<double>(nx)) + digamma(static_cast<double>(nz));
    }
    return digamma(static_cast<double>(k)) - 1.0 / static_cast<double>(k) - acc / static_cast<double>(n) +
           digamma(static_cast<double>(n));
}

enum class DegreeNorm { l1, l2, kl };

inline DegreeNorm parse_degree_norm(std::string_view name)
{
    if (name == "l1") return DegreeNorm::l1;
    if (name == "l2") return DegreeNorm::l2;
    if (name == "kl") return DegreeNorm::kl;
    throw InvalidArgument("unknown degree norm '" + std::string(name) + "' (expected l1, l2, or kl)");
}

/// Normalized in-degree distribution of the directed kNN graph, indexed by
/// degree value 0..n-1.
inline Eigen::VectorXd in_degree_distribution(const FeatureMatrix& points, Index k)
{
    const Index n = points.rows();
    std::vector<Index> in_degree(static_cast<std::size_t>(n), 0);
    for (const auto& set : knn_sets(points, k)) {
        for (Index j : set) ++in_degree[static_cast<std::size_t>(j)];
    }
    Eigen::VectorXd dist = Eigen::VectorXd::Zero(n);
    for (Index deg : in_degree) dist(deg) += 1.0;
    return dist / static_cast<double>(n);
}

/// Distance between the kNN in-degree distributions of X and Z. KL is
/// D(X || Z) with 1e-12 additive smoothing.
inline double degree_distance(const FeatureMatrix& x, const FeatureMatrix& z, Index k, DegreeNorm norm)
{
    if (x.rows() != z.rows()) throw InvalidArgument("degree_distance needs matching rows");
    const Index n = x.rows();
    if (k < 1 || k > n - 1) throw InvalidArgument("degree_distance k must lie in [1, n-1]");
    const Eigen::VectorXd p = in_degree_distribution(x, k);
    const Eigen::VectorXd q = in_degree_distribution(z, k);
    switch (norm) {
    case DegreeNorm::l1: return (p - q).cwiseAbs().sum();
    case DegreeNorm::l2: return (p - q).norm();
    case DegreeNorm::kl: {
        constexpr double smoothing = 1e-12;
        const double denom = 1.0 + smoothing * static_cast<double>(n);
        double kl = 0.0;
        for (Index i = 0; i < n; ++i) {
            const double ps = (p(i) + smoothing) / denom;
            const double qs = (q(i) + smoothing) / denom;
            kl += ps * std::log(ps / qs);
        }
        return std::max(kl, 0.0);
    }
    }
    return 0.0;
}

} // namespace erasekit
