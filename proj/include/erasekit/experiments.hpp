#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/SVD>
#include <Eigen/Eigenvalues>
#include <json.hpp>

#include "alignment.hpp"
#include "datagen.hpp"
#include "eval_metrics.hpp"
#include "types.hpp"

namespace erasekit {

/// Sample Pearson correlation. Throws when either sequence is constant.
inline double pearson(const std::vector<double>& xs, const std::vector<double>& ys)
{
    if (xs.size() != ys.size()) throw InvalidArgument("pearson needs equal lengths");
    if (xs.size() < 2) throw InvalidArgument("pearson needs at least two points");
    const auto n = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double dx = xs[i] - mx, dy = ys[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0) throw NumericalError("pearson: first sequence has zero variance");
    if (syy == 0.0) throw NumericalError("pearson: second sequence has zero variance");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// P = I - u u^T / |u|^2.
inline Eigen::MatrixXd nullspace_projector(const Eigen::VectorXd& u)
{
    const double norm2 = u.squaredNorm();
    if (!(norm2 > 0.0)) throw InvalidArgument("nullspace_projector needs a nonzero direction");
    return Eigen::MatrixXd::Identity(u.size(), u.size()) - u * u.transpose() / norm2;
}

struct SimulationRecord {
    Index iteration = 0; // number of directions removed
    double accuracy = 0.0;
    double a_k = 0.0;
};

struct SimulationReport {
    std::vector<SimulationRecord> records;
    double r = 0.0;

    nlohmann::json to_json() const
    {
        nlohmann::json recs = nlohmann::json::array();
        for (const auto& rec : records) recs.push_back({{"iteration", rec.iteration}, {"accuracy", rec.accuracy}, {"a_k", rec.a_k}});
        return {{"pearson_r", r}, {"records", recs}};
    }

    std::string to_csv() const
    {
        std::string out = "iteration,accuracy,a_k\n";
        for (const auto& rec : records) {
            out += std::to_string(rec.iteration) + ',' + io::format_double(rec.accuracy) + ',' + io::format_double(rec.a_k) + '\n';
        }
        return out;
    }
};

/// Simulated erasure: labels come from a random linear net over X; the right
/// singular directions of X are projected out one at a time, largest first,
/// and after each removal the probe accuracy on the labels and A_k against X
/// are recorded. The report carries their Pearson correlation.
inline SimulationReport simulate_erasure(const FeatureMatrix& x, Index m, Index k, std::uint64_t seed,
                                         ProbeKind probe = ProbeKind::mlp, const ProbeSettings& settings = {})
{
    const Index n = x.rows();
    if (!(k >= 1 && k < n)) throw InvalidArgument("simulate_erasure needs 1 <= k < n");
    if (!x.allFinite()) throw InvalidArgument("simulate_erasure input has non-finite entries");
    const auto labels = ConceptLabels::categorical(gen_label_from_random_net(x, m, seed));

    const Eigen::BDCSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinV);
    const Eigen::MatrixXd& v = svd.matrixV(); // columns sorted by decreasing singular value
    const auto sets_x = knn_sets(x, k);

    SimulationReport report;
    FeatureMatrix z = x;
    std::vector<double> acc, align;
    for (Index i = 0; i < v.cols(); ++i) {
        const Eigen::VectorXd u = v.col(i).normalized();
        z = z * nullspace_projector(u);
        SimulationRecord rec;
        rec.iteration = i + 1;
        rec.accuracy = train_probe(z, labels, probe, seed, settings).value;
        rec.a_k = alignment_score(sets_x, z, k).a_k;
        report.records.push_back(rec);
        acc.push_back(rec.accuracy);
        align.push_back(rec.a_k);
    }
    report.r = pearson(acc, align);
    return report;
}

enum class Spectrum { covariance, singular };

inline Spectrum parse_spectrum(std::string_view name)
{
    if (name == "covariance") return Spectrum::covariance;
    if (name == "singular") return Spectrum::singular;
    throw ConfigError("unknown spectrum '" + std::string(name) + "' (expected covariance or singular)");
}

/// Fractions of spectral mass of the centered data, sorted descending and
/// summing to 1. `covariance` uses eigenvalues of the sample covariance;
/// `singular` uses singular values of the centered data matrix.
inline std::vector<double> eigen_mass(const FeatureMatrix& z, Spectrum spectrum = Spectrum::covariance)
{
    if (z.rows() < 2) throw InvalidArgument("eigen_mass needs at least two rows");
    const Eigen::MatrixXd centered = z.rowwise() - z.colwise().mean();
    Eigen::VectorXd values;
    if (spectrum == Spectrum::covariance) {
        const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(z.rows() - 1);
        values = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(cov, Eigen::EigenvaluesOnly).eigenvalues().cwiseMax(0.0);
    } else {
        values = Eigen::BDCSVD<Eigen::MatrixXd>(centered).singularValues();
    }
    std::vector<double> out(values.data(), values.data() + values.size());
    std::sort(out.begin(), out.end(), std::greater<>());
    const double total = values.sum();
    if (!(total > 0.0)) throw NumericalError("eigen_mass: data has zero variance");
    for (double& v : out) v /= total;
    return out;
}

} // namespace erasekit
