#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mlp.hpp"
#include "rng.hpp"
#include "types.hpp"

namespace erasekit {

enum class ProbeKind { linear, mlp };
enum class ProbeTarget { accuracy, mse };

inline std::string_view to_string(ProbeKind kind) { return kind == ProbeKind::linear ? "linear" : "mlp"; }
inline std::string_view to_string(ProbeTarget target)
{
    return target == ProbeTarget::accuracy ? "categorical-accuracy" : "regression-mse";
}

inline ProbeKind parse_probe_kind(std::string_view name)
{
    if (name == "linear") return ProbeKind::linear;
    if (name == "mlp") return ProbeKind::mlp;
    throw ConfigError("unknown probe kind '" + std::string(name) + "' (expected linear or mlp)");
}

struct ProbeSettings {
    Index hidden_width = 100;
    int max_epochs = 200;
    Index batch_size = 200;
    double learning_rate = 1e-3;
    double tolerance = 1e-5; // relative training-loss improvement
    int patience = 10;       // epochs without improvement before stopping
    double ridge = 1e-8;     // linear least-squares regularizer
};

struct ProbeReport {
    ProbeKind probe = ProbeKind::mlp;
    ProbeTarget target = ProbeTarget::accuracy;
    Index n_train = 0;
    Index n_test = 0;
    double value = 0.0;                // accuracy, or mean per-dimension MSE
    std::vector<double> per_dimension; // MSE per target column (regression only)
    int epochs = 0;                    // 0 for closed-form fits

    // Test-split outputs, kept for fairness metrics.
    std::vector<Index> test_rows;
    std::vector<std::int64_t> predicted_class; // categorical only, original class ids
    Eigen::MatrixXd predicted;                 // class probabilities, or normalized regression outputs

    nlohmann::json to_json() const
    {
        nlohmann::json j{{"probe", to_string(probe)}, {"target", to_string(target)}, {"n_train", n_train},
                         {"n_test", n_test},          {"value", value}};
        if (target == ProbeTarget::mse) j["per_dimension"] = per_dimension;
        return j;
    }
};

namespace detail {

/// Column-wise min-max scaling to [0, 1]; constant columns map to 0.
inline Eigen::MatrixXd minmax_columns(const Eigen::MatrixXd& y)
{
    Eigen::MatrixXd out(y.rows(), y.cols());
    for (Index j = 0; j < y.cols(); ++j) {
        const double lo = y.col(j).minCoeff();
        const double span = y.col(j).maxCoeff() - lo;
        if (span > 0.0) {
            out.col(j) = (y.col(j).array() - lo) / span;
        } else {
            out.col(j).setZero();
        }
    }
    return out;
}

inline Eigen::MatrixXd gather(const Eigen::MatrixXd& m, const std::vector<Index>& rows)
{
    Eigen::MatrixXd out(static_cast<Index>(rows.size()), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = m.row(rows[i]);
    return out;
}

inline void softmax_rows(Eigen::MatrixXd& logits)
{
    for (Index i = 0; i < logits.rows(); ++i) {
        const double top = logits.row(i).maxCoeff();
        logits.row(i) = (logits.row(i).array() - top).exp().matrix();
        logits.row(i) /= logits.row(i).sum();
    }
}

/// Minibatch Adam fit of a dense network. Categorical targets use softmax
/// cross-entropy against class indices in column 0 of `y`; otherwise
/// squared error. Returns the number of epochs run.
inline int fit_dense(std::vector<Layer>& layers, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, bool categorical,
                     const ProbeSettings& settings, Rng& rng)
{
    Adam adam(layers, AdamSettings{settings.learning_rate});
    const Index n = x.rows();
    const Index batch = std::min(settings.batch_size, n);
    double best = INFINITY;
    int stall = 0;
    int epoch = 0;
    while (epoch < settings.max_epochs) {
        ++epoch;
        const auto order = rng.permutation(n);
        double total = 0.0;
        for (Index start = 0; start < n; start += batch) {
            const Index size = std::min(batch, n - start);
            std::vector<Index> rows(order.begin() + start, order.begin() + start + size);
            const Eigen::MatrixXd xb = gather(x, rows);
            DenseCache cache;
            Eigen::MatrixXd out = dense_forward(layers, xb, &cache);
            Eigen::MatrixXd delta;
            if (categorical) {
                softmax_rows(out);
                delta = out;
                for (Index i = 0; i < size; ++i) {
                    const auto c = static_cast<Index>(y(rows[static_cast<std::size_t>(i)], 0));
                    total -= std::log(std::max(out(i, c), 1e-300));
                    delta(i, c) -= 1.0;
                }
            } else {
                delta = out - gather(y, rows);
                total += 0.5 * delta.squaredNorm();
            }
            delta /= static_cast<double>(size);
            adam.step(layers, dense_backward(layers, cache, std::move(delta)));
        }
        const double loss = total / static_cast<double>(n);
        if (!std::isfinite(loss)) throw NumericalError("probe training diverged at epoch " + std::to_string(epoch));
        if (loss < best - settings.tolerance * std::abs(best) || !std::isfinite(best)) {
            stall = 0;
        } else if (++stall >= settings.patience) {
            break;
        }
        best = std::min(best, loss);
    }
    return epoch;
}

} // namespace detail

/// Trains a probe on a seeded 80/20 split and reports held-out accuracy
/// (categorical targets) or per-dimension MSE on min-max normalized targets.
///
/// Features are standardized with train-split statistics. The linear probe is
/// softmax regression for classes and ridge least squares for reals; the mlp
/// probe adds one ReLU hidden layer.
inline ProbeReport train_probe(const FeatureMatrix& z, const ConceptLabels& targets, ProbeKind kind,
                               std::uint64_t split_seed, const ProbeSettings& settings = {})
{
    const Index n = z.rows();
    if (static_cast<std::size_t>(n) != targets.size()) {
        throw InvalidArgument("probe features have " + std::to_string(n) + " rows but targets have " +
                              std::to_string(targets.size()));
    }
    if (n < 20) throw InvalidArgument("probe needs at least 20 samples, got " + std::to_string(n));
    if (!z.allFinite()) throw InvalidArgument("probe features have non-finite entries");

    const bool categorical = targets.kind() == ConceptLabels::Kind::categorical;
    const Index n_test = n / 5;
    const Index n_train = n - n_test;

    // Dense class index per instance; classes sorted by id.
    std::vector<std::int64_t> class_ids;
    Eigen::MatrixXd y;
    if (categorical) {
        class_ids = targets.classes();
        std::sort(class_ids.begin(), class_ids.end());
        class_ids.erase(std::unique(class_ids.begin(), class_ids.end()), class_ids.end());
        y.resize(n, 1);
        for (Index i = 0; i < n; ++i) {
            const auto id = targets.classes()[static_cast<std::size_t>(i)];
            y(i, 0) = static_cast<double>(std::lower_bound(class_ids.begin(), class_ids.end(), id) - class_ids.begin());
        }
    } else {
        y = detail::minmax_columns(targets.as_matrix());
    }

    std::vector<Index> order;
    for (std::uint64_t attempt = 0;; ++attempt) {
        Rng split_rng = Rng::stream(split_seed, attempt);
        order = split_rng.permutation(n);
        if (!categorical) break;
        std::vector<bool> seen(class_ids.size(), false);
        for (Index i = 0; i < n_train; ++i) seen[static_cast<std::size_t>(y(order[static_cast<std::size_t>(i)], 0))] = true;
        if (std::all_of(seen.begin(), seen.end(), [](bool s) { return s; })) break;
        if (attempt == 1) throw InvalidArgument("a target class is absent from the probe training split");
    }
    const std::vector<Index> train_rows(order.begin(), order.begin() + n_train);
    const std::vector<Index> test_rows(order.begin() + n_train, order.end());

    Eigen::MatrixXd x_train = detail::gather(z, train_rows);
    Eigen::MatrixXd x_test = detail::gather(z, test_rows);
    const Eigen::RowVectorXd mean = x_train.colwise().mean();
    Eigen::RowVectorXd scale(z.cols());
    for (Index j = 0; j < z.cols(); ++j) {
        const double sd = std::sqrt((x_train.col(j).array() - mean(j)).square().mean());
        scale(j) = sd > 1e-12 ? 1.0 / sd : 0.0;
    }
    x_train = ((x_train.rowwise() - mean).array().rowwise() * scale.array()).matrix();
    x_test = ((x_test.rowwise() - mean).array().rowwise() * scale.array()).matrix();
    const Eigen::MatrixXd y_train = detail::gather(y, train_rows);
    const Eigen::MatrixXd y_test = detail::gather(y, test_rows);

    ProbeReport report;
    report.probe = kind;
    report.target = categorical ? ProbeTarget::accuracy : ProbeTarget::mse;
    report.n_train = n_train;
    report.n_test = n_test;
    report.test_rows = test_rows;

    Eigen::MatrixXd out;
    if (!categorical && kind == ProbeKind::linear) {
        Eigen::MatrixXd a(n_train, z.cols() + 1);
        a << x_train, Eigen::VectorXd::Ones(n_train);
        Eigen::MatrixXd gram = a.transpose() * a;
        gram.diagonal().array() += settings.ridge * static_cast<double>(n_train);
        const Eigen::MatrixXd w = gram.ldlt().solve(a.transpose() * y_train);
        Eigen::MatrixXd a_test(n_test, z.cols() + 1);
        a_test << x_test, Eigen::VectorXd::Ones(n_test);
        out = a_test * w;
    } else {
        const Index outputs = categorical ? static_cast<Index>(class_ids.size()) : y.cols();
        Rng init_rng = Rng::stream(split_seed, 100);
        Rng order_rng = Rng::stream(split_seed, 101);
        const std::vector<Index> hidden = kind == ProbeKind::mlp ? std::vector<Index>{settings.hidden_width} : std::vector<Index>{};
        auto layers = make_dense_layers(z.cols(), hidden, outputs, init_rng);
        if (categorical && outputs == 1) {
            report.epochs = 0; // single class: the constant predictor is exact
        } else {
            report.epochs = detail::fit_dense(layers, x_train, y_train, categorical, settings, order_rng);
        }
        out = dense_forward(layers, x_test, nullptr);
        if (categorical) detail::softmax_rows(out);
    }

    if (categorical) {
        Index correct = 0;
        report.predicted_class.resize(static_cast<std::size_t>(n_test));
        for (Index i = 0; i < n_test; ++i) {
            Index best = 0;
            for (Index c = 1; c < out.cols(); ++c) {
                if (out(i, c) > out(i, best)) best = c;
            }
            report.predicted_class[static_cast<std::size_t>(i)] = class_ids[static_cast<std::size_t>(best)];
            correct += static_cast<double>(best) == y_test(i, 0) ? 1 : 0;
        }
        report.value = static_cast<double>(correct) / static_cast<double>(n_test);
    } else {
        report.per_dimension.resize(static_cast<std::size_t>(y.cols()));
        for (Index j = 0; j < y.cols(); ++j) {
            report.per_dimension[static_cast<std::size_t>(j)] = (out.col(j) - y_test.col(j)).squaredNorm() / static_cast<double>(n_test);
        }
        double sum = 0.0;
        for (double v : report.per_dimension) sum += v;
        report.value = sum / static_cast<double>(report.per_dimension.size());
    }
    report.predicted = std::move(out);
    return report;
}

/// DP = sum over predicted classes y of |P(yhat = y | a = 1) - P(yhat = y | a = 0)|.
inline double demographic_parity(const std::vector<std::int64_t>& predictions, const std::vector<std::int64_t>& attribute)
{
    if (predictions.size() != attribute.size()) throw InvalidArgument("demographic_parity needs equal lengths");
    std::map<std::int64_t, std::array<double, 2>> counts;
    std::array<double, 2> group{0.0, 0.0};
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const auto a = attribute[i];
        if (a != 0 && a != 1) throw InvalidArgument("demographic_parity attribute must be binary (0 or 1)");
        group[static_cast<std::size_t>(a)] += 1.0;
        counts[predictions[i]][static_cast<std::size_t>(a)] += 1.0;
    }
    if (group[0] == 0.0 || group[1] == 0.0) throw InvalidArgument("demographic_parity attribute has a single value");
    double dp = 0.0;
    for (const auto& [cls, c] : counts) dp += std::abs(c[1] / group[1] - c[0] / group[0]);
    return dp;
}

/// Generalized demographic parity: (1/n) sum_i |m(a_i) - mean(yhat)| with m
/// the Nadaraya-Watson regression of predictions on the attribute under
/// Gaussian weights of bandwidth sigma.
inline double gdp(const std::vector<double>& predictions, const std::vector<double>& attribute, double bandwidth)
{
    if (predictions.size() != attribute.size()) throw InvalidArgument("gdp needs equal lengths");
    if (!(bandwidth > 0.0)) throw InvalidArgument("gdp bandwidth must be positive");
    const std::size_t n = predictions.size();
    if (n == 0) throw InvalidArgument("gdp needs at least one sample");
    double avg = 0.0;
    for (double p : predictions) avg += p;
    avg /= static_cast<double>(n);
    const double scale = -0.5 / (bandwidth * bandwidth);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double num = 0.0, den = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double diff = attribute[i] - attribute[j];
            const double w = std::exp(scale * diff * diff);
            num += w * predictions[j];
            den += w;
        }
        if (!(den > 0.0)) throw NumericalError("gdp kernel weights vanish at sample " + std::to_string(i));
        acc += std::abs(num / den - avg);
    }
    return acc / static_cast<double>(n);
}

/// gdp applied to each attribute column against the same predictions.
inline std::vector<double> gdp_per_dimension(const std::vector<double>& predictions, const Eigen::MatrixXd& attribute,
                                             double bandwidth)
{
    std::vector<double> out;
    for (Index j = 0; j < attribute.cols(); ++j) {
        const Eigen::VectorXd col = attribute.col(j);
        out.push_back(gdp(predictions, std::vector<double>(col.data(), col.data() + col.size()), bandwidth));
    }
    return out;
}

struct FairnessReport {
    std::optional<double> dp;
    std::optional<double> gdp;
    std::vector<double> gdp_per_dimension;
    double bandwidth = 0.1;

    nlohmann::json to_json() const
    {
        nlohmann::json j{{"bandwidth", bandwidth}};
        if (dp) j["dp"] = *dp;
        if (gdp) j["gdp"] = *gdp;
        if (!gdp_per_dimension.empty()) j["gdp_per_dimension"] = gdp_per_dimension;
        return j;
    }
};

} // namespace erasekit
