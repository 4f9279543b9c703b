#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "coding_rate.hpp"
#include "kernel_lab.hpp"
#include "mlp.hpp"
#include "rng.hpp"
#include "types.hpp"

namespace erasekit {

/// Intermediate values from a forward pass, consumed by backward().
struct ForwardCache {
    DenseCache dense;
    Eigen::VectorXd norms;  // row norms of the final layer output
    Eigen::MatrixXd output; // sphere-projected rows

    bool empty() const { return dense.empty(); }
};

/// Feed-forward ReLU network whose output rows are projected onto the unit
/// sphere.
class ErasureNetwork {
public:
    ErasureNetwork() = default;

    explicit ErasureNetwork(std::vector<Layer> layers) : layers_(std::move(layers))
    {
        if (layers_.empty()) throw InvalidArgument("network needs at least one layer");
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            const auto& layer = layers_[l];
            if (layer.bias.size() != layer.out_dim()) throw InvalidArgument("bias size mismatch in layer " + std::to_string(l));
            if (l > 0 && layer.in_dim() != layers_[l - 1].out_dim()) {
                throw InvalidArgument("layer " + std::to_string(l) + " input does not match previous output");
            }
        }
    }

    /// Hidden layers use ReLU; the final layer is linear. Weights and biases
    /// are drawn from U(-1/sqrt(in), 1/sqrt(in)).
    static ErasureNetwork make(Index input_dim, const std::vector<Index>& hidden, Index output_dim, Rng& rng)
    {
        return ErasureNetwork(make_dense_layers(input_dim, hidden, output_dim, rng));
    }

    static ErasureNetwork identity(Index dim)
    {
        Layer layer{Eigen::MatrixXd::Identity(dim, dim), Eigen::VectorXd::Zero(dim), Activation::none};
        return ErasureNetwork({std::move(layer)});
    }

    Index input_dim() const { return layers_.front().in_dim(); }
    Index output_dim() const { return layers_.back().out_dim(); }
    const std::vector<Layer>& layers() const { return layers_; }
    std::vector<Layer>& layers() { return layers_; }

    FeatureMatrix forward(const FeatureMatrix& x) const
    {
        ForwardCache cache;
        return forward(x, cache);
    }

    FeatureMatrix forward(const FeatureMatrix& x, ForwardCache& cache) const
    {
        if (x.cols() != input_dim()) {
            throw InvalidArgument("input has " + std::to_string(x.cols()) + " columns, network expects " +
                                  std::to_string(input_dim()));
        }
        cache = ForwardCache{};
        const Eigen::MatrixXd a = dense_forward(layers_, x, &cache.dense);
        if (!a.allFinite()) throw NumericalError("non-finite activation in erasure network forward pass");
        cache.norms.resize(a.rows());
        cache.output.resize(a.rows(), a.cols());
        for (Index i = 0; i < a.rows(); ++i) {
            const double norm = a.row(i).norm();
            cache.norms(i) = norm;
            if (norm > 0.0) {
                cache.output.row(i) = a.row(i) / norm;
            } else {
                cache.output.row(i).setZero();
                cache.output(i, 0) = 1.0;
            }
        }
        return cache.output;
    }

    /// Parameter gradients for an upstream gradient dL/dZ on the sphere
    /// output. The projection Jacobian (I - z z^T) / |h| is applied per row;
    /// rows with h = 0 pass no gradient.
    NetworkGradient backward(const ForwardCache& cache, const Eigen::MatrixXd& upstream) const
    {
        if (cache.empty()) throw InvalidArgument("backward called without a cached forward pass");
        if (upstream.rows() != cache.output.rows() || upstream.cols() != cache.output.cols()) {
            throw InvalidArgument("upstream gradient shape does not match the network output");
        }
        Eigen::MatrixXd delta(upstream.rows(), upstream.cols());
        for (Index i = 0; i < upstream.rows(); ++i) {
            const double norm = cache.norms(i);
            if (norm > 0.0) {
                const auto z = cache.output.row(i);
                delta.row(i) = (upstream.row(i) - z * z.dot(upstream.row(i))) / norm;
            } else {
                delta.row(i).setZero();
            }
        }
        return dense_backward(layers_, cache.dense, std::move(delta));
    }

    bool parameters_finite() const
    {
        for (const auto& layer : layers_) {
            if (!layer.weight.allFinite() || !layer.bias.allFinite()) return false;
        }
        return true;
    }

private:
    std::vector<Layer> layers_;
};

/// Training objective. `kram` minimizes -R(Z|K) + lambda |R(Z) - b|;
/// `kernel_only` drops the constraint; `shrink` minimizes -R(Z|K) + R(Z).
enum class Objective { kram, kernel_only, shrink };

/// How the target bits b are obtained when not given explicitly.
/// `per_batch` uses R of each normalized input batch; `global` computes it
/// once on a seeded reference sample of batch_size rows.
enum class TargetMode { per_batch, global };

struct KramConfig {
    double lambda = 0.5;
    std::optional<double> target_bits; // fixed b; overrides target_mode when set
    TargetMode target_mode = TargetMode::per_batch;
    Objective objective = Objective::kram;
    double epsilon = 0.5;
    int epochs = 20;
    Index batch_size = 256;
    AdamSettings adam;
    std::optional<std::vector<Index>> hidden; // default: one layer of width 2 d_in
    std::optional<Index> output_dim;          // default: d_in
    KernelSpec kernel;
    std::uint64_t seed = 0;
    bool record_timing = true;

    void validate() const
    {
        if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be non-negative");
        if (target_bits && !(*target_bits >= 0.0)) throw ConfigError("target_bits must be non-negative");
        if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
        if (epochs < 1) throw ConfigError("epochs must be at least 1");
        if (batch_size < 2) throw ConfigError("batch_size must be at least 2");
        if (!(adam.learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
        if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0)) throw ConfigError("beta1 must lie in [0, 1)");
        if (!(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) throw ConfigError("beta2 must lie in [0, 1)");
        if (!(adam.eps > 0.0)) throw ConfigError("adam eps must be positive");
        if (hidden) {
            for (Index w : *hidden) {
                if (w < 1) throw ConfigError("hidden layer widths must be positive");
            }
        }
        if (output_dim && *output_dim < 1) throw ConfigError("output_dim must be positive");
        if (kernel.family != KernelFamily::indicator && !(kernel.sigma > 0.0)) {
            throw ConfigError("kernel sigma must be positive");
        }
    }

    std::vector<Index> hidden_or_default(Index input_dim) const
    {
        return hidden ? *hidden : std::vector<Index>{2 * input_dim};
    }
};

struct TraceRecord {
    std::int64_t step = 0;
    double r_z = 0.0;
    double r_zk = 0.0;
    double loss = 0.0;
    double constraint = 0.0;
    double wall_ms = 0.0;
};

using TrainingTrace = std::vector<TraceRecord>;

/// Thrown when the loss or parameters become non-finite. Carries the steps
/// recorded before the failure.
class TrainingDiverged : public NumericalError {
public:
    TrainingDiverged(const std::string& what, TrainingTrace partial)
        : NumericalError(what), partial_(std::move(partial))
    {
    }
    const TrainingTrace& partial_trace() const { return partial_; }

private:
    TrainingTrace partial_;
};

struct TrainResult {
    ErasureNetwork network;
    TrainingTrace trace;
};

namespace detail {

inline FeatureMatrix gather_rows(const FeatureMatrix& x, std::span<const Index> rows)
{
    FeatureMatrix out(static_cast<Index>(rows.size()), x.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = x.row(rows[i]);
    return out;
}

} // namespace detail

/// Objective value and dL/dZ for one batch.
struct StepObjective {
    LossBreakdown loss;
    Eigen::MatrixXd gradient;
};

inline StepObjective evaluate_objective(const FeatureMatrix& z, const KernelMatrix& k, const KramConfig& cfg,
                                        double target_bits)
{
    const CodingRateParams params{cfg.epsilon};
    auto kernelized = kernelized_rate_with_gradient(z, k, params);
    auto plain = rate_with_gradient(z, params);

    StepObjective out;
    out.loss.r_zk = kernelized.bits;
    out.loss.r_z = plain.bits;
    out.loss.target_bits = target_bits;
    out.loss.constraint = std::abs(plain.bits - target_bits);
    out.gradient = -kernelized.gradient;
    switch (cfg.objective) {
    case Objective::kram: {
        out.loss.total = -kernelized.bits + cfg.lambda * out.loss.constraint;
        const double gap = plain.bits - target_bits;
        if (cfg.lambda > 0.0 && gap != 0.0) out.gradient += (cfg.lambda * (gap > 0.0 ? 1.0 : -1.0)) * plain.gradient;
        break;
    }
    case Objective::kernel_only: out.loss.total = -kernelized.bits; break;
    case Objective::shrink:
        out.loss.total = -kernelized.bits + plain.bits;
        out.gradient += plain.gradient;
        break;
    }
    return out;
}

/// Trains an erasure network on row-normalized inputs.
///
/// Each epoch shuffles the instances with the seeded RNG and walks
/// floor(n / B) full batches; the remainder is dropped. One trace record
/// is written per step, evaluated before that step's update.
inline TrainResult train(const FeatureMatrix& x_raw, const ConceptLabels& labels, const KramConfig& cfg)
{
    cfg.validate();
    const Index n = x_raw.rows();
    if (static_cast<std::size_t>(n) != labels.size()) {
        throw InvalidArgument("features have " + std::to_string(n) + " rows but labels have " +
                              std::to_string(labels.size()));
    }
    if (cfg.batch_size > n) {
        throw InvalidArgument("batch_size " + std::to_string(cfg.batch_size) + " exceeds n = " + std::to_string(n));
    }
    if (!x_raw.allFinite()) throw InvalidArgument("input features have non-finite entries");
    cfg.kernel.validate(labels.kind());

    const FeatureMatrix x = normalize_rows(x_raw);
    Rng init_rng = Rng::stream(cfg.seed, 0);
    Rng order_rng = Rng::stream(cfg.seed, 1);
    ErasureNetwork net = ErasureNetwork::make(x.cols(), cfg.hidden_or_default(x.cols()),
                                              cfg.output_dim.value_or(x.cols()), init_rng);
    Adam adam(net.layers(), cfg.adam);
    const CodingRateParams params{cfg.epsilon};

    std::optional<double> fixed_target = cfg.target_bits;
    if (!fixed_target && cfg.target_mode == TargetMode::global) {
        Rng ref_rng = Rng::stream(cfg.seed, 2);
        auto order = ref_rng.permutation(n);
        order.resize(static_cast<std::size_t>(cfg.batch_size));
        fixed_target = rate_distortion(detail::gather_rows(x, order), params);
    }

    const Index steps_per_epoch = n / cfg.batch_size;
    TrainingTrace trace;
    trace.reserve(static_cast<std::size_t>(steps_per_epoch * cfg.epochs));
    const auto start = std::chrono::steady_clock::now();
    std::int64_t step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto order = order_rng.permutation(n);
        for (Index s = 0; s < steps_per_epoch; ++s, ++step) {
            std::span<const Index> rows(order.data() + s * cfg.batch_size, static_cast<std::size_t>(cfg.batch_size));
            const FeatureMatrix xb = detail::gather_rows(x, rows);
            const KernelMatrix k = build_kernel(labels.subset(rows), cfg.kernel);

            ForwardCache cache;
            FeatureMatrix z;
            try {
                z = net.forward(xb, cache);
            } catch (const NumericalError& e) {
                throw TrainingDiverged(std::string(e.what()) + " at step " + std::to_string(step), trace);
            }
            if (s == 0 && !is_sphere_normalized(z)) {
                throw NumericalError("sphere invariant violated at epoch " + std::to_string(epoch));
            }

            const double b = fixed_target ? *fixed_target : rate_distortion(xb, params);
            const StepObjective objective = evaluate_objective(z, k, cfg, b);

            TraceRecord rec;
            rec.step = step;
            rec.r_z = objective.loss.r_z;
            rec.r_zk = objective.loss.r_zk;
            rec.loss = objective.loss.total;
            rec.constraint = objective.loss.constraint;
            if (cfg.record_timing) {
                rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
            }
            if (!std::isfinite(rec.loss) || !objective.gradient.allFinite()) {
                throw TrainingDiverged("non-finite loss at step " + std::to_string(step), trace);
            }
            trace.push_back(rec);

            adam.step(net.layers(), net.backward(cache, objective.gradient));
            if (!net.parameters_finite()) {
                throw TrainingDiverged("non-finite parameters after step " + std::to_string(step), trace);
            }
        }
    }
    return {std::move(net), std::move(trace)};
}

/// Applies a trained network to raw inputs (rows are normalized first).
inline FeatureMatrix erase(const ErasureNetwork& net, const FeatureMatrix& x_raw)
{
    return net.forward(normalize_rows(x_raw));
}

} // namespace erasekit
