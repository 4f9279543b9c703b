#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "rng.hpp"
#include "types.hpp"

namespace erasekit {

enum class Activation : std::uint8_t { none = 0, relu = 1 };

struct Layer {
    Eigen::MatrixXd weight; // out x in
    Eigen::VectorXd bias;
    Activation activation = Activation::none;

    Index in_dim() const { return weight.cols(); }
    Index out_dim() const { return weight.rows(); }
};

struct LayerGradient {
    Eigen::MatrixXd weight;
    Eigen::VectorXd bias;
};

using NetworkGradient = std::vector<LayerGradient>;

/// Per-layer inputs and pre-activations from a dense forward pass.
struct DenseCache {
    std::vector<Eigen::MatrixXd> inputs;
    std::vector<Eigen::MatrixXd> pre_activations;

    bool empty() const { return inputs.empty(); }
};

/// Hidden layers with ReLU and a linear head. Weights and biases are drawn
/// from U(-1/sqrt(in), 1/sqrt(in)).
inline std::vector<Layer> make_dense_layers(Index input_dim, const std::vector<Index>& hidden, Index output_dim, Rng& rng)
{
    require(input_dim >= 1 && output_dim >= 1, "network dimensions must be positive");
    std::vector<Layer> layers;
    Index in = input_dim;
    auto add = [&](Index out, Activation act) {
        require(out >= 1, "layer width must be positive");
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        Layer layer;
        layer.weight = rng.uniform_matrix(out, in, -bound, bound);
        layer.bias = rng.uniform_matrix(out, 1, -bound, bound);
        layer.activation = act;
        layers.push_back(std::move(layer));
        in = out;
    };
    for (Index width : hidden) add(width, Activation::relu);
    add(output_dim, Activation::none);
    return layers;
}

inline Eigen::MatrixXd dense_forward(const std::vector<Layer>& layers, const Eigen::MatrixXd& x, DenseCache* cache)
{
    if (cache) *cache = DenseCache{};
    Eigen::MatrixXd a = x;
    for (const auto& layer : layers) {
        Eigen::MatrixXd pre(a.rows(), layer.out_dim());
        pre.noalias() = a * layer.weight.transpose();
        pre.rowwise() += layer.bias.transpose();
        Eigen::MatrixXd next = layer.activation == Activation::relu ? Eigen::MatrixXd(pre.cwiseMax(0.0)) : pre;
        if (cache) {
            cache->inputs.push_back(std::move(a));
            cache->pre_activations.push_back(std::move(pre));
        }
        a = std::move(next);
    }
    return a;
}

/// Backpropagates dL/d(output) through the cached dense layers.
inline NetworkGradient dense_backward(const std::vector<Layer>& layers, const DenseCache& cache, Eigen::MatrixXd delta)
{
    if (cache.empty()) throw InvalidArgument("backward called without a cached forward pass");
    NetworkGradient grads(layers.size());
    for (std::size_t l = layers.size(); l-- > 0;) {
        const auto& layer = layers[l];
        if (layer.activation == Activation::relu) {
            delta.array() *= (cache.pre_activations[l].array() > 0.0).cast<double>();
        }
        grads[l].weight.noalias() = delta.transpose() * cache.inputs[l];
        grads[l].bias = delta.colwise().sum().transpose();
        if (l > 0) {
            Eigen::MatrixXd next(delta.rows(), layer.in_dim());
            next.noalias() = delta * layer.weight;
            delta = std::move(next);
        }
    }
    return grads;
}

struct AdamSettings {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class Adam {
public:
    Adam(const std::vector<Layer>& layers, AdamSettings settings) : settings_(settings)
    {
        for (const auto& layer : layers) {
            first_.push_back({Eigen::MatrixXd::Zero(layer.out_dim(), layer.in_dim()), Eigen::VectorXd::Zero(layer.out_dim())});
            second_.push_back(first_.back());
        }
    }

    void step(std::vector<Layer>& layers, const NetworkGradient& grads)
    {
        ++t_;
        const double correction1 = 1.0 - std::pow(settings_.beta1, static_cast<double>(t_));
        const double correction2 = 1.0 - std::pow(settings_.beta2, static_cast<double>(t_));
        const double step = settings_.learning_rate / correction1;
        const double b1 = settings_.beta1;
        const double b2 = settings_.beta2;
        for (std::size_t l = 0; l < grads.size(); ++l) {
            auto& layer = layers[l];
            first_[l].weight = b1 * first_[l].weight + (1.0 - b1) * grads[l].weight;
            second_[l].weight = b2 * second_[l].weight + (1.0 - b2) * grads[l].weight.cwiseAbs2();
            layer.weight.array() -= step * first_[l].weight.array() /
                                    ((second_[l].weight.array() / correction2).sqrt() + settings_.eps);
            first_[l].bias = b1 * first_[l].bias + (1.0 - b1) * grads[l].bias;
            second_[l].bias = b2 * second_[l].bias + (1.0 - b2) * grads[l].bias.cwiseAbs2();
            layer.bias.array() -= step * first_[l].bias.array() /
                                  ((second_[l].bias.array() / correction2).sqrt() + settings_.eps);
        }
    }

private:
    AdamSettings settings_;
    std::vector<LayerGradient> first_;
    std::vector<LayerGradient> second_;
    std::int64_t t_ = 0;
};

} // namespace erasekit
