#pragma once

#include <initializer_list>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "datagen.hpp"
#include "erasure_net.hpp"

namespace erasekit {

// ---------------------------------------------------------------------------
// Strict JSON access: unknown keys and wrong types become ConfigError.
// ---------------------------------------------------------------------------

namespace config {

inline void check_keys(const nlohmann::json& j, std::initializer_list<std::string_view> allowed, const std::string& where)
{
    if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        bool known = false;
        for (auto a : allowed) known = known || a == key;
        if (!known) throw ConfigError("unknown key '" + key + "' in " + where);
    }
}

template <typename T>
T get(const nlohmann::json& j, const std::string& key, const std::string& where)
{
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("key '" + key + "' in " + where + " is missing or has the wrong type");
    }
}

template <typename T>
void read(const nlohmann::json& j, const std::string& key, const std::string& where, T& out)
{
    if (j.contains(key)) out = get<T>(j, key, where);
}

} // namespace config

inline nlohmann::json kernel_to_json(const KernelSpec& k)
{
    return {{"family", to_string(k.family)},
            {"distance", to_string(k.distance)},
            {"sigma", k.sigma},
            {"squared_exponential", k.squared_exponential}};
}

inline KernelSpec kernel_from_json(const nlohmann::json& j)
{
    const std::string where = "kernel";
    config::check_keys(j, {"family", "distance", "sigma", "squared_exponential"}, where);
    KernelSpec k;
    if (j.contains("family")) k.family = parse_kernel_family(config::get<std::string>(j, "family", where));
    if (j.contains("distance")) k.distance = parse_distance_metric(config::get<std::string>(j, "distance", where));
    config::read(j, "sigma", where, k.sigma);
    config::read(j, "squared_exponential", where, k.squared_exponential);
    return k;
}

inline std::string_view to_string(Objective o)
{
    switch (o) {
    case Objective::kram: return "kram";
    case Objective::kernel_only: return "kernel-only";
    case Objective::shrink: return "shrink";
    }
    return "kram";
}

inline Objective parse_objective(std::string_view name)
{
    if (name == "kram") return Objective::kram;
    if (name == "kernel-only") return Objective::kernel_only;
    if (name == "shrink") return Objective::shrink;
    throw ConfigError("unknown objective '" + std::string(name) + "' (expected kram, kernel-only, or shrink)");
}

inline std::string_view to_string(TargetMode m) { return m == TargetMode::per_batch ? "per-batch" : "global"; }

inline TargetMode parse_target_mode(std::string_view name)
{
    if (name == "per-batch") return TargetMode::per_batch;
    if (name == "global") return TargetMode::global;
    throw ConfigError("unknown target_mode '" + std::string(name) + "' (expected per-batch or global)");
}

/// Training section. The kernel is stored separately.
inline nlohmann::json train_to_json(const KramConfig& c)
{
    nlohmann::json j{{"lambda", c.lambda},
                     {"target_mode", to_string(c.target_mode)},
                     {"objective", to_string(c.objective)},
                     {"epsilon", c.epsilon},
                     {"epochs", c.epochs},
                     {"batch_size", c.batch_size},
                     {"learning_rate", c.adam.learning_rate},
                     {"beta1", c.adam.beta1},
                     {"beta2", c.adam.beta2},
                     {"adam_eps", c.adam.eps},
                     {"record_timing", c.record_timing}};
    j["target_bits"] = c.target_bits ? nlohmann::json(*c.target_bits) : nlohmann::json(nullptr);
    j["hidden"] = c.hidden ? nlohmann::json(*c.hidden) : nlohmann::json(nullptr);
    j["output_dim"] = c.output_dim ? nlohmann::json(*c.output_dim) : nlohmann::json(nullptr);
    return j;
}

inline void train_from_json(const nlohmann::json& j, KramConfig& c)
{
    const std::string where = "train";
    config::check_keys(j,
                       {"lambda", "target_bits", "target_mode", "objective", "epsilon", "epochs", "batch_size",
                        "learning_rate", "beta1", "beta2", "adam_eps", "hidden", "output_dim", "record_timing"},
                       where);
    config::read(j, "lambda", where, c.lambda);
    if (j.contains("target_bits")) {
        c.target_bits = j["target_bits"].is_null() ? std::nullopt : std::optional(config::get<double>(j, "target_bits", where));
    }
    if (j.contains("target_mode")) c.target_mode = parse_target_mode(config::get<std::string>(j, "target_mode", where));
    if (j.contains("objective")) c.objective = parse_objective(config::get<std::string>(j, "objective", where));
    config::read(j, "epsilon", where, c.epsilon);
    config::read(j, "epochs", where, c.epochs);
    config::read(j, "batch_size", where, c.batch_size);
    config::read(j, "learning_rate", where, c.adam.learning_rate);
    config::read(j, "beta1", where, c.adam.beta1);
    config::read(j, "beta2", where, c.adam.beta2);
    config::read(j, "adam_eps", where, c.adam.eps);
    config::read(j, "record_timing", where, c.record_timing);
    if (j.contains("hidden")) {
        c.hidden = j["hidden"].is_null() ? std::nullopt : std::optional(config::get<std::vector<Index>>(j, "hidden", where));
    }
    if (j.contains("output_dim")) {
        c.output_dim = j["output_dim"].is_null() ? std::nullopt : std::optional(config::get<Index>(j, "output_dim", where));
    }
}

// ---------------------------------------------------------------------------
// KRAM checkpoint (little-endian):
//   "KRAM" | u32 version | u32 layer count
//   per layer: u64 in | u64 out | u8 activation
//   per layer: out*in f64 weights row-major, then out f64 biases
//   u64 length | config JSON (UTF-8)
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t kram_version = 1;

struct Checkpoint {
    ErasureNetwork network;
    nlohmann::json config = nlohmann::json::object();
};

inline std::string encode_checkpoint(const ErasureNetwork& net, const nlohmann::json& config)
{
    io::ByteWriter w;
    w.raw("KRAM", 4);
    w.u32(kram_version);
    w.u32(static_cast<std::uint32_t>(net.layers().size()));
    for (const auto& layer : net.layers()) {
        w.u64(static_cast<std::uint64_t>(layer.in_dim()));
        w.u64(static_cast<std::uint64_t>(layer.out_dim()));
        w.u8(static_cast<std::uint8_t>(layer.activation));
    }
    for (const auto& layer : net.layers()) {
        for (Index r = 0; r < layer.weight.rows(); ++r) {
            for (Index c = 0; c < layer.weight.cols(); ++c) w.f64(layer.weight(r, c));
        }
        for (Index r = 0; r < layer.bias.size(); ++r) w.f64(layer.bias(r));
    }
    w.string(config.dump());
    return w.bytes();
}

inline Checkpoint decode_checkpoint(std::string bytes, const std::string& source = "<memory>")
{
    io::ByteReader r(std::move(bytes), source);
    if (r.raw(4) != "KRAM") throw FormatError(source + ": not a KRAM checkpoint (bad magic)");
    const auto version = r.u32();
    if (version != kram_version) throw FormatError(source + ": unsupported checkpoint version " + std::to_string(version));
    const auto count = r.u32();
    r.expect_elements(count, 17);
    std::vector<Layer> layers(count);
    for (auto& layer : layers) {
        const auto in = r.u64();
        const auto out = r.u64();
        const auto act = r.u8();
        if (act > 1) throw FormatError(source + ": unknown activation tag " + std::to_string(act));
        r.expect_elements(in * out + out, 8);
        layer.weight.resize(static_cast<Index>(out), static_cast<Index>(in));
        layer.bias.resize(static_cast<Index>(out));
        layer.activation = static_cast<Activation>(act);
    }
    for (auto& layer : layers) {
        for (Index row = 0; row < layer.weight.rows(); ++row) {
            for (Index col = 0; col < layer.weight.cols(); ++col) layer.weight(row, col) = r.f64();
        }
        for (Index row = 0; row < layer.bias.size(); ++row) layer.bias(row) = r.f64();
    }
    Checkpoint cp;
    try {
        cp.network = ErasureNetwork(std::move(layers));
    } catch (const InvalidArgument& e) {
        throw FormatError(source + ": " + e.what());
    }
    const std::string text = r.string();
    try {
        cp.config = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception&) {
        throw FormatError(source + ": checkpoint config is not valid JSON");
    }
    if (!r.at_end()) throw FormatError(source + ": trailing bytes after checkpoint");
    return cp;
}

inline std::string encode_trace_csv(const TrainingTrace& trace)
{
    std::string out = "step,r_z,r_zk,loss,constraint,wall_ms\n";
    for (const auto& rec : trace) {
        out += std::to_string(rec.step) + ',' + io::format_double(rec.r_z) + ',' + io::format_double(rec.r_zk) + ',' +
               io::format_double(rec.loss) + ',' + io::format_double(rec.constraint) + ',' +
               io::format_double(rec.wall_ms) + '\n';
    }
    return out;
}

} // namespace erasekit
