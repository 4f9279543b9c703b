#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "alignment.hpp"
#include "checkpoint.hpp"
#include "datagen.hpp"
#include "erasure_net.hpp"
#include "eval_metrics.hpp"
#include "experiments.hpp"

namespace erasekit {

/// Either a generator with parameters or a feature file.
struct DatasetSource {
    std::string generator; // synthetic-continuous | two-gaussians | uniform
    std::filesystem::path path;
    Index n = 1000;
    Index d = 100;
    double lo = -1.0;
    double hi = 1.0;
    Index m = 10;
    std::optional<std::uint64_t> seed; // defaults to the experiment seed

    bool from_file() const { return !path.empty(); }
};

struct EvalConfig {
    std::vector<ProbeKind> probes{ProbeKind::mlp};
    std::optional<Index> alignment_k; // default floor(n / 2)
    double bandwidth = 0.1;
    bool fairness = true;
    ProbeSettings probe;
};

struct ExperimentConfig {
    std::uint64_t seed = 0;
    DatasetSource dataset;
    KramConfig train;
    EvalConfig eval;
    std::filesystem::path output_dir = "out";

    void validate() const
    {
        if (dataset.from_file() == !dataset.generator.empty()) {
            throw ConfigError("dataset needs exactly one of 'generator' or 'path'");
        }
        if (!dataset.from_file()) {
            if (dataset.generator != "synthetic-continuous" && dataset.generator != "two-gaussians" &&
                dataset.generator != "uniform") {
                throw ConfigError("unknown generator '" + dataset.generator +
                                  "' (expected synthetic-continuous, two-gaussians, or uniform)");
            }
            if (dataset.n < 2) throw ConfigError("dataset n must be at least 2");
            if (dataset.d < 1) throw ConfigError("dataset d must be at least 1");
            if (dataset.m < 1) throw ConfigError("dataset m must be at least 1");
            if (!(dataset.lo < dataset.hi)) throw ConfigError("dataset lo must be below hi");
        }
        train.validate();
        if (eval.probes.empty()) throw ConfigError("eval.probes must name at least one probe");
        if (eval.alignment_k && *eval.alignment_k < 1) throw ConfigError("eval.alignment_k must be positive");
        if (!(eval.bandwidth > 0.0)) throw ConfigError("eval.bandwidth must be positive");
        if (eval.probe.hidden_width < 1 || eval.probe.max_epochs < 1 || eval.probe.batch_size < 1 ||
            !(eval.probe.learning_rate > 0.0)) {
            throw ConfigError("eval.probe settings must be positive");
        }
    }

    static ExperimentConfig from_json(const nlohmann::json& j)
    {
        config::check_keys(j, {"seed", "dataset", "kernel", "train", "eval", "output_dir"}, "config");
        ExperimentConfig c;
        config::read(j, "seed", "config", c.seed);
        if (j.contains("dataset")) {
            const auto& d = j["dataset"];
            const std::string where = "dataset";
            config::check_keys(d, {"generator", "path", "n", "d", "lo", "hi", "m", "seed"}, where);
            config::read(d, "generator", where, c.dataset.generator);
            if (d.contains("path")) c.dataset.path = config::get<std::string>(d, "path", where);
            config::read(d, "n", where, c.dataset.n);
            config::read(d, "d", where, c.dataset.d);
            config::read(d, "lo", where, c.dataset.lo);
            config::read(d, "hi", where, c.dataset.hi);
            config::read(d, "m", where, c.dataset.m);
            if (d.contains("seed")) c.dataset.seed = config::get<std::uint64_t>(d, "seed", where);
        }
        if (j.contains("kernel")) c.train.kernel = kernel_from_json(j["kernel"]);
        if (j.contains("train")) train_from_json(j["train"], c.train);
        if (j.contains("eval")) {
            const auto& e = j["eval"];
            const std::string where = "eval";
            config::check_keys(e, {"probes", "alignment_k", "bandwidth", "fairness", "probe"}, where);
            if (e.contains("probes")) {
                c.eval.probes.clear();
                for (const auto& name : config::get<std::vector<std::string>>(e, "probes", where)) {
                    c.eval.probes.push_back(parse_probe_kind(name));
                }
            }
            if (e.contains("alignment_k") && !e["alignment_k"].is_null()) {
                c.eval.alignment_k = config::get<Index>(e, "alignment_k", where);
            }
            config::read(e, "bandwidth", where, c.eval.bandwidth);
            config::read(e, "fairness", where, c.eval.fairness);
            if (e.contains("probe")) {
                const auto& p = e["probe"];
                const std::string pw = "eval.probe";
                config::check_keys(p, {"hidden_width", "max_epochs", "batch_size", "learning_rate", "tolerance", "patience"}, pw);
                config::read(p, "hidden_width", pw, c.eval.probe.hidden_width);
                config::read(p, "max_epochs", pw, c.eval.probe.max_epochs);
                config::read(p, "batch_size", pw, c.eval.probe.batch_size);
                config::read(p, "learning_rate", pw, c.eval.probe.learning_rate);
                config::read(p, "tolerance", pw, c.eval.probe.tolerance);
                config::read(p, "patience", pw, c.eval.probe.patience);
            }
        }
        if (j.contains("output_dir")) c.output_dir = config::get<std::string>(j, "output_dir", "config");
        c.train.seed = c.seed;
        c.validate();
        return c;
    }

    static ExperimentConfig load(const std::filesystem::path& path)
    {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(io::read_file(path));
        } catch (const nlohmann::json::parse_error& e) {
            throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
        }
        return from_json(j);
    }
};

inline Dataset load_dataset(const DatasetSource& src, std::uint64_t default_seed)
{
    if (src.from_file()) {
        Dataset ds = load_features(src.path);
        ds.validate();
        return ds;
    }
    const std::uint64_t seed = src.seed.value_or(default_seed);
    if (src.generator == "synthetic-continuous") return gen_synthetic_continuous(src.n, src.d, seed);
    if (src.generator == "two-gaussians") return gen_two_gaussians(src.n, seed);
    if (src.generator == "uniform") return gen_uniform(src.n, src.d, src.lo, src.hi, src.m, seed);
    throw ConfigError("unknown generator '" + src.generator + "'");
}

/// Per-epoch means of the trace, for loss-evolution plots.
inline std::string loss_evolution_csv(const TrainingTrace& trace, Index steps_per_epoch)
{
    std::string out = "epoch,r_z,r_zk,loss,constraint\n";
    for (std::size_t start = 0; start < trace.size(); start += static_cast<std::size_t>(steps_per_epoch)) {
        const std::size_t end = std::min(trace.size(), start + static_cast<std::size_t>(steps_per_epoch));
        double r_z = 0.0, r_zk = 0.0, loss = 0.0, constraint = 0.0;
        for (std::size_t i = start; i < end; ++i) {
            r_z += trace[i].r_z;
            r_zk += trace[i].r_zk;
            loss += trace[i].loss;
            constraint += trace[i].constraint;
        }
        const auto count = static_cast<double>(end - start);
        out += std::to_string(start / static_cast<std::size_t>(steps_per_epoch)) + ',' + io::format_double(r_z / count) + ',' +
               io::format_double(r_zk / count) + ',' + io::format_double(loss / count) + ',' +
               io::format_double(constraint / count) + '\n';
    }
    return out;
}

inline nlohmann::json checkpoint_config(const ExperimentConfig& cfg)
{
    return {{"seed", cfg.seed}, {"kernel", kernel_to_json(cfg.train.kernel)}, {"train", train_to_json(cfg.train)}};
}

/// Trains the eraser and writes checkpoint.kram, trace.csv,
/// loss_evolution.csv, and erased.krdm into the output directory.
inline TrainResult run_erase(const ExperimentConfig& cfg, const Dataset& ds)
{
    TrainResult result = train(ds.features, ds.labels, cfg.train);
    const auto& dir = cfg.output_dir;
    io::write_file(dir / "checkpoint.kram", encode_checkpoint(result.network, checkpoint_config(cfg)));
    io::write_file(dir / "trace.csv", encode_trace_csv(result.trace));
    io::write_file(dir / "loss_evolution.csv", loss_evolution_csv(result.trace, ds.size() / cfg.train.batch_size));
    Dataset erased = ds;
    erased.features = erase(result.network, ds.features);
    erased.provenance.generator = "erased:" + ds.provenance.generator;
    save_features(dir / "erased.krdm", erased);
    return result;
}

namespace detail {

inline std::string metric_prefix(const ConceptLabels& labels)
{
    return labels.kind() == ConceptLabels::Kind::categorical ? "acc_" : "mse_";
}

inline std::vector<std::int64_t> gather_classes(const std::vector<std::int64_t>& v, const std::vector<Index>& rows)
{
    std::vector<std::int64_t> out;
    for (Index r : rows) out.push_back(v[static_cast<std::size_t>(r)]);
    return out;
}

/// DP or GDP of task predictions against the concept, on the probe's test rows.
inline std::optional<FairnessReport> fairness_of(const ProbeReport& task_probe, const ConceptLabels& attribute, double bandwidth)
{
    FairnessReport report;
    report.bandwidth = bandwidth;
    if (attribute.kind() == ConceptLabels::Kind::categorical) {
        const auto attr = gather_classes(attribute.classes(), task_probe.test_rows);
        for (auto a : attr) {
            if (a != 0 && a != 1) return std::nullopt;
        }
        if (std::find(attr.begin(), attr.end(), 0) == attr.end() || std::find(attr.begin(), attr.end(), 1) == attr.end()) {
            return std::nullopt;
        }
        report.dp = demographic_parity(task_probe.predicted_class, attr);
        return report;
    }
    if (task_probe.predicted.cols() != 2) return std::nullopt; // GDP needs a binary task
    std::vector<double> scores(static_cast<std::size_t>(task_probe.predicted.rows()));
    for (Index i = 0; i < task_probe.predicted.rows(); ++i) scores[static_cast<std::size_t>(i)] = task_probe.predicted(i, 1);
    const Eigen::MatrixXd attr = detail::gather(minmax_columns(attribute.as_matrix()), task_probe.test_rows);
    report.gdp_per_dimension = gdp_per_dimension(scores, attr, bandwidth);
    double sum = 0.0;
    for (double v : report.gdp_per_dimension) sum += v;
    report.gdp = sum / static_cast<double>(report.gdp_per_dimension.size());
    if (report.gdp_per_dimension.size() == 1) report.gdp_per_dimension.clear();
    return report;
}

} // namespace detail

/// Probes before and after erasure, A_k, and DP or GDP when a binary task
/// label is present. The headline keys use the first configured probe.
inline nlohmann::json evaluate(const ExperimentConfig& cfg, const Dataset& ds, const ErasureNetwork& net)
{
    const FeatureMatrix z = erase(net, ds.features);
    const Index n = ds.size();
    const Index k = cfg.eval.alignment_k.value_or(default_alignment_k(n));
    const std::uint64_t probe_seed = cfg.seed;

    nlohmann::json doc;
    doc["n"] = n;
    doc["d_in"] = ds.features.cols();
    doc["d_out"] = z.cols();
    doc["concept_kind"] = to_string(ds.labels.kind());
    const auto alignment = alignment_score(ds.features, z, k);
    doc["a_k"] = alignment.a_k;
    doc["alignment"] = alignment.to_json();

    nlohmann::json probes = nlohmann::json::array();
    const std::string concept_prefix = detail::metric_prefix(ds.labels);
    for (std::size_t p = 0; p < cfg.eval.probes.size(); ++p) {
        const ProbeKind kind = cfg.eval.probes[p];
        const auto before = train_probe(ds.features, ds.labels, kind, probe_seed, cfg.eval.probe);
        const auto after = train_probe(z, ds.labels, kind, probe_seed, cfg.eval.probe);
        nlohmann::json entry{{"probe", to_string(kind)}, {"concept_before", before.to_json()}, {"concept_after", after.to_json()}};
        if (p == 0) {
            doc[concept_prefix + "concept_before"] = before.value;
            doc[concept_prefix + "concept_after"] = after.value;
        }
        if (ds.task) {
            const std::string task_prefix = detail::metric_prefix(*ds.task);
            const auto task_before = train_probe(ds.features, *ds.task, kind, probe_seed, cfg.eval.probe);
            const auto task_after = train_probe(z, *ds.task, kind, probe_seed, cfg.eval.probe);
            entry["task_before"] = task_before.to_json();
            entry["task_after"] = task_after.to_json();
            if (p == 0) {
                doc[task_prefix + "task_before"] = task_before.value;
                doc[task_prefix + "task_after"] = task_after.value;
                if (cfg.eval.fairness && ds.task->kind() == ConceptLabels::Kind::categorical) {
                    const auto fb = detail::fairness_of(task_before, ds.labels, cfg.eval.bandwidth);
                    const auto fa = detail::fairness_of(task_after, ds.labels, cfg.eval.bandwidth);
                    if (fb && fa) {
                        doc["fairness"] = {{"before", fb->to_json()}, {"after", fa->to_json()}};
                        if (fa->dp) {
                            doc["dp_before"] = *fb->dp;
                            doc["dp_after"] = *fa->dp;
                        } else {
                            doc["gdp_before"] = *fb->gdp;
                            doc["gdp_after"] = *fa->gdp;
                        }
                    }
                }
            }
        }
        probes.push_back(std::move(entry));
    }
    doc["probes"] = std::move(probes);
    return doc;
}

/// Train, evaluate, and write evaluation.json next to the training outputs.
inline nlohmann::json run_pipeline(const ExperimentConfig& cfg)
{
    cfg.validate();
    const Dataset ds = load_dataset(cfg.dataset, cfg.seed);
    const TrainResult trained = run_erase(cfg, ds);
    nlohmann::json doc = evaluate(cfg, ds, trained.network);
    io::write_file(cfg.output_dir / "evaluation.json", doc.dump(2) + "\n");
    return doc;
}

} // namespace erasekit
