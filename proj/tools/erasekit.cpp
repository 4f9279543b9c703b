// Command-line front end: data generation, erasure training, evaluation,
// alignment reports, the simulated-erasure study, and eigen-mass spectra.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include <erasekit/erasekit.hpp>

namespace fs = std::filesystem;
using namespace erasekit;

namespace {

struct CommonOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
};

void add_common(CLI::App* cmd, CommonOptions& opts, const std::string& out_help)
{
    cmd->add_option("-c,--config", opts.config, "JSON experiment config");
    cmd->add_option("--seed", opts.seed, "Global seed (overrides the config)");
    cmd->add_option("-o,--out", opts.out, out_help);
}

ExperimentConfig load_config(const CommonOptions& opts)
{
    ExperimentConfig cfg = opts.config.empty() ? ExperimentConfig{} : ExperimentConfig::load(opts.config);
    if (opts.seed) {
        cfg.seed = *opts.seed;
        cfg.train.seed = *opts.seed;
    }
    if (!opts.out.empty()) cfg.output_dir = opts.out;
    return cfg;
}

void emit(const nlohmann::json& doc, const std::string& path)
{
    const std::string text = doc.dump(2) + "\n";
    if (path.empty()) {
        std::cout << text;
    } else {
        io::write_file(path, text);
    }
}

FeatureMatrix erased_or_raw(const Dataset& ds, const std::string& checkpoint)
{
    if (checkpoint.empty()) return ds.features;
    return erase(decode_checkpoint(io::read_file(checkpoint), checkpoint).network, ds.features);
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Concept erasure with kernelized rate-distortion objectives"};
    app.require_subcommand(1);

    // gen-data
    CommonOptions gen_opts;
    DatasetSource gen_src;
    std::optional<Index> gen_n, gen_d, gen_m;
    std::string gen_generator;
    auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
    add_common(gen, gen_opts, "Output feature file (.krdm or .csv)");
    gen->add_option("--generator", gen_generator, "synthetic-continuous | two-gaussians | uniform");
    gen->add_option("--n", gen_n, "Number of instances");
    gen->add_option("--d", gen_d, "Feature dimension");
    gen->add_option("--m", gen_m, "Hidden width of the random label net (uniform)");

    // erase
    CommonOptions erase_opts;
    std::string erase_data, erase_objective;
    std::optional<double> erase_lambda, erase_lr, erase_sigma;
    std::optional<int> erase_epochs;
    std::optional<Index> erase_batch;
    bool erase_no_timing = false;
    auto* erase_cmd = app.add_subcommand("erase", "Train an erasure network");
    add_common(erase_cmd, erase_opts, "Output directory");
    erase_cmd->add_option("--data", erase_data, "Feature file (overrides the config dataset)");
    erase_cmd->add_option("--lambda", erase_lambda, "Constraint weight");
    erase_cmd->add_option("--epochs", erase_epochs, "Training epochs");
    erase_cmd->add_option("--batch-size", erase_batch, "Minibatch size");
    erase_cmd->add_option("--learning-rate", erase_lr, "Adam learning rate");
    erase_cmd->add_option("--sigma", erase_sigma, "Kernel bandwidth");
    erase_cmd->add_option("--objective", erase_objective, "kram | kernel-only | shrink");
    erase_cmd->add_flag("--no-timing", erase_no_timing, "Write wall_ms = 0 in the trace");

    // eval
    CommonOptions eval_opts;
    std::string eval_data, eval_checkpoint;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a trained erasure network");
    add_common(eval_cmd, eval_opts, "Output directory");
    eval_cmd->add_option("--data", eval_data, "Feature file (overrides the config dataset)");
    eval_cmd->add_option("--checkpoint", eval_checkpoint, "KRAM checkpoint (default: <out>/checkpoint.kram)");

    // align
    CommonOptions align_opts;
    std::string align_x, align_z, align_checkpoint, align_degree;
    std::optional<Index> align_k, align_ksg;
    auto* align_cmd = app.add_subcommand("align", "kNN alignment between two representations");
    add_common(align_cmd, align_opts, "Output JSON file (default: stdout)");
    align_cmd->add_option("--x", align_x, "Original feature file")->required();
    align_cmd->add_option("--z", align_z, "Erased feature file");
    align_cmd->add_option("--checkpoint", align_checkpoint, "Compute Z by applying this checkpoint to X");
    align_cmd->add_option("--k", align_k, "Neighborhood size (default floor(n/2))");
    align_cmd->add_option("--ksg-k", align_ksg, "Also report the KSG mutual information with this k");
    align_cmd->add_option("--degree-norm", align_degree, "Also report the degree distance (l1 | l2 | kl)");

    // simulate-erasure
    CommonOptions sim_opts;
    std::string sim_data, sim_probe = "mlp";
    std::optional<Index> sim_n, sim_d, sim_k;
    Index sim_m = 10;
    auto* sim_cmd = app.add_subcommand("simulate-erasure", "Nullspace-projection study of probe accuracy vs A_k");
    add_common(sim_cmd, sim_opts, "Output directory");
    sim_cmd->add_option("--data", sim_data, "Feature file (default: the uniform generator)");
    sim_cmd->add_option("--n", sim_n, "Generated instances");
    sim_cmd->add_option("--d", sim_d, "Generated dimension");
    sim_cmd->add_option("--m", sim_m, "Hidden width of the random label net");
    sim_cmd->add_option("--k", sim_k, "Alignment neighborhood (default floor(n/2))");
    sim_cmd->add_option("--probe", sim_probe, "linear | mlp");

    // eigen-mass
    CommonOptions eig_opts;
    std::string eig_data, eig_checkpoint, eig_spectrum = "covariance";
    auto* eig_cmd = app.add_subcommand("eigen-mass", "Spectral mass fractions of a representation");
    add_common(eig_cmd, eig_opts, "Output JSON file (default: stdout)");
    eig_cmd->add_option("--data", eig_data, "Feature file")->required();
    eig_cmd->add_option("--checkpoint", eig_checkpoint, "Apply this checkpoint first");
    eig_cmd->add_option("--spectrum", eig_spectrum, "covariance | singular");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed()) {
            ExperimentConfig cfg = load_config(gen_opts);
            DatasetSource src = cfg.dataset;
            if (!gen_generator.empty()) {
                src.generator = gen_generator;
                src.path.clear();
            }
            if (gen_n) src.n = *gen_n;
            if (gen_d) src.d = *gen_d;
            if (gen_m) src.m = *gen_m;
            if (gen_opts.seed) src.seed = *gen_opts.seed;
            if (src.generator.empty()) throw ConfigError("gen-data needs --generator or a config dataset generator");
            if (gen_opts.out.empty()) throw ConfigError("gen-data needs --out");
            cfg.dataset = src;
            cfg.validate();
            save_features(gen_opts.out, load_dataset(src, cfg.seed));
        } else if (erase_cmd->parsed()) {
            ExperimentConfig cfg = load_config(erase_opts);
            if (!erase_data.empty()) {
                cfg.dataset.path = erase_data;
                cfg.dataset.generator.clear();
            }
            if (erase_lambda) cfg.train.lambda = *erase_lambda;
            if (erase_epochs) cfg.train.epochs = *erase_epochs;
            if (erase_batch) cfg.train.batch_size = *erase_batch;
            if (erase_lr) cfg.train.adam.learning_rate = *erase_lr;
            if (erase_sigma) cfg.train.kernel.sigma = *erase_sigma;
            if (!erase_objective.empty()) cfg.train.objective = parse_objective(erase_objective);
            if (erase_no_timing) cfg.train.record_timing = false;
            cfg.validate();
            const Dataset ds = load_dataset(cfg.dataset, cfg.seed);
            const auto result = run_erase(cfg, ds);
            const auto& last = result.trace.back();
            std::cerr << "trained " << result.trace.size() << " steps; final R(Z)=" << last.r_z << " R(Z|K)=" << last.r_zk
                      << " -> " << cfg.output_dir.string() << "\n";
        } else if (eval_cmd->parsed()) {
            ExperimentConfig cfg = load_config(eval_opts);
            if (!eval_data.empty()) {
                cfg.dataset.path = eval_data;
                cfg.dataset.generator.clear();
            }
            cfg.validate();
            const Dataset ds = load_dataset(cfg.dataset, cfg.seed);
            const fs::path ckpt = eval_checkpoint.empty() ? cfg.output_dir / "checkpoint.kram" : fs::path(eval_checkpoint);
            const auto cp = decode_checkpoint(io::read_file(ckpt), ckpt.string());
            const auto doc = evaluate(cfg, ds, cp.network);
            io::write_file(cfg.output_dir / "evaluation.json", doc.dump(2) + "\n");
            std::cout << doc.dump(2) << "\n";
        } else if (align_cmd->parsed()) {
            const Dataset xs = load_features(align_x);
            FeatureMatrix z;
            if (!align_z.empty()) {
                z = load_features(align_z).features;
            } else if (!align_checkpoint.empty()) {
                z = erased_or_raw(xs, align_checkpoint);
            } else {
                throw ConfigError("align needs --z or --checkpoint");
            }
            const Index k = align_k.value_or(default_alignment_k(xs.size()));
            nlohmann::json doc = alignment_score(xs.features, z, k).to_json();
            if (align_ksg) doc["ksg_mi"] = ksg_mi(xs.features, z, *align_ksg);
            if (!align_degree.empty()) {
                doc["degree_distance"] = degree_distance(xs.features, z, k, parse_degree_norm(align_degree));
                doc["degree_norm"] = align_degree;
            }
            emit(doc, align_opts.out);
        } else if (sim_cmd->parsed()) {
            ExperimentConfig cfg = load_config(sim_opts);
            if (sim_opts.config.empty()) {
                cfg.dataset.generator = "uniform";
                cfg.dataset.n = 2000;
            }
            if (!sim_data.empty()) {
                cfg.dataset.path = sim_data;
                cfg.dataset.generator.clear();
            }
            if (sim_n) cfg.dataset.n = *sim_n;
            if (sim_d) cfg.dataset.d = *sim_d;
            cfg.validate();
            const Dataset ds = load_dataset(cfg.dataset, cfg.seed);
            const Index k = sim_k.value_or(default_alignment_k(ds.size()));
            const auto report = simulate_erasure(ds.features, sim_m, k, cfg.seed, parse_probe_kind(sim_probe), cfg.eval.probe);
            io::write_file(cfg.output_dir / "simulation.json", report.to_json().dump(2) + "\n");
            io::write_file(cfg.output_dir / "alignment_vs_iteration.csv", report.to_csv());
            std::cout << "pearson_r " << report.r << "\n";
        } else if (eig_cmd->parsed()) {
            const Dataset ds = load_features(eig_data);
            const auto fractions = eigen_mass(erased_or_raw(ds, eig_checkpoint), parse_spectrum(eig_spectrum));
            emit({{"spectrum", eig_spectrum}, {"fractions", fractions}}, eig_opts.out);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const InvalidArgument& e) {
        std::cerr << "invalid argument: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
