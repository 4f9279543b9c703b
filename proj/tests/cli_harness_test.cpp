#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <gtest/gtest.h>

#include <erasekit/pipeline.hpp>

using namespace erasekit;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name)
{
    const auto dir = fs::temp_directory_path() / ("erasekit_harness_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int run_cli(const std::string& args)
{
    const std::string cmd = std::string(ERASEKIT_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

ExperimentConfig small_config(const fs::path& out)
{
    ExperimentConfig cfg;
    cfg.seed = 3;
    cfg.dataset.generator = "two-gaussians";
    cfg.dataset.n = 200;
    cfg.train.epochs = 2;
    cfg.train.batch_size = 50;
    cfg.train.seed = 3;
    cfg.train.record_timing = false;
    cfg.eval.probe.max_epochs = 20;
    cfg.output_dir = out;
    return cfg;
}

} // namespace

TEST(Pearson, Examples)
{
    EXPECT_DOUBLE_EQ(pearson({1, 2, 3}, {2, 4, 6}), 1.0);
    EXPECT_DOUBLE_EQ(pearson({1, 2, 3}, {3, 2, 1}), -1.0);
    // x = 1..5, y = 2, 4, 5, 4, 5: sxy = 6, sxx = 10, syy = 6 -> r = 6 / sqrt(60)
    EXPECT_NEAR(pearson({1, 2, 3, 4, 5}, {2, 4, 5, 4, 5}), 6.0 / std::sqrt(60.0), 1e-12);
    EXPECT_THROW(pearson({1, 1, 1}, {1, 2, 3}), NumericalError);
    EXPECT_THROW(pearson({1, 2}, {1, 2, 3}), InvalidArgument);
}

TEST(NullspaceProjector, Identities)
{
    Rng rng(1);
    for (int t = 0; t < 10; ++t) {
        const Eigen::VectorXd u = rng.normal_matrix(6, 1);
        const Eigen::MatrixXd p = nullspace_projector(u);
        EXPECT_LT((p * p - p).norm(), 1e-12);
        EXPECT_LT((p - p.transpose()).norm(), 1e-12);
        EXPECT_LT((p * u).norm(), 1e-12);
        EXPECT_NEAR(p.trace(), 5.0, 1e-12);
    }
    EXPECT_THROW(nullspace_projector(Eigen::VectorXd::Zero(3)), InvalidArgument);
}

TEST(EigenMass, RankOneAndNormalization)
{
    Eigen::MatrixXd z(4, 2);
    z << 1, 2, 2, 4, -1, -2, 3, 6;
    const auto rank_one = eigen_mass(z);
    EXPECT_NEAR(rank_one[0], 1.0, 1e-12);
    EXPECT_NEAR(rank_one[1], 0.0, 1e-12);

    Rng rng(2);
    const Eigen::MatrixXd x = rng.normal_matrix(100, 5);
    for (auto s : {Spectrum::covariance, Spectrum::singular}) {
        const auto m = eigen_mass(x, s);
        double total = 0.0;
        for (std::size_t i = 0; i < m.size(); ++i) {
            total += m[i];
            if (i) {
                EXPECT_LE(m[i], m[i - 1]);
            }
        }
        EXPECT_NEAR(total, 1.0, 1e-12);
    }
    // Diagonal scaling: variances 9 and 1 give 0.9 / 0.1; singular values 3 and 1 give 0.75 / 0.25.
    Eigen::MatrixXd axes(4, 2);
    axes << 3, 0, -3, 0, 0, 1, 0, -1;
    EXPECT_NEAR(eigen_mass(axes)[0], 0.9, 1e-12);
    EXPECT_NEAR(eigen_mass(axes, Spectrum::singular)[0], 0.75, 1e-12);
    EXPECT_THROW(eigen_mass(Eigen::MatrixXd::Ones(3, 2)), NumericalError);
    EXPECT_THROW(parse_spectrum("trace"), ConfigError);
}

TEST(Config, RejectsUnknownKeysByName)
{
    const auto j = nlohmann::json::parse(R"({"dataset": {"generator": "uniform"}, "train": {"lamda": 1.0}})");
    try {
        ExperimentConfig::from_json(j);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("lamda"), std::string::npos) << e.what();
    }
    EXPECT_THROW(ExperimentConfig::from_json(nlohmann::json::parse(R"({"seeds": 1})")), ConfigError);
    EXPECT_THROW(ExperimentConfig::from_json(nlohmann::json::parse(R"({"dataset": {"generator": "uniform"}, "train": {"epochs": "ten"}})")),
                 ConfigError);
    EXPECT_THROW(ExperimentConfig::from_json(nlohmann::json::parse(R"({"dataset": {"generator": "moons"}})")), ConfigError);
    EXPECT_THROW(ExperimentConfig::from_json(nlohmann::json::parse(R"({"dataset": {"generator": "uniform", "path": "x.csv"}})")),
                 ConfigError);
}

TEST(Config, ParsesAllSections)
{
    const auto j = nlohmann::json::parse(R"({
        "seed": 11,
        "dataset": {"generator": "synthetic-continuous", "n": 300, "d": 20},
        "kernel": {"family": "gaussian", "sigma": 0.5},
        "train": {"lambda": 0.5, "epochs": 3, "batch_size": 100, "objective": "shrink", "target_mode": "global"},
        "eval": {"probes": ["linear", "mlp"], "alignment_k": 10, "probe": {"max_epochs": 5}},
        "output_dir": "runs/a"
    })");
    const auto cfg = ExperimentConfig::from_json(j);
    EXPECT_EQ(cfg.seed, 11u);
    EXPECT_EQ(cfg.train.seed, 11u);
    EXPECT_EQ(cfg.dataset.n, 300);
    EXPECT_EQ(cfg.train.kernel.sigma, 0.5);
    EXPECT_EQ(cfg.train.objective, Objective::shrink);
    EXPECT_EQ(cfg.train.target_mode, TargetMode::global);
    EXPECT_EQ(cfg.eval.probes.size(), 2u);
    EXPECT_EQ(cfg.eval.alignment_k, 10);
    EXPECT_EQ(cfg.eval.probe.max_epochs, 5);
    EXPECT_EQ(cfg.output_dir, fs::path("runs/a"));
}

TEST(Checkpoint, RoundTrip)
{
    KramConfig c;
    c.hidden = std::vector<Index>{7};
    c.output_dim = 4;
    Rng init(9);
    const auto net = ErasureNetwork::make(5, {7}, 4, init);
    const nlohmann::json meta{{"train", train_to_json(c)}};
    const auto cp = decode_checkpoint(encode_checkpoint(net, meta));
    EXPECT_EQ(cp.config, meta);
    Rng rng(3);
    const FeatureMatrix x = rng.normal_matrix(12, 5);
    EXPECT_EQ(erase(cp.network, x), erase(net, x));
    EXPECT_EQ(encode_checkpoint(cp.network, cp.config), encode_checkpoint(net, meta));

    KramConfig back;
    train_from_json(train_to_json(c), back);
    EXPECT_EQ(train_to_json(back), train_to_json(c));
}

TEST(Checkpoint, RejectsCorruptInput)
{
    Rng init(1);
    const auto net = ErasureNetwork::make(3, {4}, 3, init);
    std::string bytes = encode_checkpoint(net, nlohmann::json::object());
    std::string bad = bytes;
    bad[1] = 'X';
    EXPECT_THROW(decode_checkpoint(bad), FormatError);
    EXPECT_THROW(decode_checkpoint(bytes.substr(0, bytes.size() / 2)), FormatError);
    EXPECT_THROW(decode_checkpoint(bytes + "!"), FormatError);
}

TEST(Trace, CsvHeaderAndRows)
{
    TrainingTrace trace{{0, 1.5, 2.5, -2.0, 0.25, 0.0}, {1, 1.25, 2.75, -2.5, 0.125, 0.0}};
    const auto csv = encode_trace_csv(trace);
    EXPECT_EQ(csv, "step,r_z,r_zk,loss,constraint,wall_ms\n0,1.5,2.5,-2,0.25,0\n1,1.25,2.75,-2.5,0.125,0\n");
    EXPECT_EQ(loss_evolution_csv(trace, 2), "epoch,r_z,r_zk,loss,constraint\n0,1.375,2.625,-2.25,0.1875\n");
}

TEST(Pipeline, DeterministicOutputs)
{
    const auto a_dir = scratch_dir("pipe_a"), b_dir = scratch_dir("pipe_b");
    const auto a = run_pipeline(small_config(a_dir));
    const auto b = run_pipeline(small_config(b_dir));
    EXPECT_EQ(a, b);
    for (const char* f : {"checkpoint.kram", "trace.csv", "loss_evolution.csv", "erased.krdm", "evaluation.json"}) {
        ASSERT_TRUE(fs::exists(a_dir / f)) << f;
        EXPECT_EQ(io::read_file(a_dir / f), io::read_file(b_dir / f)) << f;
    }
    for (const char* key : {"a_k", "mse_concept_before", "mse_concept_after", "acc_task_before", "acc_task_after",
                            "gdp_before", "gdp_after"}) {
        EXPECT_TRUE(a.contains(key)) << key;
    }
    EXPECT_EQ(a["n"], 200);
    fs::remove_all(a_dir);
    fs::remove_all(b_dir);
}

TEST(Simulation, SmallRunIsDeterministicAndExhaustsRank)
{
    const auto ds = gen_uniform(120, 4, -1.0, 1.0, 5, 2);
    ProbeSettings quick;
    quick.max_epochs = 30;
    const auto a = simulate_erasure(ds.features, 5, 60, 2, ProbeKind::linear, quick);
    const auto b = simulate_erasure(ds.features, 5, 60, 2, ProbeKind::linear, quick);
    EXPECT_EQ(a.to_json(), b.to_json());
    ASSERT_EQ(a.records.size(), 4u);
    EXPECT_EQ(a.records.back().iteration, 4);
    EXPECT_LE(a.r, 1.0);
    EXPECT_GE(a.r, -1.0);
    EXPECT_EQ(a.to_csv().substr(0, 23), "iteration,accuracy,a_k\n");

    // Projecting out every right singular direction leaves nothing.
    const Eigen::BDCSVD<Eigen::MatrixXd> svd(ds.features, Eigen::ComputeThinV);
    Eigen::MatrixXd z = ds.features;
    for (Index i = 0; i < 4; ++i) z = z * nullspace_projector(svd.matrixV().col(i));
    EXPECT_LT(z.cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Cli, ExitCodes)
{
    const auto dir = scratch_dir("cli");
    EXPECT_EQ(run_cli("--help"), 0);
    EXPECT_EQ(run_cli(""), 2);
    EXPECT_EQ(run_cli("erase --bogus-flag"), 2);

    std::ofstream(dir / "bad.json") << R"({"dataset": {"generator": "uniform"}, "train": {"lamda": 1}})";
    EXPECT_EQ(run_cli("erase -c " + (dir / "bad.json").string()), 2);
    EXPECT_EQ(run_cli("erase --data " + (dir / "missing.krdm").string() + " -o " + dir.string()), 1);

    EXPECT_EQ(run_cli("gen-data --generator two-gaussians --n 100 --seed 4 -o " + (dir / "x.krdm").string()), 0);
    EXPECT_EQ(run_cli("eigen-mass --data " + (dir / "x.krdm").string() + " --spectrum trace"), 2);
    EXPECT_EQ(run_cli("eigen-mass --data " + (dir / "x.krdm").string() + " -o " + (dir / "eig.json").string()), 0);
    const auto eig = nlohmann::json::parse(io::read_file(dir / "eig.json"));
    EXPECT_EQ(eig["fractions"].size(), 2u);
    EXPECT_EQ(run_cli("erase --data " + (dir / "x.krdm").string() + " --epochs 1 --batch-size 50 --no-timing -o " +
                      (dir / "run").string()),
              0);
    EXPECT_TRUE(fs::exists(dir / "run" / "checkpoint.kram"));
    EXPECT_EQ(run_cli("align --x " + (dir / "x.krdm").string() + " --checkpoint " + (dir / "run" / "checkpoint.kram").string() +
                      " --k 10 --degree-norm l1 -o " + (dir / "align.json").string()),
              0);
    const auto align = nlohmann::json::parse(io::read_file(dir / "align.json"));
    EXPECT_TRUE(align.contains("a_k"));
    EXPECT_TRUE(align.contains("degree_distance"));
    fs::remove_all(dir);
}
