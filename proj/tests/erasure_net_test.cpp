#include <cmath>

#include <gtest/gtest.h>

#include <erasekit/erasure_net.hpp>

#include "support.hpp"

using namespace erasekit;
using testing_support::numeric_gradient;
using testing_support::relative_error;

namespace {

double network_loss(ErasureNetwork net, std::size_t layer, bool bias, Index r, Index c, double value,
                    const Eigen::MatrixXd& x, const Eigen::MatrixXd& upstream)
{
    auto& l = net.layers()[layer];
    if (bias) {
        l.bias(r) = value;
    } else {
        l.weight(r, c) = value;
    }
    return (net.forward(x).array() * upstream.array()).sum();
}

double max_backprop_error(const ErasureNetwork& net, const Eigen::MatrixXd& x, const Eigen::MatrixXd& upstream)
{
    ForwardCache cache;
    net.forward(x, cache);
    const auto grads = net.backward(cache, upstream);
    double worst = 0.0;
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
        const auto& layer = net.layers()[l];
        for (int part = 0; part < 2; ++part) {
            const bool bias = part == 1;
            const Index rows = layer.out_dim(), cols = bias ? 1 : layer.in_dim();
            Eigen::MatrixXd numeric(rows, cols);
            for (Index r = 0; r < rows; ++r) {
                for (Index c = 0; c < cols; ++c) {
                    const double v = bias ? layer.bias(r) : layer.weight(r, c);
                    const double h = 1e-6;
                    numeric(r, c) = (network_loss(net, l, bias, r, c, v + h, x, upstream) -
                                     network_loss(net, l, bias, r, c, v - h, x, upstream)) / (2 * h);
                }
            }
            const Eigen::MatrixXd analytic = bias ? Eigen::MatrixXd(grads[l].bias) : grads[l].weight;
            worst = std::max(worst, relative_error(analytic, numeric));
        }
    }
    return worst;
}

} // namespace

TEST(ErasureNetwork, OutputRowsAreUnitNorm)
{
    Rng rng(1);
    const auto net = ErasureNetwork::make(5, {8, 6}, 4, rng);
    const auto z = net.forward(rng.normal_matrix(50, 5) * 3.0);
    EXPECT_TRUE(is_sphere_normalized(z));
}

TEST(ErasureNetwork, IdentityLayerPassesUnitRows)
{
    Rng rng(2);
    const Eigen::MatrixXd x = normalize_rows(rng.normal_matrix(10, 4));
    EXPECT_LE((ErasureNetwork::identity(4).forward(x) - x).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(ErasureNetwork, ZeroPreactivationMapsToFirstBasisVector)
{
    std::vector<Layer> layers{{Eigen::MatrixXd::Zero(3, 2), Eigen::VectorXd::Zero(3), Activation::none}};
    const auto z = ErasureNetwork(layers).forward(Eigen::MatrixXd::Ones(2, 2));
    EXPECT_EQ(z.row(0), Eigen::RowVector3d(1, 0, 0));
}

TEST(ErasureNetwork, ForwardIsDeterministic)
{
    Rng a(3), b(3);
    const auto na = ErasureNetwork::make(4, {7}, 4, a);
    const auto nb = ErasureNetwork::make(4, {7}, 4, b);
    Rng data(4);
    const Eigen::MatrixXd x = data.normal_matrix(20, 4);
    EXPECT_EQ(na.forward(x), nb.forward(x));
}

TEST(ErasureNetwork, ShapeErrors)
{
    Rng rng(5);
    const auto net = ErasureNetwork::make(4, {}, 4, rng);
    EXPECT_THROW(net.forward(Eigen::MatrixXd::Ones(3, 5)), InvalidArgument);
    EXPECT_THROW(net.backward(ForwardCache{}, Eigen::MatrixXd::Ones(3, 4)), InvalidArgument);
    std::vector<Layer> bad{{Eigen::MatrixXd::Ones(3, 2), Eigen::VectorXd::Ones(3), Activation::relu},
                           {Eigen::MatrixXd::Ones(2, 4), Eigen::VectorXd::Ones(2), Activation::none}};
    EXPECT_THROW(ErasureNetwork{bad}, InvalidArgument);
}

TEST(Backward, ZeroUpstreamGivesZeroGradients)
{
    Rng rng(6);
    const auto net = ErasureNetwork::make(3, {5}, 2, rng);
    ForwardCache cache;
    net.forward(rng.normal_matrix(7, 3), cache);
    for (const auto& g : net.backward(cache, Eigen::MatrixXd::Zero(7, 2))) {
        EXPECT_EQ(g.weight.cwiseAbs().maxCoeff(), 0.0);
        EXPECT_EQ(g.bias.cwiseAbs().maxCoeff(), 0.0);
    }
}

TEST(Backward, MatchesFiniteDifferencesOnTinyNets)
{
    Rng rng(7);
    for (int t = 0; t < 20; ++t) {
        const auto net = ErasureNetwork::make(2, {3}, 2, rng);
        const Eigen::MatrixXd x = rng.normal_matrix(6, 2);
        const Eigen::MatrixXd up = rng.normal_matrix(6, 2);
        EXPECT_LE(max_backprop_error(net, x, up), 1e-4);
    }
    const auto deep = ErasureNetwork::make(4, {6, 5}, 3, rng);
    EXPECT_LE(max_backprop_error(deep, rng.normal_matrix(9, 4), rng.normal_matrix(9, 3)), 1e-4);
}

TEST(Backward, SingleLinearLayerClosedForm)
{
    Rng rng(8);
    const auto net = ErasureNetwork::make(3, {}, 3, rng);
    const Eigen::MatrixXd x = rng.normal_matrix(5, 3);
    const Eigen::MatrixXd up = Eigen::MatrixXd::Identity(5, 3);
    ForwardCache cache;
    const Eigen::MatrixXd z = net.forward(x, cache);
    const Eigen::MatrixXd h = x * net.layers()[0].weight.transpose() + Eigen::VectorXd::Ones(5) * net.layers()[0].bias.transpose();
    Eigen::MatrixXd projected(5, 3);
    for (Index i = 0; i < 5; ++i) {
        const Eigen::RowVectorXd zi = z.row(i);
        projected.row(i) = (up.row(i) - zi * zi.dot(up.row(i))) / h.row(i).norm();
    }
    const auto g = net.backward(cache, up);
    EXPECT_LE((g[0].weight - projected.transpose() * x).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((g[0].bias - projected.colwise().sum().transpose()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(KramConfig, Validation)
{
    KramConfig cfg;
    EXPECT_NO_THROW(cfg.validate());
    auto bad = cfg;
    bad.batch_size = 1;
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = cfg;
    bad.epochs = 0;
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = cfg;
    bad.adam.learning_rate = 0.0;
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = cfg;
    bad.lambda = -0.1;
    EXPECT_THROW(bad.validate(), ConfigError);
}

namespace {

struct SmallProblem {
    Eigen::MatrixXd x;
    ConceptLabels labels = ConceptLabels::continuous({});
};

SmallProblem small_problem(Index n = 96, Index d = 6)
{
    Rng rng(11);
    SmallProblem p;
    p.x = rng.normal_matrix(n, d);
    std::vector<double> a(static_cast<std::size_t>(n));
    for (auto& v : a) v = rng.uniform();
    p.labels = ConceptLabels::continuous(a);
    return p;
}

} // namespace

TEST(Train, StepCountAndTraceShape)
{
    const auto p = small_problem(100, 6);
    KramConfig cfg;
    cfg.batch_size = 32;
    cfg.epochs = 3;
    cfg.record_timing = false;
    const auto res = train(p.x, p.labels, cfg);
    ASSERT_EQ(res.trace.size(), 9u); // floor(100 / 32) = 3 steps per epoch
    for (std::size_t i = 0; i < res.trace.size(); ++i) {
        EXPECT_EQ(res.trace[i].step, static_cast<std::int64_t>(i));
        EXPECT_EQ(res.trace[i].wall_ms, 0.0);
        EXPECT_GE(res.trace[i].r_zk, res.trace[i].r_z - 1e-7);
    }
    EXPECT_TRUE(res.network.parameters_finite());
}

TEST(Train, DeterministicTraceAndParameters)
{
    const auto p = small_problem();
    KramConfig cfg;
    cfg.batch_size = 32;
    cfg.epochs = 2;
    cfg.record_timing = false;
    cfg.seed = 99;
    const auto a = train(p.x, p.labels, cfg);
    const auto b = train(p.x, p.labels, cfg);
    ASSERT_EQ(a.trace.size(), b.trace.size());
    for (std::size_t i = 0; i < a.trace.size(); ++i) {
        EXPECT_EQ(a.trace[i].loss, b.trace[i].loss);
        EXPECT_EQ(a.trace[i].r_z, b.trace[i].r_z);
    }
    for (std::size_t l = 0; l < a.network.layers().size(); ++l) {
        EXPECT_EQ(a.network.layers()[l].weight, b.network.layers()[l].weight);
        EXPECT_EQ(a.network.layers()[l].bias, b.network.layers()[l].bias);
    }
}

TEST(Train, ConstantLabelsMakeKernelRateEqualPlainRate)
{
    auto p = small_problem();
    p.labels = ConceptLabels::continuous(std::vector<double>(96, 0.5));
    KramConfig cfg;
    cfg.lambda = 0.0;
    cfg.batch_size = 32;
    cfg.epochs = 2;
    const auto res = train(p.x, p.labels, cfg);
    for (const auto& rec : res.trace) EXPECT_NEAR(rec.r_zk, rec.r_z, 1e-9);
}

TEST(Train, RejectsBadInputs)
{
    const auto p = small_problem(40, 4);
    KramConfig cfg;
    cfg.batch_size = 41;
    EXPECT_THROW(train(p.x, p.labels, cfg), InvalidArgument);
    cfg.batch_size = 8;
    EXPECT_THROW(train(p.x, ConceptLabels::continuous({1.0, 2.0}), cfg), InvalidArgument);
    cfg.kernel.family = KernelFamily::indicator;
    EXPECT_THROW(train(p.x, p.labels, cfg), InvalidArgument);
}

TEST(Train, DivergenceCarriesPartialTrace)
{
    const auto p = small_problem(64, 4);
    KramConfig cfg;
    cfg.batch_size = 16;
    cfg.epochs = 50;
    cfg.adam.learning_rate = 1e300;
    try {
        train(p.x, p.labels, cfg);
        GTEST_SKIP() << "training did not diverge";
    } catch (const TrainingDiverged& e) {
        EXPECT_FALSE(e.partial_trace().empty());
        for (const auto& rec : e.partial_trace()) EXPECT_TRUE(std::isfinite(rec.loss));
    }
}

TEST(Train, GlobalTargetUsesSeededReferenceSample)
{
    const auto p = small_problem();
    KramConfig cfg;
    cfg.batch_size = 32;
    cfg.epochs = 2;
    cfg.seed = 5;
    cfg.target_mode = TargetMode::global;
    Rng ref = Rng::stream(cfg.seed, 2);
    auto order = ref.permutation(p.x.rows());
    const Eigen::MatrixXd xn = normalize_rows(p.x);
    Eigen::MatrixXd sample(32, xn.cols());
    for (Index i = 0; i < 32; ++i) sample.row(i) = xn.row(order[static_cast<std::size_t>(i)]);
    const double b = rate_distortion(sample, {cfg.epsilon});
    for (const auto& rec : train(p.x, p.labels, cfg).trace) EXPECT_NEAR(rec.constraint, std::abs(rec.r_z - b), 1e-12);
}
