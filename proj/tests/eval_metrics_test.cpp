#include <cmath>

#include <gtest/gtest.h>

#include <erasekit/eval_metrics.hpp>

#include "support.hpp"

using namespace erasekit;

TEST(Probe, ConstantCategoricalTargetIsPerfect)
{
    Rng rng(1);
    const auto r = train_probe(rng.normal_matrix(50, 3), ConceptLabels::categorical(std::vector<std::int64_t>(50, 7)),
                               ProbeKind::mlp, 1);
    EXPECT_EQ(r.value, 1.0);
    EXPECT_EQ(r.n_train + r.n_test, 50);
    EXPECT_EQ(r.n_test, 10);
}

TEST(Probe, NoiseTargetMseNearVariance)
{
    Rng rng(2);
    const Index n = 3000;
    const Eigen::MatrixXd z = rng.normal_matrix(n, 5);
    std::vector<double> y(static_cast<std::size_t>(n));
    for (auto& v : y) v = rng.uniform();
    for (auto kind : {ProbeKind::linear, ProbeKind::mlp}) {
        const auto r = train_probe(z, ConceptLabels::continuous(y), kind, 3);
        // Targets are min-max scaled; for U(0, 1) the range is ~[0, 1].
        EXPECT_NEAR(r.value, 1.0 / 12.0, 0.2 / 12.0) << to_string(kind);
    }
}

TEST(Probe, SeparableGaussiansLinearProbe)
{
    Rng rng(4);
    const Index n = 2000;
    Eigen::MatrixXd z = rng.normal_matrix(n, 3);
    std::vector<std::int64_t> y(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        y[static_cast<std::size_t>(i)] = i % 2;
        z(i, 0) += i % 2 == 0 ? -3.0 : 3.0;
    }
    const auto r = train_probe(z, ConceptLabels::categorical(y), ProbeKind::linear, 5);
    // Closed-form LDA boundary for equal priors and covariance: sign of the first coordinate.
    Index lda_correct = 0;
    for (Index i : r.test_rows) lda_correct += (z(i, 0) > 0.0) == (i % 2 == 1) ? 1 : 0;
    const double lda = static_cast<double>(lda_correct) / static_cast<double>(r.test_rows.size());
    ASSERT_GE(lda, 0.99);
    EXPECT_GE(r.value, 0.99);
    EXPECT_GE(r.value, lda - 0.01);
}

TEST(Probe, VectorTargetsReportPerDimension)
{
    Rng rng(6);
    const Eigen::MatrixXd z = rng.normal_matrix(200, 4);
    Eigen::MatrixXd y(200, 2);
    y.col(0) = z.col(0);
    y.col(1) = rng.normal_matrix(200, 1);
    const auto r = train_probe(z, ConceptLabels::vector(y), ProbeKind::linear, 7);
    ASSERT_EQ(r.per_dimension.size(), 2u);
    EXPECT_LT(r.per_dimension[0], 1e-6);
    EXPECT_GT(r.per_dimension[1], 1e-3);
    EXPECT_DOUBLE_EQ(r.value, 0.5 * (r.per_dimension[0] + r.per_dimension[1]));
    const auto j = r.to_json();
    EXPECT_EQ(j["target"], "regression-mse");
    EXPECT_EQ(j["per_dimension"].size(), 2u);
}

TEST(Probe, Deterministic)
{
    Rng rng(8);
    const Eigen::MatrixXd z = rng.normal_matrix(120, 4);
    std::vector<std::int64_t> y(120);
    for (Index i = 0; i < 120; ++i) y[static_cast<std::size_t>(i)] = z(i, 1) > 0.3 ? 1 : 0;
    const auto a = train_probe(z, ConceptLabels::categorical(y), ProbeKind::mlp, 9);
    const auto b = train_probe(z, ConceptLabels::categorical(y), ProbeKind::mlp, 9);
    EXPECT_EQ(a.to_json(), b.to_json());
    EXPECT_EQ(a.predicted, b.predicted);
}

TEST(Probe, Errors)
{
    Rng rng(10);
    EXPECT_THROW(train_probe(rng.normal_matrix(10, 2), ConceptLabels::continuous(std::vector<double>(10, 1.0)), ProbeKind::mlp, 1),
                 InvalidArgument);
    EXPECT_THROW(train_probe(rng.normal_matrix(30, 2), ConceptLabels::continuous(std::vector<double>(29, 1.0)), ProbeKind::mlp, 1),
                 InvalidArgument);
    // A class with a single member lands in the test split on most shuffles;
    // whenever it does twice in a row the probe must refuse.
    std::vector<std::int64_t> y(25, 0);
    y[3] = 1;
    int refused = 0;
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        try {
            train_probe(rng.normal_matrix(25, 2), ConceptLabels::categorical(y), ProbeKind::linear, seed);
        } catch (const InvalidArgument&) {
            ++refused;
        }
    }
    EXPECT_GT(refused, 0);
}

TEST(DemographicParity, HandEnumeration)
{
    EXPECT_DOUBLE_EQ(demographic_parity({0, 0, 1, 1}, {0, 0, 1, 1}), 2.0);
    EXPECT_DOUBLE_EQ(demographic_parity({0, 0, 1, 1}, {0, 1, 0, 1}), 0.0);
    EXPECT_DOUBLE_EQ(demographic_parity({1, 0, 1, 0, 1, 0}, {0, 0, 0, 1, 1, 1}), std::abs(1.0 / 3 - 2.0 / 3) * 2);
}

TEST(DemographicParity, SymmetryAndRelabeling)
{
    Rng rng(11);
    std::vector<std::int64_t> pred(200), attr(200), flipped(200), relabeled(200);
    for (std::size_t i = 0; i < 200; ++i) {
        pred[i] = static_cast<std::int64_t>(rng.index(3));
        attr[i] = static_cast<std::int64_t>(rng.index(2));
        flipped[i] = 1 - attr[i];
        relabeled[i] = (pred[i] + 1) % 3 + 10;
    }
    const double dp = demographic_parity(pred, attr);
    EXPECT_DOUBLE_EQ(demographic_parity(pred, flipped), dp);
    EXPECT_DOUBLE_EQ(demographic_parity(relabeled, attr), dp);
    EXPECT_GE(dp, 0.0);
}

TEST(DemographicParity, Errors)
{
    EXPECT_THROW(demographic_parity({0, 1}, {1, 1}), InvalidArgument);
    EXPECT_THROW(demographic_parity({0, 1}, {0, 2}), InvalidArgument);
    EXPECT_THROW(demographic_parity({0, 1, 1}, {0, 1}), InvalidArgument);
}

TEST(Gdp, ConstantPredictionsGiveZero)
{
    EXPECT_NEAR(gdp({0.3, 0.3, 0.3}, {0.1, 0.5, 0.9}, 0.1), 0.0, 1e-15);
}

TEST(Gdp, IdentityPredictionsMatchIntegral)
{
    Rng rng(12);
    std::vector<double> a(4000);
    for (auto& v : a) v = rng.uniform();
    // integral over [0, 1] of |a - 1/2| = 1/4
    EXPECT_NEAR(gdp(a, a, 0.01), 0.25, 0.02);
}

TEST(Gdp, IndependentPredictionsVanish)
{
    Rng rng(13);
    std::vector<double> a(5000), p(5000);
    for (auto& v : a) v = rng.uniform();
    for (auto& v : p) v = rng.uniform();
    EXPECT_LE(gdp(p, a, 0.1), 0.05);
}

TEST(Gdp, Properties)
{
    Rng rng(14);
    std::vector<double> a(300), p(300), shifted(300);
    for (std::size_t i = 0; i < 300; ++i) {
        a[i] = rng.uniform();
        p[i] = a[i] * a[i] + 0.1 * rng.normal();
        shifted[i] = p[i] + 3.5;
    }
    const double g = gdp(p, a, 0.1);
    EXPECT_GE(g, 0.0);
    EXPECT_NEAR(gdp(shifted, a, 0.1), g, 1e-12);
    EXPECT_NEAR(gdp(p, std::vector<double>(300, 0.4), 0.1), 0.0, 1e-12);
    EXPECT_THROW(gdp(p, a, 0.0), InvalidArgument);
    EXPECT_THROW(gdp(p, std::vector<double>(3, 0.0), 0.1), InvalidArgument);
}

TEST(Gdp, PerDimensionIsColumnwise)
{
    Rng rng(15);
    std::vector<double> p(200);
    for (auto& v : p) v = rng.uniform();
    const Eigen::MatrixXd attr = rng.uniform_matrix(200, 3, 0.0, 1.0);
    const auto per = gdp_per_dimension(p, attr, 0.1);
    ASSERT_EQ(per.size(), 3u);
    for (Index j = 0; j < 3; ++j) {
        const Eigen::VectorXd col = attr.col(j);
        EXPECT_EQ(per[static_cast<std::size_t>(j)], gdp(p, std::vector<double>(col.data(), col.data() + 200), 0.1));
    }
}
