#include <gtest/gtest.h>

#include "sbinfer/policy.hpp"

using namespace sbinfer;

namespace {

ExplorationSchedule eg(double c, double g) {
    ExplorationSchedule s;
    s.c_eps = c;
    s.gamma = g;
    return s;
}

ArmParams arms2(double b0, double b1) {
    Vector v0(1), v1(1);
    v0 << b0;
    v1 << b1;
    return ArmParams({v0, v1});
}

Vector one(double v) {
    Vector x(1);
    x << v;
    return x;
}

}  // namespace

TEST(EpsilonAt, Examples) {
    EXPECT_DOUBLE_EQ(epsilon_at(eg(1.0, 0.5), 4), 0.5);
    EXPECT_EQ(epsilon_at(eg(5.0, 1.0 / 3.0), 1), 1.0);
    ExplorationSchedule ef;
    ef.mode = ExplorationMode::exploration_free;
    for (std::size_t t : {1u, 2u, 100u}) EXPECT_EQ(epsilon_at(ef, t), 0.0);
}

TEST(EpsilonAt, RangeAndMonotone) {
    for (double c : {0.2, 1.0, 5.0}) {
        for (double g : {0.0, 1.0 / 3.0, 0.5, 0.9}) {
            double prev = 2.0;
            for (std::size_t t = 1; t <= 1000; ++t) {
                const double e = epsilon_at(eg(c, g), t);
                EXPECT_GE(e, 0.0);
                EXPECT_LE(e, 1.0);
                EXPECT_LE(e, prev);
                prev = e;
            }
        }
    }
}

TEST(EpsilonAt, ForcedWarmup) {
    ExplorationSchedule s;
    s.mode = ExplorationMode::forced_roundrobin_then_greedy;
    s.warmup_steps = 4;
    EXPECT_EQ(epsilon_at(s, 4), 1.0);
    EXPECT_EQ(epsilon_at(s, 5), 0.0);
    EXPECT_EQ(forced_arm(s, 1, 2), 0u);
    EXPECT_EQ(forced_arm(s, 2, 2), 1u);
    EXPECT_EQ(forced_arm(s, 3, 2), 0u);
    EXPECT_FALSE(forced_arm(s, 5, 2).has_value());
    EXPECT_EQ(default_warmup(2, 3, 600), 2u * 39u);
    EXPECT_EQ(default_warmup(2, 1, 5), 40u);
}

TEST(EpsilonAt, Errors) {
    EXPECT_THROW(epsilon_at(eg(1.0, 0.0), 0), ConfigError);
    EXPECT_THROW(eg(0.0, 0.5).validate(), ConfigError);
    EXPECT_THROW(eg(1.0, 1.0).validate(), ConfigError);
}

TEST(Propensities, Examples) {
    // <b1 - b0, x> > 0
    auto pv = propensities(arms2(0.0, 1.0), one(1.0), 0.2);
    EXPECT_DOUBLE_EQ(pv[0], 0.1);
    EXPECT_DOUBLE_EQ(pv[1], 0.9);

    pv = propensities(arms2(1.0, 0.0), one(1.0), 0.0);
    EXPECT_EQ(pv.probs, (std::vector<double>{1.0, 0.0}));

    Vector b0(1), b1(1), b2(1);
    b0 << 0.1;
    b1 << 0.2;
    b2 << 0.9;
    pv = propensities(ArmParams({b0, b1, b2}), one(1.0), 0.3);
    EXPECT_EQ(pv.greedy, 2u);
    EXPECT_NEAR(pv[0], 0.1, 1e-15);
    EXPECT_NEAR(pv[1], 0.1, 1e-15);
    EXPECT_NEAR(pv[2], 0.8, 1e-15);
}

TEST(Propensities, TieGoesToArmZero) {
    const auto pv = propensities(ArmParams::zeros(2, 3), Vector::Ones(3), 0.0);
    EXPECT_EQ(pv.greedy, 0u);
    EXPECT_EQ(pv[0], 1.0);
}

TEST(Propensities, RejectsBadEps) {
    EXPECT_THROW(propensities(arms2(0, 1), one(1), 1.5), ConfigError);
    EXPECT_THROW(propensities(arms2(0, 1), one(1), -0.1), ConfigError);
}

TEST(Propensities, FloorSumAndGreedyDominance) {
    Rng rng(1);
    std::normal_distribution<double> z(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 500; ++rep) {
        const std::size_t K = 2 + static_cast<std::size_t>(rep % 4);
        std::vector<Vector> b;
        for (std::size_t i = 0; i < K; ++i) b.push_back(Vector::NullaryExpr(5, [&] { return z(rng); }));
        const Vector x = Vector::NullaryExpr(5, [&] { return z(rng); });
        const double eps = u(rng);
        const auto pv = propensities(ArmParams(b), x, eps);
        double sum = 0.0;
        for (std::size_t i = 0; i < K; ++i) {
            EXPECT_GE(pv[i], eps / K - 1e-15);
            EXPECT_LE(pv[i], pv[pv.greedy]);
            sum += pv[i];
        }
        EXPECT_NEAR(sum, 1.0, 1e-12);
    }
}

TEST(Propensities, ScaleInvariance) {
    Rng rng(2);
    std::normal_distribution<double> z(0.0, 1.0);
    for (int rep = 0; rep < 200; ++rep) {
        std::vector<Vector> b, scaled;
        for (std::size_t i = 0; i < 3; ++i) b.push_back(Vector::NullaryExpr(4, [&] { return z(rng); }));
        const double c = std::exp(z(rng));
        for (const auto& v : b) scaled.push_back(c * v);
        const Vector x = Vector::NullaryExpr(4, [&] { return z(rng); });
        EXPECT_EQ(propensities(ArmParams(b), x, 0.3).probs, propensities(ArmParams(scaled), x, 0.3).probs);
    }
}

TEST(Propensities, MatchesTwoArmFormulaLiterally) {
    Rng rng(3);
    std::normal_distribution<double> z(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 1000; ++rep) {
        const Vector b0 = Vector::NullaryExpr(6, [&] { return z(rng); });
        const Vector b1 = Vector::NullaryExpr(6, [&] { return z(rng); });
        const Vector x = Vector::NullaryExpr(6, [&] { return z(rng); });
        const double eps = u(rng);
        const double pi = (1.0 - eps) * ((b1 - b0).dot(x) > 0.0 ? 1.0 : 0.0) + eps / 2.0;
        const auto pv = propensities(ArmParams({b0, b1}), x, eps);
        EXPECT_NEAR(pv[1], pi, 1e-15);
        EXPECT_NEAR(pv[0], 1.0 - pi, 1e-15);
    }
}

TEST(SampleAction, Degenerate) {
    Rng rng(4);
    PropensityVector a{{1.0, 0.0}, 0}, b{{0.0, 1.0}, 1};
    for (int i = 0; i < 1000; ++i) {
        EXPECT_EQ(sample_action(a, rng), 0u);
        EXPECT_EQ(sample_action(b, rng), 1u);
    }
}

TEST(SampleAction, Frequency) {
    Rng rng(5);
    PropensityVector pv{{0.1, 0.9}, 1};
    const int n = 100000;
    int ones = 0;
    for (int i = 0; i < n; ++i) ones += sample_action(pv, rng) == 1;
    EXPECT_NEAR(static_cast<double>(ones) / n, 0.9, 0.005);
}

TEST(SampleAction, ThreeArmFrequencies) {
    Rng rng(6);
    PropensityVector pv{{0.2, 0.3, 0.5}, 2};
    const int n = 100000;
    std::array<int, 3> c{};
    for (int i = 0; i < n; ++i) ++c[sample_action(pv, rng)];
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(static_cast<double>(c[i]) / n, pv[i], 0.006);
}
