#include <gtest/gtest.h>

#include <Eigen/Cholesky>

#include <cmath>

#include "sbinfer/debias.hpp"
#include "sbinfer/selftest.hpp"

using namespace sbinfer;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

LogRow row(std::size_t t, Vector x, std::vector<double> pv, std::size_t a, double y) {
    LogRow r;
    r.t = t;
    r.x = std::move(x);
    r.pv = std::move(pv);
    r.a = a;
    r.y = y;
    return r;
}

TrajectoryLog random_log(std::size_t K, std::size_t d, std::size_t T, std::uint64_t seed) {
    Rng rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_int_distribution<std::size_t> arm(0, K - 1);
    TrajectoryLog log(K, d);
    for (std::size_t t = 1; t <= T; ++t) {
        log.append(row(t, Vector::NullaryExpr(static_cast<Eigen::Index>(d), [&] { return u(rng); }),
                       std::vector<double>(K, 1.0 / double(K)), arm(rng), u(rng)));
    }
    return log;
}

DecorrMatrix identity_decorr(std::size_t d, DecorrTarget target) {
    DecorrMatrix M;
    M.rows = Matrix::Identity(d, d);
    M.target = target;
    M.rows_solved = d;
    return M;
}

double objective(const Matrix& A, const Vector& m, std::size_t l, double mu) {
    return 0.5 * m.dot(A * m) - m(static_cast<Eigen::Index>(l)) + mu * m.lpNorm<1>();
}

}  // namespace

TEST(Covariances, AlternatingArmsExample) {
    TrajectoryLog log(2, 2);
    for (std::size_t t = 1; t <= 4; ++t) log.append(row(t, vec({1, 0}), {0.5, 0.5}, (t - 1) % 2, 0.0));
    const auto c = accumulate_covariances(log);
    Matrix pooled(2, 2), half(2, 2);
    pooled << 1, 0, 0, 0;
    half << 0.5, 0, 0, 0;
    EXPECT_EQ(c.pooled, pooled);
    EXPECT_EQ(c.per_arm_plain[0], half);
    EXPECT_EQ(c.per_arm_plain[1], half);
}

TEST(Covariances, SingleStep) {
    TrajectoryLog log(2, 3);
    const Vector x = vec({1, -2, 0.5});
    log.append(row(1, x, {0.3, 0.7}, 1, 0.0));
    EXPECT_EQ(accumulate_covariances(log).pooled, x * x.transpose());
}

TEST(Covariances, PartitionIdentityAndSymmetry) {
    const auto log = random_log(3, 6, 200, 1);
    const auto c = accumulate_covariances(log);
    Matrix sum = Matrix::Zero(6, 6);
    for (const auto& m : c.per_arm_plain) {
        sum += m;
        EXPECT_TRUE(m.isApprox(m.transpose(), 0.0));
        Eigen::SelfAdjointEigenSolver<Matrix> es(m);
        EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10);
    }
    EXPECT_LE((c.pooled - sum).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(MuSchedule, Examples) {
    EXPECT_NEAR(mu_schedule(MuKind::pooled, 300, 600, 3, 1.0, 0.5), 0.0730, 5e-5);
    EXPECT_NEAR(mu_schedule(MuKind::arm, 300, 600, 3, 1.0, 0.5), 0.5 * std::sqrt(3 * std::log(600.0) / 300), 1e-15);
    EXPECT_NEAR(mu_schedule(MuKind::arm, 300, 600, 3, 0.5, 1.0), std::pow(3 * std::log(600.0) / 300, 0.25), 1e-15);
}

TEST(MuSchedule, ScalarCases) {
    // d is an integer, so d = e^4 and d = e are bracketed by their neighbours.
    EXPECT_NEAR(mu_schedule(MuKind::pooled, 4, 55, 2, 1.0, 1.0), 1.0, 0.002);
    EXPECT_GT(mu_schedule(MuKind::pooled, 4, 55, 2, 1.0, 1.0), 1.0);
    EXPECT_LT(mu_schedule(MuKind::pooled, 4, 54, 2, 1.0, 1.0), 1.0);
    EXPECT_GT(mu_schedule(MuKind::arm, 1, 3, 1, 1.0, 1.0), 1.0);
    EXPECT_LT(mu_schedule(MuKind::arm, 1, 2, 1, 1.0, 1.0), 1.0);
    EXPECT_NEAR(mu_schedule(MuKind::arm, 1, 3, 1, 1.0, 1.0), std::sqrt(std::log(3.0)), 1e-15);
}

TEST(SolveRow, Examples) {
    for (const auto& c : selftest::decorr_examples()) EXPECT_TRUE(c.pass) << c.name << ' ' << c.detail;
    const auto sol = solve_decorrelation_row(Matrix::Identity(5, 5), 0, 0.1);
    EXPECT_TRUE(sol.converged);
    EXPECT_NEAR(sol.m(0), 0.9, 1e-15);
    EXPECT_EQ((sol.m.array() != 0.0).count(), 1);
}

TEST(SolveRow, IdentityIsSoftThresholdedBasisVector) {
    for (double mu : {0.0, 0.05, 0.3, 0.99, 1.0, 2.5}) {
        for (std::size_t l = 0; l < 4; ++l) {
            const auto sol = solve_decorrelation_row(Matrix::Identity(4, 4), l, mu);
            Vector want = Vector::Zero(4);
            want(static_cast<Eigen::Index>(l)) = std::max(0.0, 1.0 - mu);
            EXPECT_LE((sol.m - want).cwiseAbs().maxCoeff(), 1e-15) << "mu " << mu;
        }
    }
}

TEST(SolveRow, Errors) {
    EXPECT_THROW(solve_decorrelation_row(Matrix::Identity(3, 2), 0, 0.1), DimensionMismatch);
    EXPECT_THROW(solve_decorrelation_row(Matrix::Identity(3, 3), 3, 0.1), DimensionMismatch);
    EXPECT_THROW(solve_decorrelation_row(Matrix::Identity(3, 3), 0, -0.1), ConfigError);
}

TEST(SolveRow, ZeroDiagonalCoordinateIsSkipped) {
    Matrix A = Matrix::Identity(3, 3);
    A(2, 2) = 0.0;
    const auto sol = solve_decorrelation_row(A, 0, 0.2);
    EXPECT_EQ(sol.m(2), 0.0);
    EXPECT_NEAR(sol.m(0), 0.8, 1e-12);
    EXPECT_LE(sol.kkt_residual, 0.2 + 1e-8);
}

TEST(SolveRow, NonConvergenceIsFlagged) {
    // Singular A with mu below the feasibility threshold: the program is unbounded.
    Matrix A = Matrix::Zero(2, 2);
    A << 1, 1, 1, 1;
    DecorrOptions opt;
    opt.max_sweeps = 20;
    const auto sol = solve_decorrelation_row(A, 0, 0.1, opt);
    EXPECT_FALSE(sol.converged);
    EXPECT_EQ(sol.sweeps, 20u);
    EXPECT_GT(sol.kkt_residual, 0.1);
}

TEST(SolveRow, KktBoundOnRandomSpd) {
    Rng rng(2);
    for (int rep = 0; rep < 3; ++rep) {
        const Matrix A = selftest::random_spd(50, rng);
        for (double mu : {0.02, 0.1, 0.3}) {
            const DecorrOptions opt;
            const DecorrMatrix M = build_decorr(A, DecorrTarget::pooled(), mu, opt);
            EXPECT_TRUE(M.all_converged());
            for (std::size_t l = 0; l < 50; ++l) {
                EXPECT_LE(M.kkt_residuals[l], mu + opt.tol);
                Vector r = A * M.row(l);
                r(static_cast<Eigen::Index>(l)) -= 1.0;
                EXPECT_NEAR(r.lpNorm<Eigen::Infinity>(), M.kkt_residuals[l], 1e-12);
            }
        }
    }
}

TEST(SolveRow, SubgradientConditionsHold) {
    Rng rng(3);
    const Matrix A = selftest::random_spd(15, rng);
    const double mu = 0.08, tol = 1e-8;
    for (std::size_t l = 0; l < 15; ++l) {
        const auto sol = solve_decorrelation_row(A, l, mu);
        ASSERT_TRUE(sol.converged);
        const Vector g = A * sol.m - Vector::Unit(15, static_cast<Eigen::Index>(l));
        for (Eigen::Index j = 0; j < 15; ++j) {
            if (sol.m(j) == 0.0) {
                EXPECT_LE(std::abs(g(j)), mu + tol);
            } else {
                EXPECT_NEAR(g(j), -mu * (sol.m(j) > 0 ? 1.0 : -1.0), tol);
            }
        }
    }
}

TEST(SolveRow, ObjectiveNeverIncreases) {
    Rng rng(4);
    for (int rep = 0; rep < 5; ++rep) {
        const Matrix A = selftest::random_spd(30, rng);
        DecorrOptions opt;
        opt.record_objective = true;
        opt.tol = 1e-12;
        for (std::size_t l : {0u, 7u, 29u}) {
            const auto sol = solve_decorrelation_row(A, l, 0.05, opt);
            ASSERT_GE(sol.objective.size(), 2u);
            for (std::size_t k = 1; k < sol.objective.size(); ++k) {
                EXPECT_LE(sol.objective[k], sol.objective[k - 1] + 1e-12 * (1.0 + std::abs(sol.objective[k - 1])));
            }
            EXPECT_NEAR(sol.objective.back(), objective(A, sol.m, l, 0.05), 1e-9);
        }
    }
}

TEST(SolveRow, MinimizerBeatsPerturbations) {
    Rng rng(5);
    std::normal_distribution<double> z(0.0, 1e-3);
    const Matrix A = selftest::random_spd(10, rng);
    DecorrOptions opt;
    opt.tol = 1e-12;
    const auto sol = solve_decorrelation_row(A, 3, 0.1, opt);
    const double best = objective(A, sol.m, 3, 0.1);
    for (int k = 0; k < 200; ++k) {
        const Vector p = sol.m + Vector::NullaryExpr(10, [&] { return z(rng); });
        EXPECT_GE(objective(A, p, 3, 0.1), best - 1e-12);
    }
}

TEST(BuildDecorr, IdentityTarget) {
    const DecorrMatrix M = build_decorr(Matrix::Identity(6, 6), DecorrTarget::pooled(), 0.1);
    EXPECT_LE((M.rows - 0.9 * Matrix::Identity(6, 6)).cwiseAbs().maxCoeff(), 1e-15);
    for (double r : M.kkt_residuals) EXPECT_NEAR(r, 0.1, 1e-15);
}

TEST(BuildDecorr, DenseInverseOracle) {
    for (const auto& c : selftest::decorr_oracle(50, 7)) EXPECT_TRUE(c.pass) << c.name << ' ' << c.detail;
}

TEST(BuildDecorr, RowLimitAndArmTarget) {
    const auto log = random_log(2, 8, 400, 6);
    const auto covs = accumulate_covariances(log);
    const DecorrMatrix M = build_decorr(covs, DecorrTarget::for_arm(1), 0.05, {}, 3);
    EXPECT_EQ(M.rows_solved, 3u);
    EXPECT_EQ(M.kkt_residuals.size(), 3u);
    EXPECT_TRUE(M.rows.bottomRows(5).isZero(0.0));
    const auto full = build_decorr(covs.per_arm_plain[1], DecorrTarget::for_arm(1), 0.05);
    EXPECT_EQ(M.rows.topRows(3), full.rows.topRows(3));
    EXPECT_THROW(build_decorr(covs, DecorrTarget::for_arm(2), 0.05), ConfigError);
}

TEST(Debias, IpwSingleStepExample) {
    TrajectoryLog log(2, 3);
    const Vector x = vec({0.5, -1, 2});
    log.append(row(1, x, {0.5, 0.5}, 1, 0.7));
    const auto est = ipw_debias(Vector::Zero(3), log, identity_decorr(3, DecorrTarget::pooled()), 1);
    EXPECT_LE((est.point - 2.0 * 0.7 * x).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Debias, AwSingleStepExample) {
    TrajectoryLog log(2, 3);
    const Vector x = vec({0.5, -1, 2});
    log.append(row(1, x, {0.5, 0.5}, 1, 0.7));
    const auto est = aw_debias(Vector::Zero(3), log, identity_decorr(3, DecorrTarget::for_arm(1)), 1);
    EXPECT_LE((est.point - 0.7 * x).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Debias, ZeroResidualsLeaveEstimateUnchanged) {
    Rng rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const Vector beta = vec({0.8, 0, -0.3, 0});
    TrajectoryLog log(2, 4);
    for (std::size_t t = 1; t <= 50; ++t) {
        const Vector x = Vector::NullaryExpr(4, [&] { return u(rng); });
        log.append(row(t, x, {0.4, 0.6}, t % 2, x.dot(beta)));
    }
    const auto covs = accumulate_covariances(log);
    const auto Mp = build_decorr(covs, DecorrTarget::pooled(), 0.1);
    for (std::size_t i = 0; i < 2; ++i) {
        const auto Ma = build_decorr(covs, DecorrTarget::for_arm(i), 0.1);
        EXPECT_EQ(ipw_debias(beta, log, Mp, i).point, beta);
        EXPECT_EQ(aw_debias(beta, log, Ma, i).point, beta);
    }
}

TEST(Debias, UnsampledArmIsUnchanged) {
    TrajectoryLog log(3, 2);
    log.append(row(1, vec({1, 1}), {0.5, 0.5, 0.0}, 0, 3.0));
    const Vector b = vec({0.1, 0.2});
    EXPECT_EQ(aw_debias(b, log, identity_decorr(2, DecorrTarget::for_arm(2)), 2).point, b);
}

TEST(Debias, TargetMismatchRejected) {
    TrajectoryLog log(2, 2);
    log.append(row(1, vec({1, 1}), {0.5, 0.5}, 0, 1.0));
    EXPECT_THROW(ipw_debias(vec({0, 0}), log, identity_decorr(2, DecorrTarget::for_arm(0)), 0), ConfigError);
    EXPECT_THROW(aw_debias(vec({0, 0}), log, identity_decorr(2, DecorrTarget::for_arm(1)), 0), ConfigError);
    EXPECT_THROW(aw_debias(vec({0, 0, 0}), log, identity_decorr(2, DecorrTarget::for_arm(0)), 0), DimensionMismatch);
}

TEST(Debias, MatchesDirectFormula) {
    const auto log = random_log(2, 5, 60, 8);
    const auto covs = accumulate_covariances(log);
    const Vector beta = vec({0.2, -0.1, 0, 0.4, 0});
    const auto M = build_decorr(covs, DecorrTarget::pooled(), 0.05);
    for (std::size_t i = 0; i < 2; ++i) {
        Vector want = beta;
        for (const auto& r : log.rows()) {
            if (r.a == i) want += M.rows * r.x * (r.y - r.x.dot(beta)) / r.pv[i] / 60.0;
        }
        EXPECT_LE((ipw_debias(beta, log, M, i).point - want).cwiseAbs().maxCoeff(), 1e-12);
    }
}
