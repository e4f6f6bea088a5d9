#pragma once

// Property checks against independent oracles, shared by `sbinfer selftest`
// and the acceptance binary.

#include <Eigen/Cholesky>

#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "sbinfer/debias.hpp"
#include "sbinfer/inference.hpp"
#include "sbinfer/learner.hpp"

namespace sbinfer::selftest {

inline std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return buf;
}

struct Check {
    std::string name;
    bool pass = false;
    std::string detail;
};

/// Well-conditioned random SPD matrix B^T B / n + ridge I.
inline Matrix random_spd(std::size_t d, Rng& rng) {
    std::normal_distribution<double> z(0.0, 1.0);
    const auto n = static_cast<Eigen::Index>(2 * d + 5);
    Matrix B(n, static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < B.size(); ++i) B.data()[i] = z(rng);
    Matrix A = B.transpose() * B / static_cast<double>(n);
    A.diagonal().array() += 0.1;
    return A;
}

/// mu = 0 rows against the dense inverse; mu > 0 rows against the KKT bound.
inline std::vector<Check> decorr_oracle(std::size_t n_matrices = 50, std::uint64_t seed = 7) {
    Rng rng(seed);
    std::uniform_int_distribution<std::size_t> dim(2, 20);
    std::uniform_real_distribution<double> mu_draw(0.01, 0.3);
    double worst_fro = 0.0, worst_kkt = 0.0;
    std::size_t unconverged = 0;
    for (std::size_t k = 0; k < n_matrices; ++k) {
        const std::size_t d = dim(rng);
        const Matrix A = random_spd(d, rng);
        const Matrix inv = A.llt().solve(Matrix::Identity(A.rows(), A.cols()));
        DecorrOptions opt;
        opt.tol = 1e-12;
        opt.max_sweeps = 5000;
        const DecorrMatrix M0 = build_decorr(A, DecorrTarget::pooled(), 0.0, opt);
        worst_fro = std::max(worst_fro, (M0.rows - inv).norm());
        unconverged += M0.all_converged() ? 0 : 1;
        const double mu = mu_draw(rng);
        const DecorrMatrix M = build_decorr(A, DecorrTarget::pooled(), mu, DecorrOptions{});
        for (std::size_t l = 0; l < d; ++l) {
            Vector r = A * M.row(l);
            r(static_cast<Eigen::Index>(l)) -= 1.0;
            worst_kkt = std::max(worst_kkt, r.lpNorm<Eigen::Infinity>() - mu);
        }
        unconverged += M.all_converged() ? 0 : 1;
    }
    std::vector<Check> out;
    out.push_back({"decorr mu=0 equals dense inverse", worst_fro <= 1e-6,
                   "max Frobenius error " + sci(worst_fro)});
    out.push_back({"decorr mu>0 satisfies KKT bound", worst_kkt <= 1e-6,
                   "max ||Am-e_l||_max - mu = " + sci(worst_kkt)});
    out.push_back({"decorr rows converge", unconverged == 0, std::to_string(unconverged) + " unconverged solves"});
    return out;
}

/// Closed-form examples for the scalar and 2x2 cases.
inline std::vector<Check> decorr_examples() {
    std::vector<Check> out;
    {
        const auto sol = solve_decorrelation_row(Matrix::Identity(4, 4), 0, 0.1);
        Vector want = Vector::Zero(4);
        want(0) = 0.9;
        out.push_back({"identity, mu=0.1 gives 0.9 e_1", (sol.m - want).norm() < 1e-12, ""});
    }
    {
        Matrix A(2, 2);
        A << 1.0, 0.5, 0.5, 1.0;
        DecorrOptions opt;
        opt.tol = 1e-14;
        opt.max_sweeps = 10000;
        const auto sol = solve_decorrelation_row(A, 0, 0.0, opt);
        const double err = std::max(std::abs(sol.m(0) - 4.0 / 3.0), std::abs(sol.m(1) + 2.0 / 3.0));
        out.push_back({"2x2 inverse column", err < 1e-9, "error " + sci(err)});
    }
    {
        const auto sol = solve_decorrelation_row(Matrix::Identity(3, 3), 1, 1.0);
        out.push_back({"identity, mu>=1 gives 0", sol.m.isZero(0.0), ""});
    }
    return out;
}

/// Quantile and CDF agree with tabulated values and invert each other.
inline std::vector<Check> normal_checks() {
    double worst = 0.0;
    for (double p = 0.001; p < 1.0; p += 0.0137) worst = std::max(worst, std::abs(normal_cdf(normal_quantile(p)) - p));
    std::vector<Check> out;
    out.push_back({"normal quantile 0.975", std::abs(normal_quantile(0.975) - 1.959963984540054) < 1e-9, ""});
    out.push_back({"normal cdf/quantile round trip", worst < 1e-12, "max error " + sci(worst)});
    return out;
}

/// Streaming covariance sums match a batch recomputation.
inline Check streaming_vs_batch(std::uint64_t seed = 11) {
    Rng rng(seed);
    const std::size_t d = 8, K = 2, T = 60;
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_int_distribution<std::size_t> arm(0, K - 1);
    HTConfig cfg{4, 0.05, K, d};
    LearnerState st = LearnerState::init(K, d, Weighting::ipw);
    std::vector<Matrix> batch(K, Matrix::Zero(d, d));
    for (std::size_t t = 0; t < T; ++t) {
        Vector x(d);
        for (auto& v : x) v = u(rng);
        PropensityVector pv;
        pv.probs = {0.3, 0.7};
        const std::size_t a = arm(rng);
        step(st, x, pv, a, u(rng), cfg);
        batch[a] += x * x.transpose() / pv.probs[a];
    }
    double err = 0.0;
    for (std::size_t i = 0; i < K; ++i) err = std::max(err, (st.sigma_hat(i) - batch[i] / double(T)).cwiseAbs().maxCoeff());
    return {"streaming covariance equals batch", err < 1e-12, "max error " + sci(err)};
}

inline std::vector<Check> run_all() {
    std::vector<Check> all;
    for (auto& c : decorr_examples()) all.push_back(std::move(c));
    for (auto& c : decorr_oracle()) all.push_back(std::move(c));
    for (auto& c : normal_checks()) all.push_back(std::move(c));
    all.push_back(streaming_vs_batch());
    return all;
}

}  // namespace sbinfer::selftest
