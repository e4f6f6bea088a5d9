#pragma once

// De-correlation matrices from l1-penalized quadratic programs
//
//     min_m  1/2 m^T A m - m_l + mu ||m||_1
//
// solved row by row with cyclic coordinate descent, and the inverse-propensity
// weighted (IPW) and average-weighted (AW) debiased estimators built on them.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "sbinfer/env.hpp"
#include "sbinfer/learner.hpp"
#include "sbinfer/trajectory.hpp"

namespace sbinfer {

enum class Method { ipw, aw };

inline const char* to_string(Method m) { return m == Method::ipw ? "ipw" : "aw"; }

struct CovarianceSet {
    Matrix pooled;                       // (1/T) sum x x^T
    std::vector<Matrix> per_arm_plain;   // (1/T) sum 1(a=i) x x^T
    std::vector<Matrix> per_arm_ipw;     // learner's IPW-weighted sigma_hat, when supplied
    std::size_t T = 0;
};

/// Single pass over the log. `pooled` is formed as the sum of the per-arm matrices.
inline CovarianceSet accumulate_covariances(const TrajectoryLog& log) {
    if (log.empty()) throw ConfigError("accumulate_covariances: empty log");
    const auto d = static_cast<Eigen::Index>(log.dim());
    CovarianceSet c;
    c.T = log.size();
    c.per_arm_plain.assign(log.arms(), Matrix::Zero(d, d));
    for (const auto& r : log.rows()) c.per_arm_plain[r.a].noalias() += r.x * r.x.transpose();
    const double invT = 1.0 / static_cast<double>(c.T);
    c.pooled = Matrix::Zero(d, d);
    for (auto& m : c.per_arm_plain) {
        m *= invT;
        c.pooled += m;
    }
    return c;
}

inline CovarianceSet accumulate_covariances(const TrajectoryLog& log, const LearnerState& learner) {
    CovarianceSet c = accumulate_covariances(log);
    for (std::size_t i = 0; i < learner.arms(); ++i) c.per_arm_ipw.push_back(learner.sigma_hat(i));
    return c;
}

enum class MuKind { pooled, arm };

/// pooled: C sqrt(log d / T);  arm: C (s0 log d / T)^(nu/2).
inline double mu_schedule(MuKind kind, std::size_t T, std::size_t d, std::size_t s0, double nu, double C_mu) {
    if (T < 1) throw ConfigError("mu_schedule: T must be >= 1");
    if (d < 2) throw ConfigError("mu_schedule: d must be >= 2");
    const double ratio = std::log(static_cast<double>(d)) / static_cast<double>(T);
    if (kind == MuKind::pooled) return C_mu * std::sqrt(ratio);
    return C_mu * std::pow(static_cast<double>(s0) * ratio, nu / 2.0);
}

struct DecorrOptions {
    double tol = 1e-8;
    std::size_t max_sweeps = 200;
    bool record_objective = false;
};

struct RowSolution {
    Vector m;
    double kkt_residual = 0.0;  // ||A m - e_l||_max
    std::size_t sweeps = 0;
    bool converged = false;
    std::vector<double> objective;  // after warm start, then after each sweep (if recorded)
};

namespace detail {

inline constexpr double kTinyDiagonal = 1e-12;
inline constexpr std::size_t kFaceStepEvery = 10;

inline double soft_threshold(double z, double mu) {
    if (z > mu) return z - mu;
    if (z < -mu) return z + mu;
    return 0.0;
}

/// Max violation of the subgradient conditions at m with gradient Am - e_l.
inline double subgradient_violation(const Vector& m, const Vector& Am, Eigen::Index l, double mu) {
    double worst = 0.0;
    for (Eigen::Index j = 0; j < m.size(); ++j) {
        const double g = Am(j) - (j == l ? 1.0 : 0.0);
        const double v = m(j) == 0.0 ? std::max(0.0, std::abs(g) - mu)
                                     : std::abs(g + (m(j) > 0.0 ? mu : -mu));
        worst = std::max(worst, v);
    }
    return worst;
}

}  // namespace detail

/// Cyclic coordinate descent with exact scalar minimization, warm-started at
/// e_l / A_ll. Full sweeps alternate with sweeps restricted to the current
/// nonzero set. Stops once a full sweep moves no coordinate by more than `tol`
/// and the subgradient conditions hold to `tol`; otherwise after `max_sweeps`
/// full sweeps.
inline RowSolution solve_decorrelation_row(const Matrix& A, std::size_t l, double mu, const DecorrOptions& opt = {}) {
    const Eigen::Index d = A.rows();
    if (A.cols() != d) throw DimensionMismatch("decorrelation: matrix must be square");
    if (static_cast<Eigen::Index>(l) >= d) throw DimensionMismatch("decorrelation: row index out of range");
    if (!(mu >= 0.0)) throw ConfigError("decorrelation: mu must be >= 0");
    const auto li = static_cast<Eigen::Index>(l);

    RowSolution sol;
    sol.m = Vector::Zero(d);
    Vector Am = Vector::Zero(d);  // exact on the active set; exact everywhere after a full sweep
    if (A(li, li) > detail::kTinyDiagonal) {
        sol.m(li) = 1.0 / A(li, li);
        Am = A.col(li) * sol.m(li);
    }
    auto objective = [&] {
        double quad = 0.0;
        for (Eigen::Index j = 0; j < d; ++j) {
            if (sol.m(j) != 0.0) quad += sol.m(j) * Am(j);
        }
        return 0.5 * quad - sol.m(li) + mu * sol.m.lpNorm<1>();
    };
    if (opt.record_objective) sol.objective.push_back(objective());

    // Exact minimization over coordinate j; returns |change|.
    auto update = [&](Eigen::Index j, const std::vector<Eigen::Index>* active) -> double {
        const double ajj = A(j, j);
        if (ajj <= detail::kTinyDiagonal) return 0.0;
        const double target = j == li ? 1.0 : 0.0;
        const double partial = Am(j) - ajj * sol.m(j);
        const double next = detail::soft_threshold(target - partial, mu) / ajj;
        const double delta = next - sol.m(j);
        if (delta == 0.0) return 0.0;
        if (active) {
            for (auto k : *active) Am(k) += A(k, j) * delta;
        } else {
            Am.noalias() += A.col(j) * delta;
        }
        sol.m(j) = next;
        return std::abs(delta);
    };

    // Moves the active entries toward the minimizer of the quadratic restricted
    // to their current sign pattern, stopping where the first entry hits zero.
    // Accepted only if the objective does not increase.
    auto face_step = [&](const std::vector<Eigen::Index>& act) -> bool {
        std::vector<Eigen::Index> nz;
        for (auto j : act) {
            if (sol.m(j) != 0.0) nz.push_back(j);
        }
        const auto n = static_cast<Eigen::Index>(nz.size());
        if (n == 0) return false;
        Matrix Ass(n, n);
        Vector rhs(n), cur(n);
        for (Eigen::Index a = 0; a < n; ++a) {
            const auto j = nz[static_cast<std::size_t>(a)];
            for (Eigen::Index b = 0; b < n; ++b) Ass(a, b) = A(j, nz[static_cast<std::size_t>(b)]);
            cur(a) = sol.m(j);
            rhs(a) = (j == li ? 1.0 : 0.0) - (cur(a) > 0.0 ? mu : -mu);
        }
        Eigen::LDLT<Matrix> ldlt(Ass);
        if (ldlt.info() != Eigen::Success) return false;
        const Vector goal = ldlt.solve(rhs);
        if (!goal.allFinite() ||
            (Ass * goal - rhs).lpNorm<Eigen::Infinity>() > 1e-9 * (1.0 + rhs.lpNorm<Eigen::Infinity>())) {
            return false;
        }
        const Vector dir = goal - cur;
        double alpha = 1.0;
        Eigen::Index hit = -1;
        for (Eigen::Index a = 0; a < n; ++a) {
            if ((cur(a) > 0.0) != (goal(a) > 0.0) || goal(a) == 0.0) {
                const double step = -cur(a) / dir(a);
                if (step < alpha) {
                    alpha = step;
                    hit = a;
                }
            }
        }
        Vector next = cur + alpha * dir;
        if (hit >= 0) next(hit) = 0.0;
        auto face_obj = [&](const Vector& v) { return 0.5 * v.dot(Ass * v) - rhs.dot(v); };
        if (!(face_obj(next) <= face_obj(cur))) return false;
        for (Eigen::Index a = 0; a < n; ++a) sol.m(nz[static_cast<std::size_t>(a)]) = next(a);
        for (auto k : act) {
            double v = 0.0;
            for (Eigen::Index a = 0; a < n; ++a) v += A(k, nz[static_cast<std::size_t>(a)]) * next(a);
            Am(k) = v;
        }
        return true;
    };

    // Restricted sweeps share one budget per row, so an unbounded problem
    // (mu below the feasibility threshold of a singular A) fails fast.
    std::size_t inner_budget = 10 * std::max<std::size_t>(opt.max_sweeps, 1);
    std::vector<Eigen::Index> active;
    for (sol.sweeps = 0; sol.sweeps < opt.max_sweeps;) {
        double max_change = 0.0;
        for (Eigen::Index j = 0; j < d; ++j) max_change = std::max(max_change, update(j, nullptr));
        ++sol.sweeps;
        if (opt.record_objective) sol.objective.push_back(objective());
        if (max_change < opt.tol) {
            Am.noalias() = A * sol.m;
            if (detail::subgradient_violation(sol.m, Am, li, mu) <= opt.tol) {
                sol.converged = true;
                break;
            }
            continue;
        }
        active.clear();
        for (Eigen::Index j = 0; j < d; ++j) {
            if (sol.m(j) != 0.0) active.push_back(j);
        }
        for (std::size_t inner = 0; inner_budget > 0; ++inner, --inner_budget) {
            double inner_change = 0.0;
            for (auto j : active) inner_change = std::max(inner_change, update(j, &active));
            if (opt.record_objective) sol.objective.push_back(objective());
            if (inner_change < opt.tol) break;
            if (inner % detail::kFaceStepEvery == detail::kFaceStepEvery - 1 && face_step(active)) {
                if (opt.record_objective) sol.objective.push_back(objective());
            }
        }
        // Inactive entries of Am are stale after the restricted sweeps.
        Am.setZero();
        for (auto j : active) {
            if (sol.m(j) != 0.0) Am.noalias() += A.col(j) * sol.m(j);
        }
    }
    Am.noalias() = A * sol.m;
    Vector resid = Am;
    resid(li) -= 1.0;
    sol.kkt_residual = resid.lpNorm<Eigen::Infinity>();
    if (!sol.m.allFinite()) sol.converged = false;
    return sol;
}

struct DecorrTarget {
    MuKind kind = MuKind::pooled;
    std::size_t arm = 0;

    static DecorrTarget pooled() { return {MuKind::pooled, 0}; }
    static DecorrTarget for_arm(std::size_t i) { return {MuKind::arm, i}; }
};

/// Rows m_l of the de-correlation matrix. Only rows [0, rows_solved) are
/// populated when a row limit was requested; the rest are zero.
struct DecorrMatrix {
    Matrix rows;
    double mu = 0.0;
    std::vector<double> kkt_residuals;
    std::vector<bool> converged;
    DecorrTarget target;
    std::size_t rows_solved = 0;

    bool all_converged() const {
        return std::all_of(converged.begin(), converged.end(), [](bool b) { return b; });
    }
    /// max_l (kkt_residual_l - mu), clipped at 0.
    double max_kkt_excess() const {
        double e = 0.0;
        for (double r : kkt_residuals) e = std::max(e, r - mu);
        return e;
    }
    Vector row(std::size_t l) const { return rows.row(static_cast<Eigen::Index>(l)).transpose(); }
};

inline DecorrMatrix build_decorr(const Matrix& A, DecorrTarget target, double mu, const DecorrOptions& opt = {},
                                 std::size_t row_limit = 0) {
    const auto d = static_cast<std::size_t>(A.rows());
    const std::size_t n = row_limit == 0 ? d : std::min(d, row_limit);
    DecorrMatrix M;
    M.rows = Matrix::Zero(A.rows(), A.cols());
    M.mu = mu;
    M.target = target;
    M.rows_solved = n;
    M.kkt_residuals.resize(n);
    M.converged.resize(n);
    for (std::size_t l = 0; l < n; ++l) {
        const RowSolution sol = solve_decorrelation_row(A, l, mu, opt);
        M.rows.row(static_cast<Eigen::Index>(l)) = sol.m.transpose();
        M.kkt_residuals[l] = sol.kkt_residual;
        M.converged[l] = sol.converged;
    }
    return M;
}

inline DecorrMatrix build_decorr(const CovarianceSet& covs, DecorrTarget target, double mu,
                                 const DecorrOptions& opt = {}, std::size_t row_limit = 0) {
    if (target.kind == MuKind::pooled) return build_decorr(covs.pooled, target, mu, opt, row_limit);
    if (target.arm >= covs.per_arm_plain.size()) throw ConfigError("build_decorr: arm out of range");
    return build_decorr(covs.per_arm_plain[target.arm], target, mu, opt, row_limit);
}

struct DebiasedEstimate {
    std::size_t arm = 0;
    Vector point;
    Method method = Method::aw;
};

namespace detail {

/// beta_hat + (1/T) M sum_t w_t x_t (y_t - x_t^T beta_hat).
inline Vector debias_with_weights(const Vector& beta_hat, const TrajectoryLog& log, const DecorrMatrix& M,
                                  std::size_t arm, Method method) {
    if (static_cast<std::size_t>(beta_hat.size()) != log.dim() || M.rows.rows() != beta_hat.size()) {
        throw DimensionMismatch("debias: dimension mismatch");
    }
    if (arm >= log.arms()) throw ConfigError("debias: arm out of range");
    Vector score = Vector::Zero(beta_hat.size());
    bool any = false;
    for (const auto& r : log.rows()) {
        if (r.a != arm) continue;
        double w = 1.0;
        if (method == Method::ipw) {
            if (!(r.pv[arm] > 0.0)) throw InferenceError("debias: chosen arm logged with zero propensity");
            w = 1.0 / r.pv[arm];
        }
        score.noalias() += (w * (r.y - r.x.dot(beta_hat))) * r.x;
        any = true;
    }
    if (!any) return beta_hat;
    Vector point = beta_hat;
    point.noalias() += M.rows * score / static_cast<double>(log.size());
    return point;
}

}  // namespace detail

inline DebiasedEstimate ipw_debias(const Vector& beta_hat, const TrajectoryLog& log, const DecorrMatrix& M,
                                   std::size_t arm) {
    if (M.target.kind != MuKind::pooled) throw ConfigError("ipw_debias requires the pooled de-correlation matrix");
    return {arm, detail::debias_with_weights(beta_hat, log, M, arm, Method::ipw), Method::ipw};
}

inline DebiasedEstimate aw_debias(const Vector& beta_hat, const TrajectoryLog& log, const DecorrMatrix& M,
                                  std::size_t arm) {
    if (M.target.kind != MuKind::arm || M.target.arm != arm) {
        throw ConfigError("aw_debias requires the de-correlation matrix of the same arm");
    }
    return {arm, detail::debias_with_weights(beta_hat, log, M, arm, Method::aw), Method::aw};
}

}  // namespace sbinfer
