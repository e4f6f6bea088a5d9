#pragma once

// Online hard-thresholding estimator: per-arm (optionally inverse-propensity
// weighted) covariance accumulation, averaged gradients and projected steps.

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "sbinfer/env.hpp"
#include "sbinfer/policy.hpp"
#include "sbinfer/trajectory.hpp"

namespace sbinfer {

enum class Weighting { ipw, plain };

struct HTConfig {
    std::size_t s = 9;
    double eta = 0.05;
    std::size_t K = 2;
    std::size_t d = 600;

    void validate() const {
        if (s < 1 || s > d) throw ConfigError("working sparsity s must satisfy 1 <= s <= d");
        if (!(eta > 0.0) || !std::isfinite(eta)) throw ConfigError("step size eta must be positive");
        if (K < 2) throw ConfigError("K must be at least 2");
    }
};

inline constexpr double kFallbackEta = 0.05;
inline constexpr std::size_t kEtaPilotContexts = 50;

/// Top eigenvalue of (1/n) sum x x^T over the given contexts, by power iteration.
inline double top_eigenvalue(std::span<const Vector> contexts, std::size_t iters = 200) {
    if (contexts.empty()) return 0.0;
    const Eigen::Index d = contexts.front().size();
    const double n = static_cast<double>(contexts.size());
    Vector v = Vector::Constant(d, 1.0 / std::sqrt(static_cast<double>(d)));
    double lambda = 0.0;
    for (std::size_t it = 0; it < iters; ++it) {
        Vector w = Vector::Zero(d);
        for (const auto& x : contexts) w.noalias() += x * (x.dot(v) / n);
        const double norm = w.norm();
        if (norm == 0.0) return 0.0;
        const double next = v.dot(w);
        v = w / norm;
        if (std::abs(next - lambda) <= 1e-10 * std::max(1.0, std::abs(next))) {
            lambda = next;
            break;
        }
        lambda = next;
    }
    return lambda;
}

/// eta = 0.4 / lambda_max over the first min(50, n) contexts, 0.05 if degenerate.
inline double default_eta(std::span<const Vector> contexts) {
    const auto n = std::min(contexts.size(), kEtaPilotContexts);
    const double lmax = top_eigenvalue(contexts.first(n));
    return lmax > 0.0 && std::isfinite(lmax) ? 0.4 / lmax : kFallbackEta;
}

inline std::size_t default_sparsity(std::size_t s0, std::size_t d) { return std::min(d, 3 * s0); }

/// Keeps the s largest-magnitude entries; ties in magnitude keep the lower index.
inline Vector hard_threshold(const Vector& v, std::size_t s) {
    const auto d = static_cast<std::size_t>(v.size());
    if (s >= d) return v;
    std::size_t nnz = 0;
    for (Eigen::Index j = 0; j < v.size(); ++j) nnz += v(j) != 0.0;
    if (nnz <= s) return v;
    std::vector<Eigen::Index> order(d);
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(s), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) {
                         const double fa = std::abs(v(a)), fb = std::abs(v(b));
                         return fa > fb || (fa == fb && a < b);
                     });
    Vector out = Vector::Zero(v.size());
    for (std::size_t k = 0; k < s; ++k) out(order[k]) = v(order[k]);
    return out;
}

/// Mutable state of the online estimator. Covariances are stored as
/// unnormalized sums; sigma_hat(i) divides by t.
struct LearnerState {
    std::size_t t = 0;
    Weighting weighting = Weighting::ipw;
    std::vector<Vector> beta_hat;
    std::vector<Matrix> cov_sum;        // sum_tau w_{i,tau} x x^T
    std::vector<Vector> xy_sum;         // sum_tau w_{i,tau} x y
    std::vector<double> resid_sq_sum;   // sum_tau w_{i,tau} (y - <beta_{i,tau-1}, x>)^2
    std::vector<std::size_t> count;     // |{tau : a_tau = i}|
    double reward_sum = 0.0;            // sum y
    double pred_sum = 0.0;              // sum <beta_{a,tau-1}, x>
    double pred_sq_sum = 0.0;           // sum <beta_{a,tau-1}, x>^2

    static LearnerState init(std::size_t K, std::size_t d, Weighting w) {
        const auto n = static_cast<Eigen::Index>(d);
        LearnerState st;
        st.weighting = w;
        st.beta_hat.assign(K, Vector::Zero(n));
        st.cov_sum.assign(K, Matrix::Zero(n, n));
        st.xy_sum.assign(K, Vector::Zero(n));
        st.resid_sq_sum.assign(K, 0.0);
        st.count.assign(K, 0);
        return st;
    }

    std::size_t arms() const noexcept { return beta_hat.size(); }
    std::size_t dim() const noexcept { return beta_hat.empty() ? 0 : static_cast<std::size_t>(beta_hat[0].size()); }

    Matrix sigma_hat(std::size_t i) const {
        return t == 0 ? Matrix(cov_sum[i]) : Matrix(cov_sum[i] / static_cast<double>(t));
    }
    ArmParams estimates() const { return ArmParams(beta_hat); }
};

namespace detail {

/// Observation weight 1(a = i) / pv[i] (ipw) or 1(a = i) (plain); zero-propensity guard yields 0.
inline double arm_weight(Weighting w, std::size_t i, std::size_t a, double p) {
    if (a != i) return 0.0;
    if (w == Weighting::plain) return 1.0;
    return p > 0.0 ? 1.0 / p : 0.0;
}

/// cov * beta for sparse beta.
inline Vector sparse_product(const Matrix& cov, const Vector& beta) {
    Vector out = Vector::Zero(cov.rows());
    for (Eigen::Index j = 0; j < beta.size(); ++j) {
        if (beta(j) != 0.0) out.noalias() += cov.col(j) * beta(j);
    }
    return out;
}

/// cov += w x x^T, computed as w (x_j x_k) so the sum stays exactly symmetric.
inline void add_weighted_outer(Matrix& cov, const Vector& x, double w) {
    const Eigen::Index d = x.size();
    for (Eigen::Index k = 0; k < d; ++k) {
        const double xk = x(k);
        for (Eigen::Index j = 0; j < d; ++j) cov(j, k) += w * (x(j) * xk);
    }
}

}  // namespace detail

inline void step(LearnerState& st, const Vector& x, const PropensityVector& pv, std::size_t a, double y,
                 const HTConfig& cfg) {
    const std::size_t K = st.arms();
    if (static_cast<std::size_t>(x.size()) != st.dim() || pv.arms() != K || cfg.K != K || cfg.d != st.dim()) {
        throw DimensionMismatch("learner step: dimension mismatch");
    }
    if (a >= K) throw ConfigError("learner step: action out of range");
    st.t += 1;
    const double t = static_cast<double>(st.t);
    for (std::size_t i = 0; i < K; ++i) {
        const double w = detail::arm_weight(st.weighting, i, a, pv[i]);
        const double pred = st.beta_hat[i].dot(x);  // uses beta_{i,t-1}
        if (i == a) {
            st.count[i] += 1;
            st.reward_sum += y;
            st.pred_sum += pred;
            st.pred_sq_sum += pred * pred;
        }
        if (w != 0.0) {
            const double r = y - pred;
            st.resid_sq_sum[i] += w * r * r;
            detail::add_weighted_outer(st.cov_sum[i], x, w);
            st.xy_sum[i].noalias() += (w * y) * x;
        }
        const Vector grad = (2.0 / t) * (detail::sparse_product(st.cov_sum[i], st.beta_hat[i]) - st.xy_sum[i]);
        Vector moved = st.beta_hat[i] - cfg.eta * grad;
        if (!moved.allFinite()) throw InferenceError("learner diverged; reduce the step size eta");
        st.beta_hat[i] = hard_threshold(moved, cfg.s);
    }
}

/// Runs the learner over every row of a log.
inline LearnerState replay_learner(const TrajectoryLog& log, const HTConfig& cfg, Weighting w) {
    LearnerState st = LearnerState::init(log.arms(), log.dim(), w);
    for (const auto& row : log.rows()) {
        PropensityVector pv;
        pv.probs = row.pv;
        step(st, row.x, pv, row.a, row.y, cfg);
    }
    return st;
}

inline std::vector<double> estimation_error(const LearnerState& st, const ArmParams& truth) {
    if (truth.arms() != st.arms() || truth.dim() != st.dim()) throw DimensionMismatch("truth shape mismatch");
    std::vector<double> err(st.arms());
    for (std::size_t i = 0; i < st.arms(); ++i) err[i] = (st.beta_hat[i] - truth[i]).norm();
    return err;
}

// ---------------------------------------------------------------------------
// Snapshot (versioned JSON)

inline constexpr int kSnapshotVersion = 1;

namespace detail {

inline nlohmann::json vec_to_json(const Vector& v) {
    return nlohmann::json(std::vector<double>(v.data(), v.data() + v.size()));
}

inline Vector vec_from_json(const nlohmann::json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace detail

inline nlohmann::json snapshot(const LearnerState& st) {
    nlohmann::json j;
    j["version"] = kSnapshotVersion;
    j["t"] = st.t;
    j["weighting"] = st.weighting == Weighting::ipw ? "ipw" : "plain";
    j["K"] = st.arms();
    j["d"] = st.dim();
    for (std::size_t i = 0; i < st.arms(); ++i) {
        nlohmann::json arm;
        arm["beta_hat"] = detail::vec_to_json(st.beta_hat[i]);
        arm["cov_sum"] = std::vector<double>(st.cov_sum[i].data(), st.cov_sum[i].data() + st.cov_sum[i].size());
        arm["xy_sum"] = detail::vec_to_json(st.xy_sum[i]);
        arm["resid_sq_sum"] = st.resid_sq_sum[i];
        arm["count"] = st.count[i];
        j["arms"].push_back(std::move(arm));
    }
    j["reward_sum"] = st.reward_sum;
    j["pred_sum"] = st.pred_sum;
    j["pred_sq_sum"] = st.pred_sq_sum;
    return j;
}

inline LearnerState restore(const nlohmann::json& j) {
    if (j.value("version", 0) != kSnapshotVersion) throw ConfigError("unsupported learner snapshot version");
    const auto K = j.at("K").get<std::size_t>();
    const auto d = j.at("d").get<std::size_t>();
    const auto w = j.at("weighting").get<std::string>() == "ipw" ? Weighting::ipw : Weighting::plain;
    LearnerState st = LearnerState::init(K, d, w);
    st.t = j.at("t").get<std::size_t>();
    const auto& arms = j.at("arms");
    if (arms.size() != K) throw ConfigError("snapshot arm count mismatch");
    for (std::size_t i = 0; i < K; ++i) {
        const auto& a = arms[i];
        st.beta_hat[i] = detail::vec_from_json(a.at("beta_hat"));
        const auto cov = a.at("cov_sum").get<std::vector<double>>();
        if (cov.size() != d * d) throw ConfigError("snapshot covariance size mismatch");
        st.cov_sum[i] = Eigen::Map<const Matrix>(cov.data(), static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
        st.xy_sum[i] = detail::vec_from_json(a.at("xy_sum"));
        st.resid_sq_sum[i] = a.at("resid_sq_sum").get<double>();
        st.count[i] = a.at("count").get<std::size_t>();
    }
    st.reward_sum = j.at("reward_sum").get<double>();
    st.pred_sum = j.at("pred_sum").get<double>();
    st.pred_sq_sum = j.at("pred_sq_sum").get<double>();
    return st;
}

}  // namespace sbinfer
