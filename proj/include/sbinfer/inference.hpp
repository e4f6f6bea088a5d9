#pragma once

// Variance estimation, confidence intervals and tests for the debiased
// estimators, and inference on the optimal policy value.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <utility>
#include <vector>

#include "sbinfer/debias.hpp"
#include "sbinfer/learner.hpp"
#include "sbinfer/trajectory.hpp"

namespace sbinfer {

/// Inverse standard normal CDF, Wichura's AS 241 (PPND16); relative accuracy about 1e-16.
inline double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw ConfigError("normal_quantile: p must lie in (0, 1)");
    const double q = p - 0.5;
    if (std::abs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        return q *
               (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r + 6.7265770927008700853e+4) * r +
                    4.5921953931549871457e+4) * r + 1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
                 1.3314166789178437745e+2) * r + 3.3871328727963666080e+0) /
               (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r + 3.9307895800092710610e+4) * r +
                    2.1213794301586595867e+4) * r + 5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
                 4.2313330701600911252e+1) * r + 1.0);
    }
    double r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double val;
    if (r <= 5.0) {
        r -= 1.6;
        val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r + 2.41780725177450611770e-1) * r +
                   1.27045825245236838258e+0) * r + 3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
                4.63033784615654529590e+0) * r + 1.42343711074968357734e+0) /
              (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r + 1.51986665636164571966e-2) * r +
                   1.48103976427480074590e-1) * r + 6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
                2.05319162663775882187e+0) * r + 1.0);
    } else {
        r -= 5.0;
        val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r + 1.24266094738807843860e-3) * r +
                   2.65321895265761230930e-2) * r + 2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
                5.46378491116411436990e+0) * r + 6.65790464350110377720e+0) /
              (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r + 1.84631831751005468180e-5) * r +
                   7.86869131145613259100e-4) * r + 1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
                5.99832206555887937690e-1) * r + 1.0);
    }
    return q < 0.0 ? -val : val;
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

/// P(|N(0,1)| >= |z|).
inline double two_sided_p(double z) { return std::min(1.0, std::erfc(std::abs(z) / std::numbers::sqrt2)); }

/// sigma_i^2 per arm. ipw: (1/T) sum w (y - <beta_{i,t-1}, x>)^2 over an ipw-weighted
/// learner; aw: the plain residual mean over the arm's own pulls.
/// With allow_unsampled, an aw arm without pulls yields NaN instead of an error.
inline std::vector<double> noise_variance(const LearnerState& st, Method method, bool allow_unsampled = false) {
    const bool matches = (method == Method::ipw) == (st.weighting == Weighting::ipw);
    if (!matches) throw ConfigError("noise_variance: learner weighting does not match the inference method");
    if (st.t == 0) throw InferenceError("noise_variance: empty run");
    std::vector<double> out(st.arms());
    for (std::size_t i = 0; i < st.arms(); ++i) {
        if (method == Method::ipw) {
            out[i] = st.resid_sq_sum[i] / static_cast<double>(st.t);
        } else {
            if (st.count[i] == 0) {
                if (!allow_unsampled) throw InferenceError("arm never sampled: " + std::to_string(i));
                out[i] = std::numeric_limits<double>::quiet_NaN();
                continue;
            }
            out[i] = st.resid_sq_sum[i] / static_cast<double>(st.count[i]);
        }
    }
    return out;
}

/// m^T A m, exploiting the sparsity of m.
inline double quad_form(const Vector& m, const Matrix& A) {
    std::vector<Eigen::Index> nz;
    for (Eigen::Index j = 0; j < m.size(); ++j) {
        if (m(j) != 0.0) nz.push_back(j);
    }
    double s = 0.0;
    for (auto j : nz) {
        double inner = 0.0;
        for (auto k : nz) inner += A(j, k) * m(k);
        s += m(j) * inner;
    }
    return s;
}

/// S^2_{i(l)} = 2/(c_eps (1+gamma)) m_l^T L_{1-i} m_l + T^-gamma m_l^T L_i m_l.
inline double s2_ipw(std::size_t l, std::size_t i, const DecorrMatrix& M, const CovarianceSet& covs, double c_eps,
                     double gamma, std::size_t T) {
    if (covs.per_arm_plain.size() != 2) throw UnsupportedMethod("IPW inference is defined for K = 2 only");
    if (i > 1) throw ConfigError("s2_ipw: arm out of range");
    const Vector m = M.row(l);
    const double other = quad_form(m, covs.per_arm_plain[1 - i]);
    const double own = quad_form(m, covs.per_arm_plain[i]);
    return 2.0 / (c_eps * (1.0 + gamma)) * other + std::pow(static_cast<double>(T), -gamma) * own;
}

struct VarianceComponents {
    Method method = Method::aw;
    std::vector<double> sigma2_hat;  // K
    Matrix S2_ipw;                   // K x d (ipw)
    Matrix lambda_inv_diag;          // K x d (aw): m_l^T L_i m_l
};

inline double standard_error(std::size_t l, std::size_t i, const VarianceComponents& vc, std::size_t T,
                             double gamma) {
    const auto li = static_cast<Eigen::Index>(l);
    const auto ii = static_cast<Eigen::Index>(i);
    const double Td = static_cast<double>(T);
    if (vc.method == Method::ipw) {
        return std::sqrt(vc.sigma2_hat[i] * vc.S2_ipw(ii, li) / std::pow(Td, 1.0 - gamma));
    }
    return std::sqrt(vc.sigma2_hat[i] * vc.lambda_inv_diag(ii, li) / Td);
}

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    double width() const { return hi - lo; }
    bool contains(double v) const { return lo <= v && v <= hi; }
};

inline Interval confidence_interval(double point, double se, double level) {
    if (!(level > 0.0 && level < 1.0)) throw ConfigError("confidence level must lie in (0, 1)");
    const double half = normal_quantile((1.0 + level) / 2.0) * se;
    return {point - half, point + half};
}

struct DiffTest {
    double point = 0.0;
    double se = 0.0;
    double z = 0.0;
    double p = 1.0;
    bool degenerate = false;
};

/// Test of beta_a(l) - beta_b(l) = 0; the two arms' variance terms add.
inline DiffTest diff_test(double point_a, double point_b, double se_a, double se_b) {
    DiffTest r;
    r.point = point_a - point_b;
    r.se = std::sqrt(se_a * se_a + se_b * se_b);
    if (r.se > 0.0) {
        r.z = r.point / r.se;
        r.p = two_sided_p(r.z);
    } else if (r.point != 0.0) {
        r.z = r.point > 0.0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
        r.p = 0.0;
        r.degenerate = true;
    }
    return r;
}

inline DiffTest diff_test(std::size_t l, std::size_t arm_a, std::size_t arm_b, const std::vector<Vector>& points,
                          const VarianceComponents& vc, std::size_t T, double gamma) {
    const auto li = static_cast<Eigen::Index>(l);
    return diff_test(points[arm_a](li), points[arm_b](li), standard_error(l, arm_a, vc, T, gamma),
                     standard_error(l, arm_b, vc, T, gamma));
}

inline double value_estimate(const TrajectoryLog& log) {
    if (log.empty()) throw ConfigError("value_estimate: empty log");
    double s = 0.0;
    for (const auto& r : log.rows()) s += r.y;
    return s / static_cast<double>(log.size());
}

struct ValueVariance {
    double G = 0.0;
    double W = 0.0;
    double total() const { return G + W; }
};

/// S_V^2 = G_T + W_T with W_T clamped at zero.
inline ValueVariance value_variance(const TrajectoryLog& log, const LearnerState& st,
                                    const std::vector<double>& sigma2_hat) {
    if (log.empty() || st.t != log.size()) throw ConfigError("value_variance: learner and log disagree on T");
    const double T = static_cast<double>(log.size());
    ValueVariance v;
    for (const auto& r : log.rows()) v.G += sigma2_hat[r.a];
    v.G /= T;
    const double mean = st.pred_sum / T;
    v.W = std::max(0.0, st.pred_sq_sum / T - mean * mean);
    return v;
}

// ---------------------------------------------------------------------------
// Full report

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct InferenceOptions {
    Method method = Method::aw;
    double level = 0.95;
    double C_mu1 = 0.5;
    double C_mu2 = 0.5;
    double nu = 1.0;
    std::size_t s0 = 3;
    double c_eps = 1.0;
    double gamma = 0.0;
    DecorrOptions decorr{};
    std::size_t coord_limit = 0;  // 0: every coordinate
};

struct CoordinateEstimate {
    std::size_t arm = 0;
    std::size_t coord = 0;
    double raw = 0.0;
    double point = 0.0;
    double se = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    double z = 0.0;
    double p = 1.0;
};

struct DiffEstimate {
    std::size_t coord = 0;
    std::size_t arm_a = 0;
    std::size_t arm_b = 0;
    DiffTest test;
};

struct ValueInference {
    double v_hat = 0.0;
    ValueVariance variance;
    double se = 0.0;
    Interval ci;
};

struct InferenceReport {
    Method method = Method::aw;
    double level = 0.95;
    std::size_t T = 0;
    std::size_t K = 0;
    std::size_t coords = 0;  // coordinates reported per arm
    double gamma = 0.0;
    double c_eps = 0.0;
    std::vector<double> sigma2_hat;
    std::vector<double> mu;  // penalty of each de-correlation matrix
    std::vector<CoordinateEstimate> estimates;  // arm-major, coords per arm
    std::vector<DiffEstimate> diffs;            // coordinate-major, pairs (a < b)
    ValueInference value;
    bool decorr_converged = true;
    double max_kkt_excess = 0.0;
    std::vector<std::size_t> unsampled_arms;  // aw only; their estimates are NaN

    const CoordinateEstimate& at(std::size_t arm, std::size_t coord) const { return estimates[arm * coords + coord]; }
};

/// Debiased estimates, standard errors, intervals, pairwise tests and the
/// value interval for one completed run.
inline InferenceReport infer(const TrajectoryLog& log, const LearnerState& st, const InferenceOptions& opt) {
    const std::size_t K = log.arms();
    const std::size_t d = log.dim();
    const std::size_t T = log.size();
    if (st.t != T || st.arms() != K || st.dim() != d) throw DimensionMismatch("infer: learner and log disagree");
    if (opt.method == Method::ipw && K != 2) throw UnsupportedMethod("IPW inference is defined for K = 2 only");

    InferenceReport rep;
    rep.method = opt.method;
    rep.level = opt.level;
    rep.T = T;
    rep.K = K;
    rep.coords = opt.coord_limit == 0 ? d : std::min(d, opt.coord_limit);
    rep.gamma = opt.gamma;
    rep.c_eps = opt.c_eps;

    const CovarianceSet covs = accumulate_covariances(log);
    VarianceComponents vc;
    vc.method = opt.method;
    // An arm never pulled has no AW noise estimate; its rows are reported as NaN.
    vc.sigma2_hat = noise_variance(st, opt.method, /*allow_unsampled=*/true);
    for (std::size_t i = 0; i < K; ++i) {
        if (std::isnan(vc.sigma2_hat[i])) rep.unsampled_arms.push_back(i);
    }
    rep.sigma2_hat = vc.sigma2_hat;
    auto estimable = [&](std::size_t i) { return !std::isnan(vc.sigma2_hat[i]); };
    std::vector<Vector> points(K);

    auto note_decorr = [&](const DecorrMatrix& M) {
        rep.mu.push_back(M.mu);
        rep.decorr_converged = rep.decorr_converged && M.all_converged();
        rep.max_kkt_excess = std::max(rep.max_kkt_excess, M.max_kkt_excess());
    };

    if (opt.method == Method::ipw) {
        const double mu = mu_schedule(MuKind::pooled, T, d, opt.s0, opt.nu, opt.C_mu1);
        const DecorrMatrix M = build_decorr(covs, DecorrTarget::pooled(), mu, opt.decorr, rep.coords);
        note_decorr(M);
        vc.S2_ipw = Matrix::Zero(2, static_cast<Eigen::Index>(rep.coords));
        for (std::size_t i = 0; i < 2; ++i) {
            points[i] = ipw_debias(st.beta_hat[i], log, M, i).point;
            for (std::size_t l = 0; l < rep.coords; ++l) {
                vc.S2_ipw(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l)) =
                    s2_ipw(l, i, M, covs, opt.c_eps, opt.gamma, T);
            }
        }
    } else {
        const double mu = mu_schedule(MuKind::arm, T, d, opt.s0, opt.nu, opt.C_mu2);
        vc.lambda_inv_diag = Matrix::Zero(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(rep.coords));
        for (std::size_t i = 0; i < K; ++i) {
            if (!estimable(i)) {
                points[i] = st.beta_hat[i];
                vc.lambda_inv_diag.row(static_cast<Eigen::Index>(i)).setConstant(kNaN);
                continue;
            }
            const DecorrMatrix M = build_decorr(covs, DecorrTarget::for_arm(i), mu, opt.decorr, rep.coords);
            note_decorr(M);
            points[i] = aw_debias(st.beta_hat[i], log, M, i).point;
            for (std::size_t l = 0; l < rep.coords; ++l) {
                vc.lambda_inv_diag(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l)) =
                    quad_form(M.row(l), covs.per_arm_plain[i]);
            }
        }
    }

    rep.estimates.reserve(K * rep.coords);
    for (std::size_t i = 0; i < K; ++i) {
        for (std::size_t l = 0; l < rep.coords; ++l) {
            CoordinateEstimate e;
            e.arm = i;
            e.coord = l;
            e.raw = st.beta_hat[i](static_cast<Eigen::Index>(l));
            e.point = points[i](static_cast<Eigen::Index>(l));
            e.se = standard_error(l, i, vc, T, opt.gamma);
            const Interval ci = confidence_interval(e.point, e.se, opt.level);
            e.ci_lo = ci.lo;
            e.ci_hi = ci.hi;
            if (estimable(i)) {
                const DiffTest against_zero = diff_test(e.point, 0.0, e.se, 0.0);
                e.z = against_zero.z;
                e.p = against_zero.p;
            } else {
                e.z = e.p = kNaN;
            }
            rep.estimates.push_back(e);
        }
    }
    for (std::size_t l = 0; l < rep.coords; ++l) {
        for (std::size_t a = 0; a < K; ++a) {
            for (std::size_t b = a + 1; b < K; ++b) {
                DiffTest t{kNaN, kNaN, kNaN, kNaN, false};
                if (estimable(a) && estimable(b)) t = diff_test(l, a, b, points, vc, T, opt.gamma);
                rep.diffs.push_back({l, a, b, t});
            }
        }
    }

    rep.value.v_hat = value_estimate(log);
    rep.value.variance = value_variance(log, st, vc.sigma2_hat);
    rep.value.se = std::sqrt(rep.value.variance.total() / static_cast<double>(T));
    rep.value.ci = confidence_interval(rep.value.v_hat, rep.value.se, opt.level);
    return rep;
}

}  // namespace sbinfer
