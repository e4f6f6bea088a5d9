#pragma once

// Data-generating process: sparse linear rewards over bounded covariates,
// the oracle policy, and deterministic 0/1 replay of labelled datasets.

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <random>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "sbinfer/error.hpp"
#include "sbinfer/rng.hpp"

namespace sbinfer {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Coordinates iid Uniform(lo, hi).
struct IidUniform {
    double lo = -1.0;
    double hi = 1.0;
};

/// Coordinates iid Normal(0, sd^2) conditioned on |x| <= clip (rejection sampled).
struct TruncatedGaussian {
    double sd = 1.0;
    double clip = 2.0;
};

using CovariateDist = std::variant<IidUniform, TruncatedGaussian>;

/// D with ||x||_max <= D almost surely.
inline double support_bound(const CovariateDist& dist) {
    return std::visit(
        [](const auto& d) -> double {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, IidUniform>) {
                return std::max(std::abs(d.lo), std::abs(d.hi));
            } else {
                return d.clip;
            }
        },
        dist);
}

/// First s0 coordinates of each arm drawn from U[0.5, 1], the rest zero.
struct PaperDefaultBetas {};

struct ExplicitBetas {
    std::vector<Vector> values;
};

using BetaGen = std::variant<PaperDefaultBetas, ExplicitBetas>;

struct ScenarioConfig {
    std::size_t d = 600;
    std::size_t T = 300;
    std::size_t K = 2;
    std::size_t s0 = 3;
    std::vector<double> noise_sd{0.5, 0.5};
    CovariateDist covariate_dist = IidUniform{};
    BetaGen beta_gen = PaperDefaultBetas{};
    double margin_nu = 1.0;  // metadata for the mu schedules
    std::uint64_t seed = 20240601;

    void validate() const {
        if (d < 1) throw ConfigError("d must be positive");
        if (T < 1) throw ConfigError("T must be at least 1");
        if (K < 2) throw ConfigError("K must be at least 2");
        if (s0 < 1 || s0 > d) throw ConfigError("s0 must satisfy 1 <= s0 <= d");
        if (noise_sd.size() != K) {
            throw ConfigError("noise_sd must have exactly K entries");
        }
        for (double s : noise_sd) {
            if (!(s >= 0.0) || !std::isfinite(s)) throw ConfigError("noise_sd entries must be >= 0");
        }
        if (!(margin_nu >= 0.0 && margin_nu <= 1.0)) throw ConfigError("margin_nu must lie in [0, 1]");
        std::visit(
            [&](const auto& c) {
                using T_ = std::decay_t<decltype(c)>;
                if constexpr (std::is_same_v<T_, IidUniform>) {
                    if (!(c.lo < c.hi) || !std::isfinite(c.lo) || !std::isfinite(c.hi)) {
                        throw ConfigError("iid_uniform requires finite lo < hi");
                    }
                } else {
                    if (!(c.sd > 0.0) || !(c.clip > 0.0) || !std::isfinite(c.clip)) {
                        throw ConfigError("truncated_gaussian requires sd > 0 and finite clip > 0");
                    }
                }
            },
            covariate_dist);
        if (const auto* ex = std::get_if<ExplicitBetas>(&beta_gen)) {
            if (ex->values.size() != K) throw ConfigError("explicit betas must list K vectors");
            for (const auto& b : ex->values) {
                if (static_cast<std::size_t>(b.size()) != d) {
                    throw ConfigError("explicit beta vectors must have length d");
                }
            }
        }
    }
};

/// Per-arm coefficient vectors (ground truth or estimates).
struct ArmParams {
    std::vector<Vector> betas;

    ArmParams() = default;
    explicit ArmParams(std::vector<Vector> b) : betas(std::move(b)) {}
    static ArmParams zeros(std::size_t K, std::size_t d) {
        return ArmParams(std::vector<Vector>(K, Vector::Zero(static_cast<Eigen::Index>(d))));
    }

    std::size_t arms() const noexcept { return betas.size(); }
    std::size_t dim() const noexcept { return betas.empty() ? 0 : static_cast<std::size_t>(betas.front().size()); }
    const Vector& operator[](std::size_t i) const { return betas[i]; }
    Vector& operator[](std::size_t i) { return betas[i]; }
};

inline ArmParams gen_params(const ScenarioConfig& cfg, Rng& rng) {
    cfg.validate();
    if (const auto* ex = std::get_if<ExplicitBetas>(&cfg.beta_gen)) {
        return ArmParams(ex->values);
    }
    std::uniform_real_distribution<double> unif(0.5, 1.0);
    ArmParams p = ArmParams::zeros(cfg.K, cfg.d);
    for (std::size_t i = 0; i < cfg.K; ++i) {
        for (std::size_t j = 0; j < cfg.s0; ++j) p[i](static_cast<Eigen::Index>(j)) = unif(rng);
    }
    return p;
}

inline double draw_coordinate(const CovariateDist& dist, Rng& rng) {
    return std::visit(
        [&](const auto& c) -> double {
            using T = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<T, IidUniform>) {
                return std::uniform_real_distribution<double>(c.lo, c.hi)(rng);
            } else {
                std::normal_distribution<double> g(0.0, c.sd);
                for (;;) {
                    const double v = g(rng);
                    if (std::abs(v) <= c.clip) return v;
                }
            }
        },
        dist);
}

inline Vector draw_context(const ScenarioConfig& cfg, Rng& rng) {
    Vector x(static_cast<Eigen::Index>(cfg.d));
    for (Eigen::Index j = 0; j < x.size(); ++j) x(j) = draw_coordinate(cfg.covariate_dist, rng);
    return x;
}

inline double expected_reward(const ArmParams& params, std::size_t arm, const Vector& x) {
    if (arm >= params.arms()) throw ConfigError("arm index out of range");
    if (params[arm].size() != x.size()) throw DimensionMismatch("context length does not match d");
    return params[arm].dot(x);
}

/// <beta_arm, x> + N(0, noise_sd[arm]^2).
inline double reward(const ArmParams& params, const std::vector<double>& noise_sd, std::size_t arm,
                     const Vector& x, Rng& rng) {
    const double mean = expected_reward(params, arm, x);
    if (arm >= noise_sd.size()) throw ConfigError("arm index out of range");
    const double sd = noise_sd[arm];
    if (sd == 0.0) return mean;
    return mean + std::normal_distribution<double>(0.0, sd)(rng);
}

/// argmax_i <beta_i, x>, ties to the lowest index. For K = 2 this is
/// evaluated as 1(<beta_1 - beta_0, x> > 0) literally.
inline std::size_t optimal_arm(const ArmParams& params, const Vector& x) {
    if (params.arms() == 2) {
        return (params[1] - params[0]).dot(x) > 0.0 ? 1 : 0;
    }
    std::size_t best = 0;
    double best_val = params[0].dot(x);
    for (std::size_t i = 1; i < params.arms(); ++i) {
        const double v = params[i].dot(x);
        if (v > best_val) {
            best_val = v;
            best = i;
        }
    }
    return best;
}

inline double instant_regret(const ArmParams& params, const Vector& x, std::size_t chosen) {
    if (chosen >= params.arms()) throw ConfigError("chosen arm out of range");
    double best = params[0].dot(x);
    for (std::size_t i = 1; i < params.arms(); ++i) best = std::max(best, params[i].dot(x));
    return std::max(0.0, best - params[chosen].dot(x));
}

/// Monte-Carlo estimate of V* = E[<beta_{a*(X)}, X>]. Only coordinates in the
/// union of supports are drawn; the rest cannot affect the value because
/// coordinates are iid.
inline double oracle_value(const ArmParams& params, const CovariateDist& dist, std::size_t n_samples, Rng& rng) {
    std::vector<Eigen::Index> active;
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(params.dim()); ++j) {
        for (const auto& b : params.betas) {
            if (b(j) != 0.0) {
                active.push_back(j);
                break;
            }
        }
    }
    ArmParams reduced = ArmParams::zeros(params.arms(), active.size());
    for (std::size_t i = 0; i < params.arms(); ++i) {
        for (std::size_t k = 0; k < active.size(); ++k) {
            reduced[i](static_cast<Eigen::Index>(k)) = params[i](active[k]);
        }
    }
    Vector x(static_cast<Eigen::Index>(active.size()));
    double sum = 0.0;
    for (std::size_t n = 0; n < n_samples; ++n) {
        for (Eigen::Index k = 0; k < x.size(); ++k) x(k) = draw_coordinate(dist, rng);
        sum += reduced[optimal_arm(reduced, x)].dot(x);
    }
    return n_samples ? sum / static_cast<double>(n_samples) : 0.0;
}

// ---------------------------------------------------------------------------
// Replay datasets

struct ReplayRow {
    Vector x;
    std::size_t optimal_label = 0;
};

inline double replay_reward(const ReplayRow& row, std::size_t arm) {
    return arm == row.optimal_label ? 1.0 : 0.0;
}

namespace detail {

inline std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline bool parse_double(std::string_view s, double& out) {
    s = trim(s);
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1);
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

inline bool parse_index(std::string_view s, std::size_t& out) {
    s = trim(s);
    if (s.empty()) return false;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

}  // namespace detail

/// Parses a replay CSV with header `x1,...,xd,label` (0-based labels).
inline std::vector<ReplayRow> parse_replay(std::istream& in, std::size_t d, std::size_t K) {
    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(in, line)) throw ParseError(1, "missing header");
    ++lineno;
    {
        const auto cols = detail::split_csv(detail::trim(line));
        if (cols.size() != d + 1) {
            throw ParseError(lineno, "header has " + std::to_string(cols.size()) + " columns, expected " +
                                         std::to_string(d + 1));
        }
        if (detail::trim(cols.back()) != "label") throw ParseError(lineno, "last header column must be 'label'");
    }
    std::vector<ReplayRow> rows;
    while (std::getline(in, line)) {
        ++lineno;
        const auto trimmed = detail::trim(line);
        if (trimmed.empty()) continue;
        const auto cols = detail::split_csv(trimmed);
        if (cols.size() != d + 1) {
            throw ParseError(lineno, "expected " + std::to_string(d + 1) + " columns, found " +
                                         std::to_string(cols.size()));
        }
        ReplayRow row;
        row.x.resize(static_cast<Eigen::Index>(d));
        for (std::size_t j = 0; j < d; ++j) {
            double v = 0.0;
            if (!detail::parse_double(cols[j], v) || !std::isfinite(v)) {
                throw ParseError(lineno, "column " + std::to_string(j + 1) + " is not a finite number");
            }
            row.x(static_cast<Eigen::Index>(j)) = v;
        }
        if (!detail::parse_index(cols[d], row.optimal_label)) {
            throw ParseError(lineno, "label is not a non-negative integer");
        }
        if (row.optimal_label >= K) {
            throw ParseError(lineno, "label " + std::to_string(row.optimal_label) + " is not below K=" +
                                         std::to_string(K));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

inline std::vector<ReplayRow> load_replay(const std::string& path, std::size_t d, std::size_t K) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open replay file: " + path);
    return parse_replay(in, d, K);
}

}  // namespace sbinfer
