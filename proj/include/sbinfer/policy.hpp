#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <random>
#include <vector>

#include "sbinfer/env.hpp"

namespace sbinfer {

enum class ExplorationMode { epsilon_greedy, exploration_free, forced_roundrobin_then_greedy };

/// eps_t = min(1, c_eps * t^-gamma) in epsilon_greedy mode.
struct ExplorationSchedule {
    double c_eps = 1.0;
    double gamma = 0.0;
    ExplorationMode mode = ExplorationMode::epsilon_greedy;
    std::size_t warmup_steps = 0;  // only used by forced_roundrobin_then_greedy

    void validate() const {
        if (mode == ExplorationMode::epsilon_greedy) {
            if (!(c_eps > 0.0)) throw ConfigError("c_eps must be positive");
            if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in [0, 1)");
        }
    }
};

/// Warm-up length K * max(20, ceil(2 s0 log d)).
inline std::size_t default_warmup(std::size_t K, std::size_t s0, std::size_t d) {
    const double ln_d = std::log(static_cast<double>(std::max<std::size_t>(d, 1)));
    const auto scaled = static_cast<std::size_t>(std::ceil(2.0 * static_cast<double>(s0) * ln_d));
    return K * std::max<std::size_t>(20, scaled);
}

inline double epsilon_at(const ExplorationSchedule& sched, std::size_t t) {
    if (t < 1) throw ConfigError("time index starts at 1");
    switch (sched.mode) {
        case ExplorationMode::epsilon_greedy:
            return std::min(1.0, sched.c_eps * std::pow(static_cast<double>(t), -sched.gamma));
        case ExplorationMode::exploration_free:
            return 0.0;
        case ExplorationMode::forced_roundrobin_then_greedy:
            return t <= sched.warmup_steps ? 1.0 : 0.0;
    }
    return 0.0;
}

/// Arm forced by the round-robin warm-up at step t, if any.
inline std::optional<std::size_t> forced_arm(const ExplorationSchedule& sched, std::size_t t, std::size_t K) {
    if (sched.mode == ExplorationMode::forced_roundrobin_then_greedy && t <= sched.warmup_steps) {
        return (t - 1) % K;
    }
    return std::nullopt;
}

struct PropensityVector {
    std::vector<double> probs;
    std::size_t greedy = 0;

    std::size_t arms() const noexcept { return probs.size(); }
    double operator[](std::size_t i) const { return probs[i]; }
};

inline std::size_t greedy_arm(const ArmParams& beta_hats, const Vector& x) {
    return optimal_arm(beta_hats, x);
}

/// Greedy arm gets 1 - eps + eps/K, every other arm eps/K.
inline PropensityVector propensities(const ArmParams& beta_hats, const Vector& x, double eps) {
    if (!(eps >= 0.0 && eps <= 1.0)) throw ConfigError("eps must lie in [0, 1]");
    const std::size_t K = beta_hats.arms();
    PropensityVector pv;
    pv.greedy = greedy_arm(beta_hats, x);
    const double floor = eps / static_cast<double>(K);
    pv.probs.assign(K, floor);
    pv.probs[pv.greedy] = 1.0 - eps + floor;
    return pv;
}

inline std::size_t sample_action(const PropensityVector& pv, Rng& rng) {
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    double cum = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < pv.probs.size(); ++i) {
        if (pv.probs[i] <= 0.0) continue;
        last_positive = i;
        cum += pv.probs[i];
        if (u < cum) return i;
    }
    return last_positive;  // rounding slack in the cumulative sum
}

}  // namespace sbinfer
