#pragma once

// JSON run configuration. Every section and key is optional; unknown keys are
// rejected so typos do not silently fall back to defaults.
//
// {
//   "scenario":   {"d", "T", "K", "s0", "noise_sd" (number or K-array),
//                  "covariate_dist": {"type": "iid_uniform", "lo", "hi"}
//                                  | {"type": "truncated_gaussian", "sd", "clip"},
//                  "beta_gen": {"type": "paper_default"} | {"type": "explicit", "values": [[...], ...]},
//                  "margin_nu", "seed"},
//   "schedule":   {"mode": "epsilon_greedy" | "exploration_free" | "forced_roundrobin_then_greedy",
//                  "c_eps", "gamma", "warmup_steps"},
//   "learner":    {"s", "eta"},
//   "inference":  {"method": "ipw" | "aw", "level", "C_mu1", "C_mu2", "tol", "max_sweeps", "coords"},
//   "experiment": {"trials", "workers", "keep_logs", "oracle_samples"}
// }

#include <json.hpp>

#include <fstream>
#include <optional>
#include <set>
#include <string>

#include "sbinfer/harness.hpp"

namespace sbinfer {

struct RunConfig {
    ScenarioConfig scenario;
    ExplorationSchedule schedule;
    LearnerSettings learner;
    InferenceOptions inference;
    std::optional<Method> method;  // unset: aw without exploration, ipw otherwise
    ExperimentSettings experiment;

    /// Copies shared fields into the inference options and fills defaults that
    /// depend on other sections. Call after every override.
    void resolve() {
        if (schedule.mode == ExplorationMode::forced_roundrobin_then_greedy && schedule.warmup_steps == 0) {
            schedule.warmup_steps = default_warmup(scenario.K, scenario.s0, scenario.d);
        }
        inference.method = method.value_or(schedule.mode == ExplorationMode::epsilon_greedy ? Method::ipw : Method::aw);
        inference.s0 = scenario.s0;
        inference.nu = scenario.margin_nu;
        inference.c_eps = schedule.c_eps;
        inference.gamma = schedule.mode == ExplorationMode::epsilon_greedy ? schedule.gamma : 0.0;
        scenario.validate();
        schedule.validate();
    }
};

namespace detail {

inline void check_keys(const nlohmann::json& j, const char* section, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError(std::string("config section '") + section + "' must be an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, v] : j.items()) {
        if (!ok.count(k)) throw ConfigError(std::string("unknown key '") + k + "' in '" + section + "'");
    }
}

template <class T>
void read(const nlohmann::json& j, const char* key, T& out) {
    if (!j.contains(key) || j.at(key).is_null()) return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(std::string("bad value for '") + key + "'");
    }
}

inline ExplorationMode parse_mode(const std::string& s) {
    if (s == "epsilon_greedy") return ExplorationMode::epsilon_greedy;
    if (s == "exploration_free") return ExplorationMode::exploration_free;
    if (s == "forced_roundrobin_then_greedy") return ExplorationMode::forced_roundrobin_then_greedy;
    throw ConfigError("unknown schedule mode: " + s);
}

inline Method parse_method(const std::string& s) {
    if (s == "ipw") return Method::ipw;
    if (s == "aw") return Method::aw;
    throw UnsupportedMethod("unknown method: " + s);
}

}  // namespace detail

inline RunConfig parse_config(const nlohmann::json& root) {
    using detail::read;
    RunConfig c;
    if (root.is_null()) return c;
    detail::check_keys(root, "root", {"scenario", "schedule", "learner", "inference", "experiment"});

    if (root.contains("scenario")) {
        const auto& j = root["scenario"];
        detail::check_keys(j, "scenario",
                           {"d", "T", "K", "s0", "noise_sd", "covariate_dist", "beta_gen", "margin_nu", "seed"});
        auto& s = c.scenario;
        read(j, "d", s.d);
        read(j, "T", s.T);
        read(j, "K", s.K);
        read(j, "s0", s.s0);
        read(j, "margin_nu", s.margin_nu);
        read(j, "seed", s.seed);
        s.noise_sd.assign(s.K, 0.5);
        if (j.contains("noise_sd")) {
            const auto& n = j["noise_sd"];
            if (n.is_number()) {
                s.noise_sd.assign(s.K, n.get<double>());
            } else {
                read(j, "noise_sd", s.noise_sd);
            }
        }
        if (j.contains("covariate_dist")) {
            const auto& cd = j["covariate_dist"];
            const std::string type = cd.value("type", "iid_uniform");
            if (type == "iid_uniform") {
                detail::check_keys(cd, "covariate_dist", {"type", "lo", "hi"});
                IidUniform u;
                read(cd, "lo", u.lo);
                read(cd, "hi", u.hi);
                s.covariate_dist = u;
            } else if (type == "truncated_gaussian") {
                detail::check_keys(cd, "covariate_dist", {"type", "sd", "clip"});
                TruncatedGaussian g;
                read(cd, "sd", g.sd);
                read(cd, "clip", g.clip);
                s.covariate_dist = g;
            } else {
                throw ConfigError("unknown covariate_dist type: " + type);
            }
        }
        if (j.contains("beta_gen")) {
            const auto& bg = j["beta_gen"];
            const std::string type = bg.value("type", "paper_default");
            if (type == "paper_default") {
                detail::check_keys(bg, "beta_gen", {"type"});
                s.beta_gen = PaperDefaultBetas{};
            } else if (type == "explicit") {
                detail::check_keys(bg, "beta_gen", {"type", "values"});
                std::vector<std::vector<double>> rows;
                read(bg, "values", rows);
                ExplicitBetas eb;
                for (const auto& r : rows) eb.values.push_back(Eigen::Map<const Vector>(r.data(), static_cast<Eigen::Index>(r.size())));
                s.beta_gen = std::move(eb);
            } else {
                throw ConfigError("unknown beta_gen type: " + type);
            }
        }
    }

    if (root.contains("schedule")) {
        const auto& j = root["schedule"];
        detail::check_keys(j, "schedule", {"mode", "c_eps", "gamma", "warmup_steps"});
        if (j.contains("mode")) c.schedule.mode = detail::parse_mode(j["mode"].get<std::string>());
        read(j, "c_eps", c.schedule.c_eps);
        read(j, "gamma", c.schedule.gamma);
        read(j, "warmup_steps", c.schedule.warmup_steps);
    }

    if (root.contains("learner")) {
        const auto& j = root["learner"];
        detail::check_keys(j, "learner", {"s", "eta"});
        if (j.contains("s") && !j["s"].is_null()) c.learner.s = j["s"].get<std::size_t>();
        if (j.contains("eta") && !j["eta"].is_null()) c.learner.eta = j["eta"].get<double>();
    }

    if (root.contains("inference")) {
        const auto& j = root["inference"];
        detail::check_keys(j, "inference", {"method", "level", "C_mu1", "C_mu2", "tol", "max_sweeps", "coords"});
        if (j.contains("method")) c.method = detail::parse_method(j["method"].get<std::string>());
        read(j, "level", c.inference.level);
        read(j, "C_mu1", c.inference.C_mu1);
        read(j, "C_mu2", c.inference.C_mu2);
        read(j, "tol", c.inference.decorr.tol);
        read(j, "max_sweeps", c.inference.decorr.max_sweeps);
        read(j, "coords", c.inference.coord_limit);
    }

    if (root.contains("experiment")) {
        const auto& j = root["experiment"];
        detail::check_keys(j, "experiment", {"trials", "workers", "keep_logs", "oracle_samples"});
        read(j, "trials", c.experiment.n_trials);
        read(j, "workers", c.experiment.workers);
        read(j, "keep_logs", c.experiment.keep_logs);
        read(j, "oracle_samples", c.experiment.oracle_samples);
    }
    c.resolve();
    return c;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return parse_config(j);
}

/// Effective configuration after defaults, in the same layout parse_config reads.
inline nlohmann::json to_json(const RunConfig& c) {
    nlohmann::json j;
    const auto& s = c.scenario;
    j["scenario"] = {{"d", s.d}, {"T", s.T}, {"K", s.K}, {"s0", s.s0}, {"noise_sd", s.noise_sd},
                     {"margin_nu", s.margin_nu}, {"seed", s.seed}};
    if (const auto* u = std::get_if<IidUniform>(&s.covariate_dist)) {
        j["scenario"]["covariate_dist"] = {{"type", "iid_uniform"}, {"lo", u->lo}, {"hi", u->hi}};
    } else {
        const auto& g = std::get<TruncatedGaussian>(s.covariate_dist);
        j["scenario"]["covariate_dist"] = {{"type", "truncated_gaussian"}, {"sd", g.sd}, {"clip", g.clip}};
    }
    if (const auto* e = std::get_if<ExplicitBetas>(&s.beta_gen)) {
        nlohmann::json vals = nlohmann::json::array();
        for (const auto& v : e->values) vals.push_back(std::vector<double>(v.data(), v.data() + v.size()));
        j["scenario"]["beta_gen"] = {{"type", "explicit"}, {"values", vals}};
    } else {
        j["scenario"]["beta_gen"] = {{"type", "paper_default"}};
    }
    j["schedule"] = {{"mode", detail::mode_name(c.schedule.mode)},
                     {"c_eps", c.schedule.c_eps},
                     {"gamma", c.schedule.gamma},
                     {"warmup_steps", c.schedule.warmup_steps}};
    j["learner"] = {{"s", c.learner.s ? nlohmann::json(*c.learner.s) : nlohmann::json(nullptr)},
                    {"eta", c.learner.eta ? nlohmann::json(*c.learner.eta) : nlohmann::json(nullptr)}};
    j["inference"] = {{"method", to_string(c.inference.method)},
                      {"level", c.inference.level},
                      {"C_mu1", c.inference.C_mu1},
                      {"C_mu2", c.inference.C_mu2},
                      {"tol", c.inference.decorr.tol},
                      {"max_sweeps", c.inference.decorr.max_sweeps},
                      {"coords", c.inference.coord_limit}};
    j["experiment"] = {{"trials", c.experiment.n_trials},
                       {"workers", c.experiment.workers},
                       {"keep_logs", c.experiment.keep_logs},
                       {"oracle_samples", c.experiment.oracle_samples}};
    return j;
}

}  // namespace sbinfer
