#pragma once

// Scenario execution, replicated trials, offline replay and file export.

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "sbinfer/debias.hpp"
#include "sbinfer/env.hpp"
#include "sbinfer/inference.hpp"
#include "sbinfer/learner.hpp"
#include "sbinfer/policy.hpp"
#include "sbinfer/trajectory.hpp"

namespace sbinfer {

/// Optional overrides for HTConfig; unset fields take the defaults
/// s = 3 s0 and eta = 0.4 / lambda_max(first 50 contexts).
struct LearnerSettings {
    std::optional<std::size_t> s;
    std::optional<double> eta;
};

inline HTConfig resolve_ht_config(const LearnerSettings& ls, std::size_t s0, std::size_t K, std::size_t d,
                                  std::span<const Vector> contexts) {
    HTConfig cfg;
    cfg.K = K;
    cfg.d = d;
    cfg.s = ls.s.value_or(default_sparsity(s0, d));
    cfg.eta = ls.eta ? *ls.eta : default_eta(contexts);
    cfg.validate();
    return cfg;
}

inline Weighting weighting_for(Method m) { return m == Method::ipw ? Weighting::ipw : Weighting::plain; }

struct TrialRun {
    TrajectoryLog log;
    LearnerState state;
    HTConfig ht;
    std::vector<double> cum_regret;
};

/// One run of the epsilon-greedy / exploration-free loop with online hard thresholding.
inline TrialRun run_trial(const ScenarioConfig& sc, const ArmParams& truth, const ExplorationSchedule& sched,
                          const LearnerSettings& ls, Method method, std::uint64_t trial_seed) {
    sc.validate();
    sched.validate();
    if (truth.arms() != sc.K || truth.dim() != sc.d) throw DimensionMismatch("run_trial: truth shape mismatch");

    Rng ctx_rng(derive_seed(trial_seed, kContextStream));
    Rng dec_rng(derive_seed(trial_seed, kDecisionStream));
    std::vector<Vector> contexts;
    contexts.reserve(sc.T);
    for (std::size_t t = 0; t < sc.T; ++t) contexts.push_back(draw_context(sc, ctx_rng));

    TrialRun run;
    run.ht = resolve_ht_config(ls, sc.s0, sc.K, sc.d, contexts);
    run.state = LearnerState::init(sc.K, sc.d, weighting_for(method));
    run.log = TrajectoryLog(sc.K, sc.d);
    run.log.reserve(sc.T);
    run.cum_regret.reserve(sc.T);
    double cum = 0.0;
    for (std::size_t t = 1; t <= sc.T; ++t) {
        const Vector& x = contexts[t - 1];
        const double eps = epsilon_at(sched, t);
        const PropensityVector pv = propensities(run.state.estimates(), x, eps);
        const std::size_t a = forced_arm(sched, t, sc.K).value_or(sample_action(pv, dec_rng));
        const double y = reward(truth, sc.noise_sd, a, x, dec_rng);
        step(run.state, x, pv, a, y, run.ht);

        LogRow row;
        row.t = t;
        row.x = x;
        row.eps = eps;
        row.pv = pv.probs;
        row.a = a;
        row.y = y;
        row.optimal_arm = optimal_arm(truth, x);
        row.regret = instant_regret(truth, x, a);
        cum += *row.regret;
        run.cum_regret.push_back(cum);
        run.log.append(std::move(row));
    }
    return run;
}

/// Replay of a completed log: reruns the learner and all estimators. The
/// report is a pure function of (log, learner config, inference options).
inline InferenceReport rederive_report(const TrajectoryLog& log, const HTConfig& ht, const InferenceOptions& opt) {
    const LearnerState st = replay_learner(log, ht, weighting_for(opt.method));
    return infer(log, st, opt);
}

// ---------------------------------------------------------------------------
// Replicated experiments

struct ExperimentSettings {
    std::size_t n_trials = 100;
    std::size_t workers = 1;
    std::size_t keep_logs = 5;
    bool with_inference = true;
    std::size_t oracle_samples = 1'000'000;
};

struct TrialOutcome {
    std::uint64_t seed = 0;
    std::vector<double> cum_regret;
    std::optional<InferenceReport> report;
    double eta = 0.0;
    std::size_t s = 0;
    double oracle_path_value = 0.0;  // (1/T) sum <beta_{a*(X_t)}, X_t>
    std::vector<std::size_t> pulls;
};

struct EstimateAggregate {
    std::size_t arm = 0;
    std::size_t coord = 0;
    double truth = std::numeric_limits<double>::quiet_NaN();
    double mean_raw = 0.0;
    double mean_point = 0.0;
    double sd_point = 0.0;
    double mean_se = 0.0;
    double mean_ci_lo = 0.0;
    double mean_ci_hi = 0.0;
    double mean_width = 0.0;
    double coverage = std::numeric_limits<double>::quiet_NaN();
};

struct DiffAggregate {
    std::size_t coord = 0;
    std::size_t arm_a = 0;
    std::size_t arm_b = 0;
    double mean_point = 0.0;
    double mean_se = 0.0;
    double mean_z = 0.0;
    double mean_p = 0.0;
    double reject_rate = 0.0;  // at 1 - level
};

struct ExperimentResult {
    ScenarioConfig scenario;
    ExplorationSchedule schedule;
    InferenceOptions inference;
    ArmParams truth;
    double oracle_value = std::numeric_limits<double>::quiet_NaN();  // Monte-Carlo V*
    std::vector<TrialOutcome> trials;
    std::vector<TrajectoryLog> logs;  // first keep_logs trials
    std::vector<HTConfig> log_configs;

    std::size_t n_trials() const { return trials.size(); }
};

inline double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

inline double sd_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

/// Trial i uses derive_seed(master, i); results are merged by trial index,
/// so the outcome does not depend on the worker count.
inline ExperimentResult run_experiment(const ScenarioConfig& sc, const ExplorationSchedule& sched,
                                       const LearnerSettings& ls, const InferenceOptions& inf,
                                       const ExperimentSettings& es) {
    sc.validate();
    sched.validate();
    if (es.n_trials < 1) throw ConfigError("n_trials must be at least 1");
    if (inf.method == Method::ipw && sc.K != 2) throw UnsupportedMethod("IPW inference is defined for K = 2 only");

    ExperimentResult res;
    res.scenario = sc;
    res.schedule = sched;
    res.inference = inf;
    {
        Rng prng(derive_seed(sc.seed, kParamStream));
        res.truth = gen_params(sc, prng);
    }
    if (es.oracle_samples > 0) {
        Rng orng(derive_seed(sc.seed, kOracleStream));
        res.oracle_value = oracle_value(res.truth, sc.covariate_dist, es.oracle_samples, orng);
    }
    res.trials.resize(es.n_trials);
    const std::size_t keep = std::min(es.keep_logs, es.n_trials);
    res.logs.resize(keep);
    res.log_configs.resize(keep);

    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(es.n_trials);
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= es.n_trials) return;
            try {
                TrialOutcome& out = res.trials[i];
                out.seed = derive_seed(sc.seed, i);
                TrialRun run = run_trial(sc, res.truth, sched, ls, inf.method, out.seed);
                out.cum_regret = std::move(run.cum_regret);
                out.eta = run.ht.eta;
                out.s = run.ht.s;
                out.pulls = run.state.count;
                double ov = 0.0;
                for (const auto& r : run.log.rows()) ov += res.truth[*r.optimal_arm].dot(r.x);
                out.oracle_path_value = ov / static_cast<double>(run.log.size());
                if (es.with_inference) out.report = infer(run.log, run.state, inf);
                if (i < keep) {
                    res.logs[i] = std::move(run.log);
                    res.log_configs[i] = run.ht;
                }
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t nw = std::max<std::size_t>(1, std::min(es.workers, es.n_trials));
    if (nw == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < nw; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return res;
}

inline std::vector<EstimateAggregate> aggregate_estimates(const ExperimentResult& r) {
    std::vector<EstimateAggregate> out;
    if (r.trials.empty() || !r.trials.front().report) return out;
    const auto& first = *r.trials.front().report;
    const double n = static_cast<double>(r.trials.size());
    for (std::size_t i = 0; i < first.K; ++i) {
        for (std::size_t l = 0; l < first.coords; ++l) {
            EstimateAggregate a;
            a.arm = i;
            a.coord = l;
            if (r.truth.arms() > i) a.truth = r.truth[i](static_cast<Eigen::Index>(l));
            std::vector<double> pts;
            pts.reserve(r.trials.size());
            double covered = 0.0;
            for (const auto& tr : r.trials) {
                const auto& e = tr.report->at(i, l);
                pts.push_back(e.point);
                a.mean_raw += e.raw;
                a.mean_se += e.se;
                a.mean_ci_lo += e.ci_lo;
                a.mean_ci_hi += e.ci_hi;
                a.mean_width += e.ci_hi - e.ci_lo;
                covered += (e.ci_lo <= a.truth && a.truth <= e.ci_hi) ? 1.0 : 0.0;
            }
            a.mean_point = mean_of(pts);
            a.sd_point = sd_of(pts);
            a.mean_raw /= n;
            a.mean_se /= n;
            a.mean_ci_lo /= n;
            a.mean_ci_hi /= n;
            a.mean_width /= n;
            if (!std::isnan(a.truth)) a.coverage = covered / n;
            out.push_back(a);
        }
    }
    return out;
}

inline std::vector<DiffAggregate> aggregate_diffs(const ExperimentResult& r) {
    std::vector<DiffAggregate> out;
    if (r.trials.empty() || !r.trials.front().report) return out;
    const auto& first = *r.trials.front().report;
    const double n = static_cast<double>(r.trials.size());
    const double alpha = 1.0 - first.level;
    for (std::size_t k = 0; k < first.diffs.size(); ++k) {
        DiffAggregate a;
        a.coord = first.diffs[k].coord;
        a.arm_a = first.diffs[k].arm_a;
        a.arm_b = first.diffs[k].arm_b;
        for (const auto& tr : r.trials) {
            const auto& t = tr.report->diffs[k].test;
            a.mean_point += t.point;
            a.mean_se += t.se;
            a.mean_z += t.z;
            a.mean_p += t.p;
            a.reject_rate += t.p < alpha ? 1.0 : 0.0;
        }
        a.mean_point /= n;
        a.mean_se /= n;
        a.mean_z /= n;
        a.mean_p /= n;
        a.reject_rate /= n;
        out.push_back(a);
    }
    return out;
}

struct RegretCurve {
    std::vector<double> mean;
    std::vector<double> sd;
};

inline RegretCurve aggregate_regret(const ExperimentResult& r) {
    RegretCurve c;
    if (r.trials.empty()) return c;
    const std::size_t T = r.trials.front().cum_regret.size();
    c.mean.resize(T);
    c.sd.resize(T);
    std::vector<double> col(r.trials.size());
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t i = 0; i < r.trials.size(); ++i) col[i] = r.trials[i].cum_regret[t];
        c.mean[t] = mean_of(col);
        c.sd[t] = sd_of(col);
    }
    return c;
}

inline double value_coverage(const ExperimentResult& r) {
    double hits = 0.0;
    for (const auto& tr : r.trials) hits += tr.report && tr.report->value.ci.contains(r.oracle_value) ? 1.0 : 0.0;
    return r.trials.empty() ? 0.0 : hits / static_cast<double>(r.trials.size());
}

// ---------------------------------------------------------------------------
// Offline replay

struct ReplayResult {
    TrajectoryLog log;
    LearnerState state;
    HTConfig ht;
    InferenceReport report;
    std::vector<double> cum_regret;  // cumulative count of incorrect picks
    double fraction_correct = 0.0;
};

/// Runs the bandit loop over a labelled dataset in file order with 0/1 rewards.
inline ReplayResult run_replay(const std::vector<ReplayRow>& data, std::size_t d, std::size_t K,
                               const ExplorationSchedule& sched, const LearnerSettings& ls,
                               const InferenceOptions& inf, std::uint64_t seed) {
    sched.validate();
    if (data.empty()) throw ConfigError("replay: empty dataset");
    if (K < 2) throw ConfigError("replay: K must be at least 2");
    if (inf.method == Method::ipw && K != 2) throw UnsupportedMethod("IPW inference is defined for K = 2 only");
    std::vector<Vector> contexts;
    contexts.reserve(data.size());
    for (const auto& row : data) {
        if (static_cast<std::size_t>(row.x.size()) != d) throw DimensionMismatch("replay: row length != d");
        if (row.optimal_label >= K) throw ConfigError("replay: label out of range");
        contexts.push_back(row.x);
    }
    ReplayResult rr;
    rr.ht = resolve_ht_config(ls, inf.s0, K, d, contexts);
    rr.state = LearnerState::init(K, d, weighting_for(inf.method));
    rr.log = TrajectoryLog(K, d);
    Rng rng(derive_seed(seed, kDecisionStream));
    double wrong = 0.0;
    for (std::size_t t = 1; t <= data.size(); ++t) {
        const auto& row = data[t - 1];
        const double eps = epsilon_at(sched, t);
        const PropensityVector pv = propensities(rr.state.estimates(), row.x, eps);
        const std::size_t a = forced_arm(sched, t, K).value_or(sample_action(pv, rng));
        const double y = replay_reward(row, a);
        step(rr.state, row.x, pv, a, y, rr.ht);
        wrong += 1.0 - y;
        rr.cum_regret.push_back(wrong);
        LogRow lr;
        lr.t = t;
        lr.x = row.x;
        lr.eps = eps;
        lr.pv = pv.probs;
        lr.a = a;
        lr.y = y;
        lr.optimal_arm = row.optimal_label;
        lr.regret = 1.0 - y;
        rr.log.append(std::move(lr));
    }
    rr.fraction_correct = 1.0 - wrong / static_cast<double>(data.size());
    rr.report = infer(rr.log, rr.state, inf);
    return rr;
}

// ---------------------------------------------------------------------------
// Export

namespace detail {

inline void write_file(const std::filesystem::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + p.string());
    out << content;
    out.close();
    if (!out) throw IoError("write failed: " + p.string());
}

inline void ensure_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

inline std::string csv_num(double v) { return fmt_double(v); }

inline const char* mode_name(ExplorationMode m) {
    switch (m) {
        case ExplorationMode::epsilon_greedy: return "epsilon_greedy";
        case ExplorationMode::exploration_free: return "exploration_free";
        case ExplorationMode::forced_roundrobin_then_greedy: return "forced_roundrobin_then_greedy";
    }
    return "";
}

}  // namespace detail

inline nlohmann::json summarize(const ExperimentResult& r) {
    nlohmann::json j;
    j["n_trials"] = r.n_trials();
    j["method"] = to_string(r.inference.method);
    j["level"] = r.inference.level;
    j["T"] = r.scenario.T;
    j["d"] = r.scenario.d;
    j["K"] = r.scenario.K;
    j["s0"] = r.scenario.s0;
    j["seed"] = r.scenario.seed;
    j["schedule"] = {{"mode", detail::mode_name(r.schedule.mode)},
                     {"c_eps", r.schedule.c_eps},
                     {"gamma", r.schedule.gamma},
                     {"warmup_steps", r.schedule.warmup_steps}};
    const auto regret = aggregate_regret(r);
    if (!regret.mean.empty()) {
        j["final_mean_cum_regret"] = regret.mean.back();
        j["final_sd_cum_regret"] = regret.sd.back();
    }
    const auto est = aggregate_estimates(r);
    if (!est.empty()) {
        double cov = 0.0, width = 0.0, cov_support = 0.0, n_support = 0.0;
        std::vector<double> per_arm_cov(r.scenario.K, 0.0), per_arm_width(r.scenario.K, 0.0);
        std::vector<double> per_arm_n(r.scenario.K, 0.0);
        for (const auto& e : est) {
            cov += e.coverage;
            width += e.mean_width;
            per_arm_cov[e.arm] += e.coverage;
            per_arm_width[e.arm] += e.mean_width;
            per_arm_n[e.arm] += 1.0;
            if (e.truth != 0.0) {
                cov_support += e.coverage;
                n_support += 1.0;
            }
        }
        const double n = static_cast<double>(est.size());
        j["coverage_mean"] = cov / n;
        j["ci_width_mean"] = width / n;
        if (n_support > 0) j["coverage_support_mean"] = cov_support / n_support;
        for (std::size_t i = 0; i < r.scenario.K; ++i) {
            j["per_arm"].push_back({{"arm", i},
                                    {"coverage_mean", per_arm_cov[i] / per_arm_n[i]},
                                    {"ci_width_mean", per_arm_width[i] / per_arm_n[i]}});
        }
        std::size_t unconverged = 0;
        double kkt = 0.0;
        for (const auto& t : r.trials) {
            unconverged += t.report->decorr_converged ? 0 : 1;
            kkt = std::max(kkt, t.report->max_kkt_excess);
        }
        j["decorr_unconverged_trials"] = unconverged;
        j["decorr_max_kkt_excess"] = kkt;
        const auto diffs = aggregate_diffs(r);
        double rej = 0.0;
        for (const auto& dg : diffs) rej += dg.reject_rate;
        if (!diffs.empty()) j["diff_reject_rate_mean"] = rej / static_cast<double>(diffs.size());
        std::vector<double> v_hat, v_width;
        for (const auto& t : r.trials) {
            v_hat.push_back(t.report->value.v_hat);
            v_width.push_back(t.report->value.ci.width());
        }
        j["value"] = {{"oracle_value", r.oracle_value},
                      {"mean_v_hat", mean_of(v_hat)},
                      {"mean_ci_width", mean_of(v_width)},
                      {"coverage", value_coverage(r)}};
    }
    return j;
}

/// Writes estimates.csv, diffs.csv, regret.csv, value.csv, summary.json and the
/// kept trial logs under out_dir. Output is a pure function of the result.
inline void export_result(const ExperimentResult& r, const std::filesystem::path& out_dir) {
    using detail::csv_num;
    detail::ensure_dir(out_dir);
    {
        std::ostringstream o;
        o << "arm,coord,truth,point_raw,point_debiased,se,ci_lo,ci_hi,covered\n";
        for (const auto& e : aggregate_estimates(r)) {
            o << e.arm << ',' << e.coord + 1 << ',' << csv_num(e.truth) << ',' << csv_num(e.mean_raw) << ','
              << csv_num(e.mean_point) << ',' << csv_num(e.mean_se) << ',' << csv_num(e.mean_ci_lo) << ','
              << csv_num(e.mean_ci_hi) << ',' << csv_num(e.coverage) << '\n';
        }
        detail::write_file(out_dir / "estimates.csv", o.str());
    }
    {
        std::ostringstream o;
        o << "coord,arm_a,arm_b,point,se,z,p\n";
        for (const auto& dg : aggregate_diffs(r)) {
            o << dg.coord + 1 << ',' << dg.arm_a << ',' << dg.arm_b << ',' << csv_num(dg.mean_point) << ','
              << csv_num(dg.mean_se) << ',' << csv_num(dg.mean_z) << ',' << csv_num(dg.mean_p) << '\n';
        }
        detail::write_file(out_dir / "diffs.csv", o.str());
    }
    {
        const auto c = aggregate_regret(r);
        std::ostringstream o;
        o << "t,mean_cum_regret,sd_cum_regret\n";
        for (std::size_t t = 0; t < c.mean.size(); ++t) {
            o << t + 1 << ',' << csv_num(c.mean[t]) << ',' << csv_num(c.sd[t]) << '\n';
        }
        detail::write_file(out_dir / "regret.csv", o.str());
    }
    {
        std::ostringstream o;
        o << "trial,v_hat,se,ci_lo,ci_hi,oracle_value,covered\n";
        for (std::size_t i = 0; i < r.trials.size(); ++i) {
            const auto& rep = r.trials[i].report;
            if (!rep) continue;
            const auto& v = rep->value;
            o << i << ',' << csv_num(v.v_hat) << ',' << csv_num(v.se) << ',' << csv_num(v.ci.lo) << ','
              << csv_num(v.ci.hi) << ',' << csv_num(r.oracle_value) << ',' << (v.ci.contains(r.oracle_value) ? 1 : 0)
              << '\n';
        }
        detail::write_file(out_dir / "value.csv", o.str());
    }
    detail::write_file(out_dir / "summary.json", summarize(r).dump(2) + "\n");
    if (!r.logs.empty()) {
        detail::ensure_dir(out_dir / "logs");
        for (std::size_t i = 0; i < r.logs.size(); ++i) {
            std::ostringstream o;
            write_log_csv(r.logs[i], o);
            detail::write_file(out_dir / "logs" / ("trial_" + std::to_string(i) + ".csv"), o.str());
        }
    }
}

/// Same schema for a single replay run (no ground truth; oracle value 1).
inline void export_replay(const ReplayResult& rr, const std::filesystem::path& out_dir) {
    using detail::csv_num;
    detail::ensure_dir(out_dir);
    const auto& rep = rr.report;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    {
        std::ostringstream o;
        o << "arm,coord,truth,point_raw,point_debiased,se,ci_lo,ci_hi,covered\n";
        for (const auto& e : rep.estimates) {
            o << e.arm << ',' << e.coord + 1 << ',' << csv_num(nan) << ',' << csv_num(e.raw) << ','
              << csv_num(e.point) << ',' << csv_num(e.se) << ',' << csv_num(e.ci_lo) << ',' << csv_num(e.ci_hi)
              << ',' << csv_num(nan) << '\n';
        }
        detail::write_file(out_dir / "estimates.csv", o.str());
    }
    {
        std::ostringstream o;
        o << "coord,arm_a,arm_b,point,se,z,p\n";
        for (const auto& dg : rep.diffs) {
            o << dg.coord + 1 << ',' << dg.arm_a << ',' << dg.arm_b << ',' << csv_num(dg.test.point) << ','
              << csv_num(dg.test.se) << ',' << csv_num(dg.test.z) << ',' << csv_num(dg.test.p) << '\n';
        }
        detail::write_file(out_dir / "diffs.csv", o.str());
    }
    {
        std::ostringstream o;
        o << "t,mean_cum_regret,sd_cum_regret\n";
        for (std::size_t t = 0; t < rr.cum_regret.size(); ++t) {
            o << t + 1 << ',' << csv_num(rr.cum_regret[t]) << ",0\n";
        }
        detail::write_file(out_dir / "regret.csv", o.str());
    }
    {
        std::ostringstream o;
        const auto& v = rep.value;
        o << "trial,v_hat,se,ci_lo,ci_hi,oracle_value,covered\n";
        o << 0 << ',' << csv_num(v.v_hat) << ',' << csv_num(v.se) << ',' << csv_num(v.ci.lo) << ','
          << csv_num(v.ci.hi) << ",1," << (v.ci.contains(1.0) ? 1 : 0) << '\n';
        detail::write_file(out_dir / "value.csv", o.str());
    }
    nlohmann::json j;
    j["method"] = to_string(rep.method);
    j["level"] = rep.level;
    j["T"] = rep.T;
    j["K"] = rep.K;
    j["fraction_correct"] = rr.fraction_correct;
    j["pulls"] = rr.state.count;
    j["sigma2_hat"] = rep.sigma2_hat;
    j["value"] = {{"v_hat", rep.value.v_hat}, {"se", rep.value.se}, {"ci_lo", rep.value.ci.lo}, {"ci_hi", rep.value.ci.hi}};
    double width = 0.0;
    std::size_t significant = 0;
    for (const auto& e : rep.estimates) {
        width += e.ci_hi - e.ci_lo;
        significant += e.p < 1.0 - rep.level ? 1 : 0;
    }
    j["ci_width_mean"] = rep.estimates.empty() ? 0.0 : width / static_cast<double>(rep.estimates.size());
    j["significant_coefficients"] = significant;
    j["decorr_converged"] = rep.decorr_converged;
    detail::write_file(out_dir / "summary.json", j.dump(2) + "\n");
    detail::ensure_dir(out_dir / "logs");
    std::ostringstream o;
    write_log_csv(rr.log, o);
    detail::write_file(out_dir / "logs" / "replay.csv", o.str());
}

}  // namespace sbinfer
