#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "sbinfer/config.hpp"
#include "sbinfer/harness.hpp"
#include "sbinfer/selftest.hpp"

namespace {

using namespace sbinfer;
using Clock = std::chrono::steady_clock;

void write_timing(const std::filesystem::path& out, double seconds, std::size_t trials) {
    nlohmann::json t{{"runtime_seconds", seconds}, {"trials", trials}};
    detail::write_file(out / "timing.json", t.dump(2) + "\n");
}

struct SimulateArgs {
    std::string config;
    std::optional<std::size_t> trials;
    std::optional<double> gamma;
    bool exploration_free = false;
    std::optional<std::string> method;
    std::string out = "sbinfer_out";
    std::optional<std::size_t> workers;
    std::optional<std::size_t> keep_logs;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> coords;
};

int simulate(const SimulateArgs& a) {
    RunConfig cfg = a.config.empty() ? parse_config(nlohmann::json(nullptr)) : load_config(a.config);
    if (a.trials) cfg.experiment.n_trials = *a.trials;
    if (a.workers) cfg.experiment.workers = *a.workers;
    if (a.keep_logs) cfg.experiment.keep_logs = *a.keep_logs;
    if (a.seed) cfg.scenario.seed = *a.seed;
    if (a.coords) cfg.inference.coord_limit = *a.coords;
    if (a.gamma) {
        cfg.schedule.mode = ExplorationMode::epsilon_greedy;
        cfg.schedule.gamma = *a.gamma;
    }
    if (a.exploration_free) cfg.schedule.mode = ExplorationMode::exploration_free;
    if (a.method) cfg.method = detail::parse_method(*a.method);
    cfg.resolve();

    const auto start = Clock::now();
    const ExperimentResult r = run_experiment(cfg.scenario, cfg.schedule, cfg.learner, cfg.inference, cfg.experiment);
    const double secs = std::chrono::duration<double>(Clock::now() - start).count();

    const std::filesystem::path out(a.out);
    export_result(r, out);
    detail::write_file(out / "config.json", to_json(cfg).dump(2) + "\n");
    write_timing(out, secs, r.n_trials());

    const auto s = summarize(r);
    std::cout << "trials " << r.n_trials() << ", method " << to_string(cfg.inference.method) << ", mode "
              << detail::mode_name(cfg.schedule.mode) << '\n';
    if (s.contains("coverage_mean")) {
        std::cout << "mean coverage " << s["coverage_mean"].get<double>() << ", mean CI width "
                  << s["ci_width_mean"].get<double>() << '\n';
    }
    if (s.contains("final_mean_cum_regret")) {
        std::cout << "mean cumulative regret at T " << s["final_mean_cum_regret"].get<double>() << '\n';
    }
    std::cout << "wrote " << out.string() << " in " << secs << " s\n";
    return 0;
}

struct ReplayArgs {
    std::string data;
    std::size_t d = 0;
    std::size_t arms = 2;
    std::string config;
    std::string out = "sbinfer_replay";
};

int replay(const ReplayArgs& a) {
    RunConfig cfg = a.config.empty() ? parse_config(nlohmann::json(nullptr)) : load_config(a.config);
    cfg.scenario.d = a.d;
    cfg.scenario.K = a.arms;
    cfg.scenario.noise_sd.assign(a.arms, 0.5);
    cfg.resolve();
    const auto rows = load_replay(a.data, a.d, a.arms);
    const auto start = Clock::now();
    const ReplayResult rr =
        run_replay(rows, a.d, a.arms, cfg.schedule, cfg.learner, cfg.inference, cfg.scenario.seed);
    const double secs = std::chrono::duration<double>(Clock::now() - start).count();
    const std::filesystem::path out(a.out);
    export_replay(rr, out);
    detail::write_file(out / "config.json", to_json(cfg).dump(2) + "\n");
    write_timing(out, secs, 1);
    std::cout << "rows " << rows.size() << ", fraction correct " << rr.fraction_correct << ", V_hat "
              << rr.report.value.v_hat << " [" << rr.report.value.ci.lo << ", " << rr.report.value.ci.hi << "]\n";
    std::cout << "wrote " << out.string() << '\n';
    return 0;
}

int run_selftest() {
    bool ok = true;
    for (const auto& c : selftest::run_all()) {
        std::cout << (c.pass ? "PASS " : "FAIL ") << c.name;
        if (!c.detail.empty()) std::cout << " (" << c.detail << ')';
        std::cout << '\n';
        ok = ok && c.pass;
    }
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sparse linear contextual bandits: simulation, debiased inference, replay"};
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* s = app.add_subcommand("simulate", "Run replicated trials and export aggregates");
    s->add_option("--config", sim.config, "JSON configuration file")->check(CLI::ExistingFile);
    s->add_option("--trials", sim.trials, "Number of trials");
    auto* g = s->add_option("--gamma", sim.gamma, "Epsilon-greedy decay exponent");
    auto* ef = s->add_flag("--exploration-free", sim.exploration_free, "Pure greedy, epsilon = 0");
    g->excludes(ef);
    ef->excludes(g);
    s->add_option("--method", sim.method, "Debiasing method")->check(CLI::IsMember({"ipw", "aw"}));
    s->add_option("--out", sim.out, "Output directory");
    s->add_option("--workers", sim.workers, "Worker threads");
    s->add_option("--keep-logs", sim.keep_logs, "Persist logs of the first N trials");
    s->add_option("--seed", sim.seed, "Master seed (overrides the config)");
    s->add_option("--coords", sim.coords, "Infer only the first N coordinates (0: all)");

    ReplayArgs rep;
    auto* r = app.add_subcommand("replay", "Run the bandit over a labelled dataset");
    r->add_option("--data", rep.data, "CSV with header x1..xd,label")->required()->check(CLI::ExistingFile);
    r->add_option("--d", rep.d, "Covariate dimension")->required();
    r->add_option("--arms", rep.arms, "Number of arms")->required();
    r->add_option("--config", rep.config, "JSON configuration file")->check(CLI::ExistingFile);
    r->add_option("--out", rep.out, "Output directory");

    auto* t = app.add_subcommand("selftest", "Run the oracle-equivalence property suite");

    CLI11_PARSE(app, argc, argv);
    try {
        if (s->parsed()) return simulate(sim);
        if (r->parsed()) return replay(rep);
        if (t->parsed()) return run_selftest();
    } catch (const sbinfer::ParseError& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return 2;
    } catch (const sbinfer::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
