// Command-line front end: simulation batches, analyses and report replay.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "stalkprobe/stalkprobe.hpp"

namespace fs = std::filesystem;
namespace h = stalkprobe::harness;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitThreshold = 3;

struct Globals {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir = "out";
    std::optional<long> trials;
    bool check = false;
    unsigned threads = h::default_threads();
};

h::ExperimentConfig resolve(const Globals& g) {
    h::ExperimentConfig cfg = g.config_path.empty() ? h::ExperimentConfig{} : h::load_config(g.config_path);
    if (g.seed) cfg.base_seed = *g.seed;
    cfg.out_dir = g.out_dir;
    return cfg;
}

void print_rate(const char* name, const h::Rate& r) {
    std::printf("  %-22s %6ld / %-6ld %.4f  [%.4f, %.4f]\n", name, r.successes, r.trials, r.rate, r.wilson.lo,
                r.wilson.hi);
}

void print_summary(const h::ExperimentResult& r, const std::vector<h::Check>& checks) {
    const auto& f = r.funnel;
    std::printf("trials: %ld\n", f.n_trials);
    std::printf("cumulative:\n");
    print_rate("detect", f.detect);
    print_rate("grasp", f.grasp);
    print_rate("insert", f.insert);
    print_rate("depth", f.depth);
    print_rate("pith", f.pith);
    std::printf("conditional:\n");
    print_rate("grasp|detect", f.grasp_given_detect);
    print_rate("insert|grasp", f.insert_given_grasp);
    print_rate("depth|insert", f.depth_given_insert);
    print_rate("pith|depth", f.pith_given_depth);
    print_rate("within 45 deg", f.within_45deg);
    std::printf("calibration protocol: pass %.4f, fourth-quarter share %.4f (%d repetitions)\n",
                r.campaign.mean_pass_rate, r.campaign.fourth_quarter_share(), r.campaign.repetitions);
    std::printf("replacement bench: %d / %d\n", r.replacement.successes, r.replacement.iterations);
    std::printf("checks:\n");
    for (const auto& c : checks)
        std::printf("  %-30s %.4f  target %.4f +- %.2f  %s\n", c.name.c_str(), c.value, c.target, c.tolerance,
                    c.pass() ? "ok" : "FAIL");
}

int run_simulation(h::ExperimentConfig cfg, const Globals& g, const std::string& original_report = {}) {
    if (g.trials) {
        const long per = std::max(1, cfg.model.mission.n_stalks);
        cfg.n_missions = static_cast<int>((*g.trials + per - 1) / per);
        h::validate(cfg);
    }
    const auto result = h::run_experiments(cfg, g.threads);
    const fs::path dir = g.out_dir;
    h::write_outputs(dir, cfg, result);
    const auto checks = h::threshold_checks(result);
    print_summary(result, checks);
    std::printf("wrote %s\n", (dir / "report.json").string().c_str());

    if (!original_report.empty()) {
        std::ifstream in(dir / "report.json", std::ios::binary);
        std::stringstream fresh;
        fresh << in.rdbuf();
        if (fresh.str() != original_report) {
            std::fprintf(stderr, "replay: report differs from the original\n");
            return kExitFailure;
        }
        std::printf("replay: report identical\n");
    }
    if (g.check && !h::all_pass(checks)) {
        std::fprintf(stderr, "threshold check failed\n");
        return kExitThreshold;
    }
    return kExitOk;
}

int run_replay(const std::string& report_path, Globals g) {
    std::ifstream in(report_path, std::ios::binary);
    if (!in) throw h::ConfigError("cannot open report '" + report_path + "'");
    std::stringstream text;
    text << in.rdbuf();
    h::json report;
    try {
        report = h::json::parse(text.str());
    } catch (const h::json::exception& e) {
        throw h::ConfigError(report_path + ": " + e.what());
    }
    if (!report.contains("config")) throw h::ConfigError(report_path + ": no embedded config");
    auto cfg = h::config_from_json(report.at("config"));
    cfg.out_dir = g.out_dir;
    if (fs::exists(g.out_dir) && fs::equivalent(fs::path(g.out_dir) / "report.json", report_path))
        throw h::ConfigError("replay output would overwrite the report being replayed; pass --out-dir");
    g.trials.reset();
    return run_simulation(cfg, g, text.str());
}

int run_funnel_analysis(const h::ExperimentConfig& cfg, const Globals& g) {
    const long samples = g.trials.value_or(100000);
    std::vector<double> sigmas;
    for (int k = 0; k <= 16; ++k) sigmas.push_back(0.25 * k);
    for (double s : {5.0, 6.0, 8.0}) sigmas.push_back(s);
    const auto rows = h::funnel_analysis(cfg, sigmas, samples, cfg.base_seed);
    fs::create_directories(g.out_dir);
    h::write_text(fs::path(g.out_dir) / "funnel_analysis.csv", h::funnel_analysis_csv(rows));
    const auto tol = stalkprobe::exchange::capture_tolerance(cfg.model.funnel);
    std::printf("capture window +-%.4f x +-%.4f mm, %ld samples per sigma\n", tol.x_mm, tol.y_mm, samples);
    std::printf("%8s %10s %10s %8s %10s\n", "sigma", "analytic", "simulated", "z", "bench");
    int worst = 0;
    for (const auto& r : rows) {
        const double z = r.stderr_p > 0 ? (r.simulated_p - r.analytic_p) / r.stderr_p : 0.0;
        worst += std::abs(z) > 3.0 ? 1 : 0;
        std::printf("%8.3f %10.6f %10.6f %8.3f %10.4f\n", r.sigma_mm, r.analytic_p, r.simulated_p, z,
                    r.replacement_success);
    }
    std::printf("wrote %s\n", (fs::path(g.out_dir) / "funnel_analysis.csv").string().c_str());
    return g.check && worst > 0 ? kExitThreshold : kExitOk;
}

int run_sweep_analysis(const h::ExperimentConfig& cfg, const Globals& g) {
    const int n = static_cast<int>(g.trials.value_or(10000));
    const auto rows = h::sweep_analysis(cfg, n, cfg.base_seed);
    fs::create_directories(g.out_dir);
    h::write_text(fs::path(g.out_dir) / "sweep_analysis.csv", h::sweep_analysis_csv(rows));
    std::printf("%d stalks, within 45 deg of optimal: %.4f\n", n, h::within_fraction(rows));
    std::printf("wrote %s\n", (fs::path(g.out_dir) / "sweep_analysis.csv").string().c_str());
    return kExitOk;
}

int run_calib_analysis(h::ExperimentConfig cfg, const Globals& g) {
    if (g.trials) cfg.campaign.repetitions = static_cast<int>(*g.trials);
    const auto one = h::calibration_protocol(cfg.campaign, cfg.model.response, cfg.model.station, cfg.base_seed);
    const auto summary = h::repeat_calibration_protocol(cfg.campaign, cfg.model.response, cfg.model.station,
                                                        cfg.base_seed);
    fs::create_directories(g.out_dir);
    h::write_text(fs::path(g.out_dir) / "calib_analysis.csv", h::calibration_runs_csv(one));
    h::json j{{"single_run", {{"seed", cfg.base_seed}, {"passes", one.passes}, {"runs", one.runs.size()}}},
              {"summary", h::to_json(summary)}};
    h::write_text(fs::path(g.out_dir) / "calib_summary.json", j.dump(2) + "\n");
    std::printf("single protocol: %d / %zu passed\n", one.passes, one.runs.size());
    std::printf("%d repetitions: mean pass %.4f, failures per quarter %ld %ld %ld %ld, fourth-quarter share %.4f\n",
                summary.repetitions, summary.mean_pass_rate, summary.failures_per_quarter[0],
                summary.failures_per_quarter[1], summary.failures_per_quarter[2], summary.failures_per_quarter[3],
                summary.fourth_quarter_share());
    std::printf("wrote %s\n", (fs::path(g.out_dir) / "calib_analysis.csv").string().c_str());
    h::CampaignTarget t;
    const bool ok = std::abs(summary.mean_pass_rate - t.pass_rate) <= t.pass_rate_tolerance &&
                    std::abs(summary.fourth_quarter_share() - t.fourth_quarter_share) <= t.fourth_quarter_tolerance;
    return g.check && !ok ? kExitThreshold : kExitOk;
}

int run_kinematics(const h::ExperimentConfig& cfg, const Globals& g, double step) {
    fs::create_directories(g.out_dir);
    const auto path = fs::path(g.out_dir) / "kinematics.csv";
    h::write_text(path, stalkprobe::gripper::kinematics_csv(cfg.model.kinematics, step));
    std::printf("wrote %s\n", path.string().c_str());
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"stalkprobe: cornstalk sensor-insertion simulator"};
    app.require_subcommand(1);
    Globals g;
    long trials = 0;
    std::uint64_t seed = 0;
    app.add_option("--config", g.config_path, "scenario config file")->check(CLI::ExistingFile);
    auto* seed_opt = app.add_option("--seed", seed, "base seed override");
    app.add_option("--out-dir", g.out_dir, "output directory")->capture_default_str();
    auto* trials_opt = app.add_option("--trials", trials, "trial / sample count")->check(CLI::PositiveNumber);
    app.add_flag("--check", g.check, "exit 3 when acceptance thresholds fail");
    app.add_option("--threads", g.threads, "worker threads")->check(CLI::PositiveNumber);

    auto* simulate = app.add_subcommand("simulate", "run mission batches and write report/trials/events");
    auto* funnel = app.add_subcommand("funnel-analysis", "funnel capture probability vs arm noise");
    auto* sweep = app.add_subcommand("sweep-analysis", "multi-view sweep angle error");
    auto* calib = app.add_subcommand("calib-analysis", "calibration protocol runs");
    auto* replay = app.add_subcommand("replay", "re-run from a report's embedded config and compare");
    std::string report_path;
    replay->add_option("report", report_path, "report.json to replay")->required()->check(CLI::ExistingFile);
    auto* kin = app.add_subcommand("kinematics", "gripper kinematics curve");
    double step = 0.5;
    kin->add_option("--step", step, "extension step in mm")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }
    if (*seed_opt) g.seed = seed;
    if (*trials_opt) g.trials = trials;

    try {
        if (*replay) return run_replay(report_path, g);
        const auto cfg = resolve(g);
        if (*simulate) return run_simulation(cfg, g);
        if (*funnel) return run_funnel_analysis(cfg, g);
        if (*sweep) return run_sweep_analysis(cfg, g);
        if (*calib) return run_calib_analysis(cfg, g);
        if (*kin) return run_kinematics(cfg, g, step);
    } catch (const stalkprobe::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return e.kind() == stalkprobe::ErrorKind::Config ? kExitConfig : kExitFailure;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitFailure;
    }
    return kExitOk;
}
