#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "config.hpp"
#include "exchange.hpp"
#include "mission.hpp"
#include "perception.hpp"
#include "protocols.hpp"
#include "stats.hpp"

namespace stalkprobe::harness {

// ---------------------------------------------------------------------------
// Targets
// ---------------------------------------------------------------------------

struct FunnelTarget {
    double detect = 29.0 / 30.0;
    double grasp = 29.0 / 30.0;
    double insert = 23.0 / 30.0;
    double depth = 19.0 / 30.0;
    double pith = 16.0 / 30.0;
    double within_45deg = 0.565;
    double rate_tolerance = 0.05;
    double within_45deg_tolerance = 0.10;
};

struct CampaignTarget {
    double pass_rate = 0.625;
    double pass_rate_tolerance = 0.05;
    double fourth_quarter_share = 0.47;
    double fourth_quarter_tolerance = 0.10;
};

struct Check {
    std::string name;
    double value = 0.0;
    double target = 0.0;
    double tolerance = 0.0;

    bool pass() const { return std::abs(value - target) <= tolerance; }
};

// ---------------------------------------------------------------------------
// Batch runner
// ---------------------------------------------------------------------------

struct MissionRun {
    int index = 0;
    std::uint64_t seed = 0;
    mission::MissionResult result;
};

struct ExperimentResult {
    std::vector<MissionRun> missions;
    FunnelStats funnel;
    CampaignSummary campaign;
    ReplacementBenchResult replacement;
};

/// Runs `n` jobs on up to `threads` workers; job i writes only slot i.
template <class Job>
void parallel_for(int n, unsigned threads, Job job) {
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max(n, 1))));
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (int i = next++; i < n; i = next++) {
            try {
                job(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

inline unsigned default_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

inline std::vector<MissionRun> run_missions(const ExperimentConfig& cfg, unsigned threads = default_threads()) {
    std::vector<MissionRun> runs(static_cast<std::size_t>(cfg.n_missions));
    parallel_for(cfg.n_missions, threads, [&](int i) {
        const std::uint64_t seed = cfg.base_seed + static_cast<std::uint64_t>(i);
        const auto field = mission::mission_field(cfg.model, seed);
        runs[static_cast<std::size_t>(i)] = {i, seed, mission::run_mission(field, cfg.model, seed)};
    });
    return runs;
}

inline std::vector<mission::TrialRecord> all_trials(const std::vector<MissionRun>& runs) {
    std::vector<mission::TrialRecord> out;
    for (const auto& r : runs) out.insert(out.end(), r.result.trials.begin(), r.result.trials.end());
    return out;
}

inline ExperimentResult run_experiments(const ExperimentConfig& cfg, unsigned threads = default_threads()) {
    validate(cfg);
    ExperimentResult r;
    r.missions = run_missions(cfg, threads);
    r.funnel = funnel_stats(all_trials(r.missions));
    r.campaign = repeat_calibration_protocol(cfg.campaign, cfg.model.response, cfg.model.station, cfg.base_seed);
    r.replacement = replacement_trial(cfg.replacement, cfg.model.kinematics, cfg.model.funnel, cfg.model.arm,
                                      cfg.base_seed, cfg.model.mission.load_retries);
    return r;
}

inline std::vector<Check> threshold_checks(const ExperimentResult& r, const FunnelTarget& f = {},
                                           const CampaignTarget& c = {}) {
    return {
        {"detect_rate", r.funnel.detect.rate, f.detect, f.rate_tolerance},
        {"grasp_rate", r.funnel.grasp.rate, f.grasp, f.rate_tolerance},
        {"insert_rate", r.funnel.insert.rate, f.insert, f.rate_tolerance},
        {"depth_rate", r.funnel.depth.rate, f.depth, f.rate_tolerance},
        {"pith_rate", r.funnel.pith.rate, f.pith, f.rate_tolerance},
        {"within_45deg_fraction", r.funnel.within_45deg.rate, f.within_45deg, f.within_45deg_tolerance},
        {"calibration_pass_rate", r.campaign.mean_pass_rate, c.pass_rate, c.pass_rate_tolerance},
        {"fourth_quarter_failure_share", r.campaign.fourth_quarter_share(), c.fourth_quarter_share,
         c.fourth_quarter_tolerance},
    };
}

inline bool all_pass(const std::vector<Check>& checks) {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass(); });
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline std::string fixed(double v, int digits = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

inline std::string opt_cell(const std::optional<double>& v) { return v ? fixed(*v) : std::string{}; }

inline json to_json(const CampaignSummary& s) {
    json q = json::array();
    for (long f : s.failures_per_quarter) q.push_back(f);
    return json{{"repetitions", s.repetitions},
                {"mean_pass_rate", s.mean_pass_rate},
                {"failures", s.failures},
                {"failures_per_quarter", q},
                {"fourth_quarter_share", s.fourth_quarter_share()}};
}

inline json to_json(const ReplacementBenchResult& r) {
    return json{{"iterations", r.iterations},
                {"successes", r.successes},
                {"success_rate", r.iterations ? static_cast<double>(r.successes) / r.iterations : 0.0},
                {"stuck_events", r.stuck_events},
                {"collision_aborts", r.collision_aborts}};
}

inline json to_json(const std::vector<Check>& checks) {
    json out = json::array();
    for (const auto& c : checks)
        out.push_back({{"name", c.name},
                       {"value", c.value},
                       {"target", c.target},
                       {"tolerance", c.tolerance},
                       {"pass", c.pass()}});
    return out;
}

inline json mission_summary(const std::vector<MissionRun>& runs) {
    long trials = 0, replacements = 0, exhausted = 0, calibrations = 0, calib_pass = 0, uncalibrated = 0;
    double duration = 0.0;
    for (const auto& m : runs) {
        trials += static_cast<long>(m.result.trials.size());
        replacements += m.result.replacements_attempted;
        exhausted += m.result.magazine_exhausted ? 1 : 0;
        duration += m.result.duration_s;
        for (const auto& c : m.result.calibrations) {
            ++calibrations;
            calib_pass += c.outcome == calibration::Outcome::Pass ? 1 : 0;
        }
        for (const auto& t : m.result.trials)
            uncalibrated += t.inserted && t.reading_flag == mission::ReadingFlag::Uncalibrated ? 1 : 0;
    }
    const double n = runs.empty() ? 1.0 : static_cast<double>(runs.size());
    return json{{"missions", runs.size()},
                {"trials", trials},
                {"replacements_attempted", replacements},
                {"missions_magazine_exhausted", exhausted},
                {"calibrations", calibrations},
                {"calibrations_passed", calib_pass},
                {"uncalibrated_readings", uncalibrated},
                {"mean_mission_duration_s", duration / n}};
}

/// Deterministic report: contains no timestamps or host details.
inline json report_json(const ExperimentConfig& cfg, const ExperimentResult& r) {
    json j;
    j["scenario"] = cfg.scenario;
    j["base_seed"] = cfg.base_seed;
    j["funnel"] = to_json(r.funnel);
    j["missions"] = mission_summary(r.missions);
    j["calibration_protocol"] = to_json(r.campaign);
    j["replacement_bench"] = to_json(r.replacement);
    j["checks"] = to_json(threshold_checks(r));
    j["config"] = config_to_json(cfg);
    return j;
}

inline std::string trials_csv(const std::vector<MissionRun>& runs) {
    std::ostringstream os;
    os << "mission,seed,trial,stalk_id,detected,grasped,inserted,depth_ok,in_pith,chosen_angle_deg,"
          "angle_error_deg,achieved_depth_mm,insertion_height_cm,lateral_offset_mm,nitrate_true_ppm,"
          "nitrate_est_ppm,reading_flag,sensor_id,failed_stage,failure_reason\n";
    for (const auto& m : runs) {
        for (const auto& t : m.result.trials) {
            os << m.index << ',' << m.seed << ',' << t.trial << ',' << t.stalk_id << ',' << t.detected << ','
               << t.grasped << ',' << t.inserted << ',' << t.depth_ok << ',' << t.in_pith << ','
               << opt_cell(t.chosen_angle_deg) << ',' << opt_cell(t.angle_error_deg) << ','
               << fixed(t.achieved_depth_mm) << ',' << opt_cell(t.insertion_height_cm) << ','
               << opt_cell(t.lateral_offset_mm) << ',' << opt_cell(t.nitrate_true_ppm) << ','
               << opt_cell(t.nitrate_est_ppm) << ',' << mission::to_string(t.reading_flag) << ','
               << (t.sensor_id ? std::to_string(*t.sensor_id) : std::string{}) << ','
               << (t.failed_stage ? std::string(mission::to_string(*t.failed_stage)) : std::string{}) << ','
               << t.failure_reason << '\n';
        }
    }
    return os.str();
}

inline void write_events_jsonl(std::ostream& os, const std::vector<MissionRun>& runs) {
    for (const auto& m : runs) {
        for (const auto& e : m.result.log) {
            json line;
            line["mission"] = m.index;
            const json body = mission::to_json(e);
            for (const auto& [k, v] : body.items()) line[k] = v;
            os << line.dump() << '\n';
        }
    }
}

inline std::string termination(const mission::MissionResult& r, int n_stalks) {
    if (r.magazine_exhausted) return "magazine_empty";
    return static_cast<int>(r.trials.size()) >= n_stalks ? "complete" : "field_exhausted";
}

/// One summary line per mission.
inline void write_missions_jsonl(std::ostream& os, const std::vector<MissionRun>& runs, int n_stalks) {
    for (const auto& m : runs) {
        long passed = 0;
        for (const auto& c : m.result.calibrations) passed += c.outcome == calibration::Outcome::Pass ? 1 : 0;
        json line{{"mission", m.index},
                  {"seed", m.seed},
                  {"trials", m.result.trials.size()},
                  {"termination", termination(m.result, n_stalks)},
                  {"replacements_attempted", m.result.replacements_attempted},
                  {"calibrations", m.result.calibrations.size()},
                  {"calibrations_passed", passed},
                  {"duration_s", m.result.duration_s}};
        os << line.dump() << '\n';
    }
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::InvalidArgument, "cannot write '" + path.string() + "'");
    out << text;
}

inline std::string report_text(const json& report) { return report.dump(2) + "\n"; }

/// Writes report.json, trials.csv, missions.jsonl and events.jsonl into `dir`.
inline void write_outputs(const std::filesystem::path& dir, const ExperimentConfig& cfg, const ExperimentResult& r) {
    std::filesystem::create_directories(dir);
    write_text(dir / "report.json", report_text(report_json(cfg, r)));
    write_text(dir / "trials.csv", trials_csv(r.missions));
    std::ofstream missions(dir / "missions.jsonl", std::ios::binary);
    write_missions_jsonl(missions, r.missions, cfg.model.mission.n_stalks);
    std::ofstream events(dir / "events.jsonl", std::ios::binary);
    write_events_jsonl(events, r.missions);
}

// ---------------------------------------------------------------------------
// Analyses
// ---------------------------------------------------------------------------

struct FunnelAnalysisRow {
    double sigma_mm = 0.0;
    double analytic_p = 0.0;
    double simulated_p = 0.0;
    double stderr_p = 0.0;
    double replacement_success = 0.0;
};

/// Capture probability against arm placement noise: closed form, Monte
/// Carlo with `samples` draws, and the bench replacement loop at that noise.
inline std::vector<FunnelAnalysisRow> funnel_analysis(const ExperimentConfig& cfg, const std::vector<double>& sigmas,
                                                      long samples, std::uint64_t seed) {
    require(samples > 0, ErrorKind::InvalidArgument, "samples must be positive");
    std::vector<FunnelAnalysisRow> rows(sigmas.size());
    parallel_for(static_cast<int>(sigmas.size()), default_threads(), [&](int i) {
        const double sigma = sigmas[static_cast<std::size_t>(i)];
        Rng rng(seed, 0xF00 + static_cast<std::uint64_t>(i));
        long hits = 0;
        for (long k = 0; k < samples; ++k)
            hits += exchange::funnel_capture(cfg.model.funnel, rng.normal(0.0, sigma), rng.normal(0.0, sigma)).captured;
        const double p = static_cast<double>(hits) / static_cast<double>(samples);
        auto bench = cfg.replacement;
        bench.sigma_xy_mm = sigma;
        const auto rep = replacement_trial(bench, cfg.model.kinematics, cfg.model.funnel, cfg.model.arm, seed,
                                           cfg.model.mission.load_retries);
        rows[static_cast<std::size_t>(i)] = {sigma, exchange::capture_probability(cfg.model.funnel, sigma), p,
                                             std::sqrt(p * (1.0 - p) / static_cast<double>(samples)),
                                             rep.iterations ? static_cast<double>(rep.successes) / rep.iterations
                                                            : 0.0};
    });
    return rows;
}

inline std::string funnel_analysis_csv(const std::vector<FunnelAnalysisRow>& rows) {
    std::ostringstream os;
    os << "sigma_mm,analytic_p,simulated_p,stderr,replacement_success_rate\n";
    for (const auto& r : rows)
        os << fixed(r.sigma_mm) << ',' << fixed(r.analytic_p) << ',' << fixed(r.simulated_p) << ','
           << fixed(r.stderr_p) << ',' << fixed(r.replacement_success) << '\n';
    return os.str();
}

struct SweepAnalysisRow {
    int trial = 0;
    double start_deg = 0.0;
    double chosen_deg = 0.0;
    double optimal_deg = 0.0;
    double error_deg = 0.0;
    bool degenerate = false;
};

/// Sweeps over freshly generated stalks, starting from the nominal heading
/// plus heading noise, as a mission approach does.
inline std::vector<SweepAnalysisRow> sweep_analysis(const ExperimentConfig& cfg, int n, std::uint64_t seed) {
    auto fc = cfg.model.field;
    fc.n_stalks = n;
    const auto field = geometry::generate_field(fc, seed);
    Rng rng(seed, 0x5E3E);
    std::vector<SweepAnalysisRow> rows;
    for (const auto& s : field.stalks) {
        auto plan = cfg.model.sweep;
        plan.start_angle_deg = geometry::normalize_half_turn(rng.normal(90.0, cfg.model.mission.heading_noise_sigma_deg));
        const auto res = perception::sweep_select(s, plan, cfg.model.detection, rng);
        const auto opt = geometry::optimal_view_angle(s.cross_section);
        rows.push_back({s.id, plan.start_angle_deg, res.chosen_angle_deg, opt.angle_deg,
                        perception::angle_error_to_optimal(res.chosen_angle_deg, s.cross_section), opt.degenerate});
    }
    return rows;
}

inline double within_fraction(const std::vector<SweepAnalysisRow>& rows, double limit_deg = 45.0) {
    if (rows.empty()) return 0.0;
    const auto k = std::count_if(rows.begin(), rows.end(), [&](const auto& r) { return r.error_deg <= limit_deg; });
    return static_cast<double>(k) / static_cast<double>(rows.size());
}

inline std::string sweep_analysis_csv(const std::vector<SweepAnalysisRow>& rows) {
    std::ostringstream os;
    os << "trial,start_deg,chosen_deg,optimal_deg,error_deg\n";
    double sum = 0.0;
    for (const auto& r : rows) {
        os << r.trial << ',' << fixed(r.start_deg) << ',' << fixed(r.chosen_deg) << ',' << fixed(r.optimal_deg) << ','
           << fixed(r.error_deg) << '\n';
        sum += r.error_deg;
    }
    os << "summary,within_45deg_fraction=" << fixed(within_fraction(rows)) << ",,mean_error_deg,"
       << fixed(rows.empty() ? 0.0 : sum / static_cast<double>(rows.size())) << '\n';
    return os.str();
}

inline std::string calibration_runs_csv(const CampaignResult& r) {
    std::ostringstream os;
    os << "run_index,sensor_id,insert_count,v_low,v_high,outcome\n";
    for (const auto& run : r.runs)
        os << run.run << ',' << run.sensor_id << ',' << run.insert_count << ',' << fixed(run.record.v_low, 9) << ','
           << fixed(run.record.v_high, 9) << ',' << calibration::to_string(run.record.outcome) << '\n';
    return os.str();
}

} // namespace stalkprobe::harness
