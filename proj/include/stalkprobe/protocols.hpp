#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "calibration.hpp"
#include "exchange.hpp"
#include "gripper.hpp"
#include "random.hpp"

namespace stalkprobe::harness {

// ---------------------------------------------------------------------------
// Bench replacement loop
// ---------------------------------------------------------------------------

struct ReplacementBench {
    int iterations = 50;
    double sigma_xy_mm = 0.0;
    int magazine_capacity = exchange::kDefaultMagazineCapacity;
};

struct ReplacementBenchResult {
    int iterations = 0;
    int successes = 0;
    int stuck_events = 0;
    int collision_aborts = 0;
};

/// Repeated unload + load cycles. The holder is restocked from the retrieval
/// box whenever it runs dry, so each sensor is cycled many times.
inline ReplacementBenchResult replacement_trial(const ReplacementBench& bench, const gripper::KinematicsConfig& kc,
                                                const exchange::FunnelConfig& funnel, exchange::ArmErrorModel arm,
                                                std::uint64_t seed, int retries = 1) {
    Rng rng(seed, 0xE1C4);
    arm.sigma_xy_mm = bench.sigma_xy_mm;
    auto magazine = exchange::make_magazine(bench.magazine_capacity, calibration::SensorResponseModel{}, rng);
    auto g = gripper::at_rest(kc);
    double clock = 0.0;
    ReplacementBenchResult out;
    out.iterations = bench.iterations;
    for (int i = 0; i < bench.iterations; ++i) {
        if (magazine.occupied() == 0) {
            for (std::size_t s = 0; s < magazine.slots.size() && !magazine.retrieval_box.empty(); ++s) {
                auto sensor = std::move(magazine.retrieval_box.front());
                magazine.retrieval_box.erase(magazine.retrieval_box.begin());
                sensor.location = calibration::Location::MagazineSlot;
                sensor.slot = static_cast<int>(s);
                magazine.slots[s] = std::move(sensor);
            }
        }
        const auto rec = exchange::replace_sequence(kc, g, magazine, funnel, arm, rng, clock, retries);
        out.successes += rec.success ? 1 : 0;
        out.stuck_events += rec.steps.front().stuck ? 1 : 0;
        const int attempts = rec.steps.back().attempts;
        out.collision_aborts += rec.success ? attempts - 1 : attempts;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Calibration campaign
// ---------------------------------------------------------------------------

/// Runs are assigned to sensors round-robin (run r uses sensor r mod
/// n_sensors). A sensor returning for another run has done
/// inserts_between_uses field insertions since its previous calibration.
struct CalibrationCampaign {
    int n_runs = 40;
    int n_sensors = 25;
    int inserts_between_uses = 10;
    int repetitions = 100;
};

struct CampaignRun {
    int run = 0;
    int sensor_id = 0;
    int insert_count = 0;
    calibration::CalibrationRecord record;
};

struct CampaignResult {
    std::vector<CampaignRun> runs;
    int passes = 0;
    std::array<int, 4> failures_per_quarter{};

    double pass_rate() const { return runs.empty() ? 0.0 : static_cast<double>(passes) / runs.size(); }
    int failures() const { return static_cast<int>(runs.size()) - passes; }
};

inline CampaignResult calibration_protocol(const CalibrationCampaign& campaign,
                                           const calibration::SensorResponseModel& model,
                                           const calibration::CalibrationStation& station, std::uint64_t seed) {
    require(campaign.n_runs > 0 && campaign.n_sensors > 0 && campaign.inserts_between_uses >= 0,
            ErrorKind::InvalidArgument, "campaign sizes must be positive");
    Rng rng(seed, 0xCA1B);
    std::vector<calibration::SensorUnit> sensors(static_cast<std::size_t>(campaign.n_sensors));
    for (int i = 0; i < campaign.n_sensors; ++i) {
        auto& s = sensors[static_cast<std::size_t>(i)];
        s.id = i;
        s.response = model;
        calibration::commission(s, rng);
    }
    std::vector<int> uses(sensors.size(), 0);
    double clock = 0.0;
    CampaignResult out;
    for (int r = 0; r < campaign.n_runs; ++r) {
        const auto idx = static_cast<std::size_t>(r % campaign.n_sensors);
        auto& sensor = sensors[idx];
        if (uses[idx]++ > 0)
            for (int k = 0; k < campaign.inserts_between_uses; ++k) calibration::wear_step(sensor, rng);
        CampaignRun run{r, sensor.id, sensor.insert_count, calibration::maintenance_sequence(sensor, station, rng, clock)};
        if (run.record.outcome == calibration::Outcome::Pass) {
            ++out.passes;
        } else {
            ++out.failures_per_quarter[static_cast<std::size_t>(4 * r / campaign.n_runs)];
        }
        out.runs.push_back(run);
    }
    return out;
}

struct CampaignSummary {
    int repetitions = 0;
    double mean_pass_rate = 0.0;
    std::array<long, 4> failures_per_quarter{};
    long failures = 0;

    /// Pooled over repetitions: Q4 failures / all failures.
    double fourth_quarter_share() const {
        return failures == 0 ? 0.0 : static_cast<double>(failures_per_quarter[3]) / static_cast<double>(failures);
    }
};

/// Repetition i uses seed + i.
inline CampaignSummary repeat_calibration_protocol(const CalibrationCampaign& campaign,
                                                   const calibration::SensorResponseModel& model,
                                                   const calibration::CalibrationStation& station,
                                                   std::uint64_t seed) {
    CampaignSummary s;
    s.repetitions = campaign.repetitions;
    for (int i = 0; i < campaign.repetitions; ++i) {
        const auto r = calibration_protocol(campaign, model, station, seed + static_cast<std::uint64_t>(i));
        s.mean_pass_rate += r.pass_rate();
        for (std::size_t q = 0; q < 4; ++q) s.failures_per_quarter[q] += r.failures_per_quarter[q];
        s.failures += r.failures();
    }
    if (campaign.repetitions > 0) s.mean_pass_rate /= campaign.repetitions;
    return s;
}

} // namespace stalkprobe::harness
