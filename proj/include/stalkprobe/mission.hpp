#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "calibration.hpp"
#include "error.hpp"
#include "exchange.hpp"
#include "geometry.hpp"
#include "gripper.hpp"
#include "perception.hpp"
#include "random.hpp"

namespace stalkprobe::mission {

using json = nlohmann::ordered_json;

struct MissionConfig {
    int replace_every = 5;
    double insertion_height_target_cm = 1.9;
    double height_noise_sigma_cm = 0.4;
    int n_stalks = 30;
    int magazine_capacity = 6;
    bool load_on_start = true;
    int load_retries = 1;
    double heading_noise_sigma_deg = 25.0;
    double sensor_slope_rel_sd = 0.15;
    double sensor_intercept_sd_v = 0.03;
};

/// Everything a single mission needs besides the field and the seed.
struct ScenarioConfig {
    geometry::FieldGenConfig field;
    geometry::SensorGeometry sensor;
    geometry::GradientConfig gradient;
    gripper::KinematicsConfig kinematics;
    exchange::FunnelConfig funnel;
    exchange::ArmErrorModel arm;
    exchange::ExchangeTiming exchange_timing;
    calibration::SensorResponseModel response;
    calibration::CalibrationStation station;
    perception::DetectionModel detection;
    perception::SelectionWeights weights;
    perception::SweepPlan sweep;
    MissionConfig mission;
};

inline void validate(const MissionConfig& m, const geometry::SensorGeometry& g) {
    require(m.replace_every >= 1, ErrorKind::InvalidArgument, "replace_every must be >= 1");
    require(g.insertion_height_band_cm.contains(m.insertion_height_target_cm), ErrorKind::InvalidArgument,
            "insertion height target must lie inside the height band");
    require(m.height_noise_sigma_cm >= 0.0 && m.heading_noise_sigma_deg >= 0.0, ErrorKind::InvalidArgument,
            "mission sigmas must be non-negative");
    require(m.n_stalks >= 0 && m.magazine_capacity >= 0 && m.load_retries >= 0, ErrorKind::InvalidArgument,
            "mission counts must be non-negative");
    require(m.sensor_slope_rel_sd >= 0.0 && m.sensor_intercept_sd_v >= 0.0, ErrorKind::InvalidArgument,
            "sensor spread must be non-negative");
}

inline void validate(const ScenarioConfig& c) {
    geometry::validate(c.field);
    geometry::validate(c.sensor);
    gripper::validate(c.kinematics, c.sensor.required_depth_mm);
    exchange::validate(c.funnel);
    exchange::validate(c.arm);
    calibration::validate(c.response);
    calibration::validate(c.station);
    perception::validate(c.detection);
    perception::validate(c.sweep);
    validate(c.mission, c.sensor);
}

// ---------------------------------------------------------------------------
// State machine vocabulary
// ---------------------------------------------------------------------------

enum class Stage {
    Stow,
    Scan,
    Select,
    Approach,
    Sweep,
    AlignInsert,
    Grasp,
    Insert,
    Read,
    Retract,
    Replace,
    Calibrate,
    AdvanceBase,
    Done,
    Failed,
};

constexpr std::string_view to_string(Stage s) {
    switch (s) {
    case Stage::Stow: return "Stow";
    case Stage::Scan: return "Scan";
    case Stage::Select: return "Select";
    case Stage::Approach: return "Approach";
    case Stage::Sweep: return "Sweep";
    case Stage::AlignInsert: return "AlignInsert";
    case Stage::Grasp: return "Grasp";
    case Stage::Insert: return "Insert";
    case Stage::Read: return "Read";
    case Stage::Retract: return "Retract";
    case Stage::Replace: return "Replace";
    case Stage::Calibrate: return "Calibrate";
    case Stage::AdvanceBase: return "AdvanceBase";
    case Stage::Done: return "Done";
    case Stage::Failed: return "Failed";
    }
    return "?";
}

struct MissionState {
    Stage stage = Stage::AdvanceBase;
    Stage failed_stage = Stage::Done; ///< meaningful when stage == Failed
    std::string reason;

    static MissionState at(Stage s) { return {s, Stage::Done, {}}; }
    static MissionState failed(Stage where, std::string why) { return {Stage::Failed, where, std::move(why)}; }
    bool terminal() const { return stage == Stage::Done; }
};

struct Event {
    long seq = 0;
    double time_s = 0.0;
    int trial = -1;
    Stage stage = Stage::Stow;
    std::string type;
    json detail = json::object();
};

inline json to_json(const Event& e) {
    json j;
    j["seq"] = e.seq;
    j["time_s"] = e.time_s;
    j["trial"] = e.trial;
    j["stage"] = std::string(to_string(e.stage));
    j["type"] = e.type;
    j["detail"] = e.detail;
    return j;
}

enum class ReadingFlag { Ok, Clamped, Uncalibrated };

constexpr std::string_view to_string(ReadingFlag f) {
    switch (f) {
    case ReadingFlag::Ok: return "ok";
    case ReadingFlag::Clamped: return "clamped";
    case ReadingFlag::Uncalibrated: return "uncalibrated";
    }
    return "?";
}

struct NitrateReading {
    double true_ppm = 0.0;
    std::optional<double> est_ppm;
    ReadingFlag flag = ReadingFlag::Ok;
};

/// Ground truth at the insertion height, and the sensor's estimate through
/// its fitted calibration line.
inline NitrateReading nitrate_reading(const calibration::SensorUnit& sensor, const geometry::StalkInstance& stalk,
                                      double height_cm, const geometry::GradientConfig& gradient, Rng& rng) {
    NitrateReading r;
    r.true_ppm = geometry::nitrate_at_height(stalk.ground_nitrate_ppm, height_cm, gradient);
    if (!sensor.calibrated || !sensor.fit || sensor.fit->slope == 0.0) {
        r.flag = ReadingFlag::Uncalibrated;
        return r;
    }
    const double v = calibration::read_voltage(sensor.response, r.true_ppm, rng);
    const auto est = calibration::estimate_concentration(*sensor.fit, v);
    r.est_ppm = est.ppm;
    r.flag = est.clamped ? ReadingFlag::Clamped : ReadingFlag::Ok;
    return r;
}

struct TrialRecord {
    int trial = 0;
    int stalk_id = -1;
    bool detected = false;
    bool grasped = false;
    bool inserted = false;
    bool depth_ok = false;
    bool in_pith = false;
    std::optional<double> chosen_angle_deg;
    std::optional<double> angle_error_deg;
    double achieved_depth_mm = 0.0;
    std::optional<double> insertion_height_cm;
    std::optional<double> lateral_offset_mm;
    std::optional<double> nitrate_true_ppm;
    std::optional<double> nitrate_est_ppm;
    ReadingFlag reading_flag = ReadingFlag::Uncalibrated;
    std::optional<int> sensor_id;
    std::optional<Stage> failed_stage;
    std::string failure_reason;
    std::vector<Event> events;
};

/// in_pith => depth_ok => inserted => grasped => detected.
inline bool staging_consistent(const TrialRecord& t) {
    return (!t.in_pith || t.depth_ok) && (!t.depth_ok || t.inserted) && (!t.inserted || t.grasped) &&
           (!t.grasped || t.detected);
}

/// Simulated stage durations, seconds.
struct StageTiming {
    double stow = 3.0;
    double scan = 1.5;
    double select = 0.2;
    double approach = 4.0;
    double sweep_per_view = 1.5;
    double align = 2.0;
    double grasp = 1.5;
    double insert = 2.0;
    double read = 10.0;
    double retract = 2.0;
    double advance = 20.0;
};

// ---------------------------------------------------------------------------
// Mission context
// ---------------------------------------------------------------------------

struct MissionContext {
    ScenarioConfig cfg;
    geometry::FieldLayout field;
    Rng rng;
    StageTiming timing;

    gripper::GripperState gripper;
    exchange::Magazine magazine;
    double clock_s = 0.0;
    long next_seq = 0;
    std::set<int> visited;
    std::vector<TrialRecord> trials;
    std::vector<Event> log;
    std::vector<calibration::CalibrationRecord> calibrations;
    int replacements_attempted = 0;
    bool magazine_exhausted = false;

    // Scratch for the trial in progress.
    std::optional<TrialRecord> current;
    geometry::Vec2 base_pose;
    int sampling_stalk = -1;
    std::optional<perception::Detection> selected;
    double sweep_start_deg = 0.0;
    perception::SweepResult sweep;
    double approach_offset_mm = 0.0;
    double residual_offset_mm = 0.0;
    double height_cm = 0.0;

    MissionContext(ScenarioConfig config, geometry::FieldLayout layout, std::uint64_t seed)
        : cfg(std::move(config)), field(std::move(layout)), rng(seed, 0x5EED) {
        validate(cfg);
        gripper = gripper::at_rest(cfg.kinematics);
        magazine = exchange::make_magazine(cfg.mission.magazine_capacity, cfg.response, rng);
        for (auto& slot : magazine.slots) {
            auto& r = slot->response;
            r.true_slope_v_per_ppm *= std::max(0.05, 1.0 + rng.normal(0.0, cfg.mission.sensor_slope_rel_sd));
            r.true_intercept_v = rng.normal(r.true_intercept_v, cfg.mission.sensor_intercept_sd_v);
        }
        if (!cfg.mission.load_on_start && magazine.occupied() > 0) {
            // Mission starts with a pre-loaded, pre-calibrated sensor.
            auto& slot = magazine.slots[static_cast<std::size_t>(*magazine.next_occupied_slot())];
            slot->location = calibration::Location::LoadedInGripper;
            slot->slot = -1;
            gripper.loaded_sensor = std::move(*slot);
            slot.reset();
            gripper = gripper::move_to(cfg.kinematics, std::move(gripper), cfg.kinematics.lever_phase_end_mm);
            double scratch = 0.0;
            calibrations.push_back(
                calibration::maintenance_sequence(*gripper.loaded_sensor, cfg.station, rng, scratch));
        }
    }

    const geometry::StalkInstance& stalk(int id) const {
        for (const auto& s : field.stalks)
            if (s.id == id) return s;
        throw Error(ErrorKind::InvalidArgument, "unknown stalk id " + std::to_string(id));
    }

    int trial_index() const { return static_cast<int>(trials.size()); }
};

struct StepResult {
    MissionState next;
    std::vector<Event> events;
};

namespace detail {

inline Event emit(MissionContext& ctx, Stage stage, std::string type, json detail, std::vector<Event>& out) {
    Event e{ctx.next_seq++, ctx.clock_s, ctx.trial_index(), stage, std::move(type), std::move(detail)};
    out.push_back(e);
    ctx.log.push_back(e);
    if (ctx.current) ctx.current->events.push_back(e);
    return e;
}

inline json opt(const std::optional<int>& v) { return v ? json(*v) : json(nullptr); }

inline bool needs_replacement(const MissionContext& ctx) {
    const auto& s = ctx.gripper.loaded_sensor;
    return !s || s->location != calibration::Location::LoadedInGripper ||
           s->insert_count >= ctx.cfg.mission.replace_every;
}

/// Parks the gripper: sensor retracted, fingers open, lever still hooked.
inline void park(MissionContext& ctx) {
    const auto& k = ctx.cfg.kinematics;
    const bool hooked = ctx.gripper.loaded_sensor &&
                        ctx.gripper.loaded_sensor->location == calibration::Location::LoadedInGripper;
    ctx.gripper = gripper::move_to(k, std::move(ctx.gripper), hooked ? k.lever_phase_end_mm : 0.0);
}

inline void finish_trial(MissionContext& ctx) {
    if (!ctx.current) return;
    ctx.trials.push_back(std::move(*ctx.current));
    ctx.current.reset();
    ctx.selected.reset();
    park(ctx);
}

inline geometry::Vec2 sampling_pose(const MissionContext& ctx, const geometry::StalkInstance& s) {
    // Arm rides between two rows; stalks in the last row are viewed from the row before.
    const auto& rows = ctx.field.rows;
    const double half = ctx.field.row_spacing_m / 2.0;
    const bool last_row = !rows.empty() && s.base_position_m.y >= rows.back() - 1e-9 && rows.size() > 1;
    return {s.base_position_m.x, s.base_position_m.y + (last_row ? -half : half)};
}

} // namespace detail

/// Executes exactly one stage. Failures are modeled outcomes, never thrown.
inline StepResult step(const MissionState& state, MissionContext& ctx) {
    using detail::emit;
    StepResult res;
    auto& ev = res.events;
    const auto& cfg = ctx.cfg;
    auto& rng = ctx.rng;

    switch (state.stage) {
    case Stage::AdvanceBase: {
        if (ctx.trial_index() >= cfg.mission.n_stalks) {
            emit(ctx, Stage::AdvanceBase, "mission_complete", {{"trials", ctx.trial_index()}}, ev);
            res.next = MissionState::at(Stage::Done);
            return res;
        }
        int target = -1;
        for (const auto& s : ctx.field.stalks)
            if (!ctx.visited.contains(s.id)) {
                target = s.id;
                break;
            }
        if (target < 0) {
            emit(ctx, Stage::AdvanceBase, "field_exhausted", {{"trials", ctx.trial_index()}}, ev);
            res.next = MissionState::at(Stage::Done);
            return res;
        }
        ctx.clock_s += ctx.timing.advance;
        ctx.sampling_stalk = target;
        ctx.base_pose = detail::sampling_pose(ctx, ctx.stalk(target));
        ctx.current = TrialRecord{};
        ctx.current->trial = ctx.trial_index();
        ctx.current->stalk_id = target;
        emit(ctx, Stage::AdvanceBase, "arrived",
             {{"sampling_stalk", target}, {"base_x_m", ctx.base_pose.x}, {"base_y_m", ctx.base_pose.y}}, ev);
        res.next = MissionState::at(detail::needs_replacement(ctx) ? Stage::Replace : Stage::Stow);
        return res;
    }

    case Stage::Replace: {
        ++ctx.replacements_attempted;
        try {
            const auto rec = exchange::replace_sequence(cfg.kinematics, ctx.gripper, ctx.magazine, cfg.funnel, cfg.arm,
                                                        rng, ctx.clock_s, cfg.mission.load_retries,
                                                        cfg.exchange_timing);
            for (const auto& sub : rec.steps) {
                json d{{"timestamp_s", sub.timestamp_s},
                       {"performed", sub.performed},
                       {"sensor_id", detail::opt(sub.sensor_id)}};
                if (sub.step == exchange::SubStep::Unload) d["stuck"] = sub.stuck;
                if (sub.step == exchange::SubStep::Load) {
                    d["attempts"] = sub.attempts;
                    d["success"] = sub.success;
                    d["collision_aborts"] = sub.success ? sub.attempts - 1 : sub.attempts;
                }
                emit(ctx, Stage::Replace, std::string(exchange::to_string(sub.step)), d, ev);
            }
            emit(ctx, Stage::Replace, "replacement",
                 {{"slot", rec.slot_used},
                  {"removed_sensor", detail::opt(rec.removed_sensor)},
                  {"loaded_sensor", detail::opt(rec.loaded_sensor)},
                  {"success", rec.success}},
                 ev);
            res.next = rec.success ? MissionState::at(Stage::Calibrate)
                                   : MissionState::failed(Stage::Replace, "load_aborted");
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::MagazineEmpty) throw;
            ctx.magazine_exhausted = true;
            ctx.current.reset();
            emit(ctx, Stage::Replace, "magazine_empty", {{"replacements_attempted", ctx.replacements_attempted}}, ev);
            res.next = MissionState::at(Stage::Done);
        }
        return res;
    }

    case Stage::Calibrate: {
        auto& sensor = *ctx.gripper.loaded_sensor;
        const auto rec = calibration::maintenance_sequence(sensor, cfg.station, rng, ctx.clock_s);
        ctx.calibrations.push_back(rec);
        emit(ctx, Stage::Calibrate, "calibration",
             {{"sensor_id", rec.sensor_id},
              {"v_low", rec.v_low},
              {"v_high", rec.v_high},
              {"slope", rec.fitted_slope},
              {"intercept", rec.fitted_intercept},
              {"outcome", std::string(calibration::to_string(rec.outcome))},
              {"duration_s", rec.finished_s - rec.started_s}},
             ev);
        res.next = MissionState::at(Stage::Stow);
        return res;
    }

    case Stage::Stow:
        ctx.clock_s += ctx.timing.stow;
        emit(ctx, Stage::Stow, "stowed", json::object(), ev);
        res.next = MissionState::at(Stage::Scan);
        return res;

    case Stage::Scan: {
        ctx.clock_s += ctx.timing.scan;
        const auto detections = perception::scan(ctx.field, ctx.base_pose, cfg.detection, rng, ctx.visited);
        int phantoms = 0;
        for (const auto& d : detections) phantoms += d.phantom() ? 1 : 0;
        emit(ctx, Stage::Scan, "scan",
             {{"detections", detections.size()}, {"phantoms", phantoms}}, ev);
        ctx.selected.reset();
        if (!detections.empty()) {
            auto w = cfg.weights;
            w.max_range_m = cfg.detection.max_detect_range_m;
            ctx.selected = perception::select_stalk(detections, w);
        }
        res.next = MissionState::at(Stage::Select);
        return res;
    }

    case Stage::Select: {
        ctx.clock_s += ctx.timing.select;
        if (!ctx.selected) {
            ctx.visited.insert(ctx.sampling_stalk);
            emit(ctx, Stage::Select, "no_detections", json::object(), ev);
            res.next = MissionState::failed(Stage::Select, "no_detections");
            return res;
        }
        const auto& sel = *ctx.selected;
        if (sel.phantom()) {
            ctx.visited.insert(ctx.sampling_stalk);
        } else {
            ctx.current->stalk_id = *sel.stalk_id;
            ctx.current->detected = true;
            ctx.visited.insert(*sel.stalk_id);
        }
        emit(ctx, Stage::Select, "selected",
             {{"detection", sel.id},
              {"stalk_id", detail::opt(sel.stalk_id)},
              {"leaf_site", detail::opt(sel.leaf_site)},
              {"confidence", sel.confidence},
              {"est_width_mm", sel.est_width_mm},
              {"distance_m", sel.distance_m}},
             ev);
        res.next = MissionState::at(Stage::Approach);
        return res;
    }

    case Stage::Approach: {
        ctx.clock_s += ctx.timing.approach;
        const auto& sel = *ctx.selected;
        ctx.height_cm = std::max(0.0, rng.normal(cfg.mission.insertion_height_target_cm,
                                                 cfg.mission.height_noise_sigma_cm));
        ctx.sweep_start_deg = geometry::normalize_half_turn(
            perception::heading_deg(ctx.base_pose, sel.est_position_m) +
            rng.normal(0.0, cfg.mission.heading_noise_sigma_deg));
        ctx.current->insertion_height_cm = ctx.height_cm;
        emit(ctx, Stage::Approach, "approach",
             {{"height_cm", ctx.height_cm}, {"sweep_start_deg", ctx.sweep_start_deg}}, ev);
        res.next = MissionState::at(Stage::Sweep);
        return res;
    }

    case Stage::Sweep: {
        auto plan = cfg.sweep;
        plan.start_angle_deg = ctx.sweep_start_deg;
        ctx.clock_s += ctx.timing.sweep_per_view * plan.n_views;
        const auto& sel = *ctx.selected;
        if (sel.phantom()) {
            // A leaf shows no stable width profile; the first view is kept.
            ctx.sweep = perception::SweepResult{plan.angle(0), sel.est_width_mm, {}};
        } else {
            ctx.sweep = perception::sweep_select(ctx.stalk(*sel.stalk_id), plan, cfg.detection, rng);
        }
        json views = json::array();
        for (const auto& v : ctx.sweep.views) views.push_back({{"angle_deg", v.angle_deg}, {"width_mm", v.measured_width_mm}});
        ctx.current->chosen_angle_deg = ctx.sweep.chosen_angle_deg;
        if (!sel.phantom())
            ctx.current->angle_error_deg =
                perception::angle_error_to_optimal(ctx.sweep.chosen_angle_deg, ctx.stalk(*sel.stalk_id).cross_section);
        emit(ctx, Stage::Sweep, "sweep",
             {{"chosen_angle_deg", ctx.sweep.chosen_angle_deg}, {"width_mm", ctx.sweep.measured_width_mm},
              {"views", views}},
             ev);
        res.next = MissionState::at(Stage::AlignInsert);
        return res;
    }

    case Stage::AlignInsert: {
        ctx.clock_s += ctx.timing.align;
        const auto& sel = *ctx.selected;
        // Lateral error of the gripper axis: detection error across the
        // approach direction plus arm placement error.
        double detect_err_mm = 0.0;
        if (!sel.phantom()) {
            const auto truth = ctx.stalk(*sel.stalk_id).base_position_m;
            const double a = geometry::deg_to_rad(ctx.sweep.chosen_angle_deg);
            const geometry::Vec2 normal{-std::sin(a), std::cos(a)};
            const auto err = sel.est_position_m - truth;
            detect_err_mm = 1000.0 * (err.x * normal.x + err.y * normal.y);
        }
        ctx.approach_offset_mm = detect_err_mm + rng.normal(0.0, cfg.arm.sigma_xy_mm);
        emit(ctx, Stage::AlignInsert, "aligned",
             {{"angle_deg", ctx.sweep.chosen_angle_deg}, {"approach_offset_mm", ctx.approach_offset_mm}}, ev);
        res.next = MissionState::at(Stage::Grasp);
        return res;
    }

    case Stage::Grasp: {
        ctx.clock_s += ctx.timing.grasp;
        const auto& sel = *ctx.selected;
        ctx.gripper = gripper::move_to(cfg.kinematics, std::move(ctx.gripper), cfg.kinematics.grasp_phase_end_mm);
        if (sel.phantom()) {
            emit(ctx, Stage::Grasp, "grasp", {{"error", "stalk_missed"}, {"phantom", true}}, ev);
            res.next = MissionState::failed(Stage::Grasp, "stalk_missed");
            return res;
        }
        const auto& cs = ctx.stalk(*sel.stalk_id).cross_section;
        const double width = geometry::apparent_width(cs, ctx.sweep.chosen_angle_deg);
        const auto g = gripper::grasp(cfg.kinematics, ctx.approach_offset_mm, width, rng);
        emit(ctx, Stage::Grasp, "grasp",
             {{"error", std::string(gripper::to_string(g.error))},
              {"stalk_width_mm", width},
              {"residual_offset_mm", g.residual_offset_mm}},
             ev);
        if (!g.ok()) {
            res.next = MissionState::failed(Stage::Grasp, std::string(gripper::to_string(g.error)));
            return res;
        }
        ctx.current->grasped = true;
        ctx.residual_offset_mm = g.residual_offset_mm;
        res.next = MissionState::at(Stage::Insert);
        return res;
    }

    case Stage::Insert: {
        ctx.clock_s += ctx.timing.insert;
        const double lateral = ctx.residual_offset_mm + rng.normal(0.0, cfg.arm.sigma_insert_offset_mm);
        ctx.gripper = gripper::move_to(cfg.kinematics, std::move(ctx.gripper), cfg.kinematics.stroke_mm);
        auto& sensor = *ctx.gripper.loaded_sensor;
        const int count_before = sensor.insert_count;
        const auto& stalk = ctx.stalk(*ctx.selected->stalk_id);
        const auto out = gripper::insert(ctx.gripper, cfg.kinematics, stalk, ctx.sweep.chosen_angle_deg, lateral,
                                         ctx.height_cm, cfg.sensor);
        calibration::wear_step(sensor, rng);
        auto& t = *ctx.current;
        t.sensor_id = sensor.id;
        t.lateral_offset_mm = lateral;
        t.inserted = out.hit;
        t.depth_ok = out.depth_ok;
        t.in_pith = out.in_pith;
        t.achieved_depth_mm = out.achieved_depth_mm;
        emit(ctx, Stage::Insert, "insert",
             {{"sensor_id", sensor.id},
              {"insert_count_before", count_before},
              {"force_n", gripper::kInsertionForceN},
              {"lateral_offset_mm", lateral},
              {"hit", out.hit},
              {"chord_mm", out.chord_mm},
              {"depth_mm", out.achieved_depth_mm},
              {"depth_ok", out.depth_ok},
              {"height_ok", out.height_ok},
              {"in_pith", out.in_pith}},
             ev);
        res.next = out.hit ? MissionState::at(Stage::Read) : MissionState::failed(Stage::Insert, "missed_stalk");
        return res;
    }

    case Stage::Read: {
        ctx.clock_s += ctx.timing.read;
        const auto& stalk = ctx.stalk(*ctx.selected->stalk_id);
        const auto r = nitrate_reading(*ctx.gripper.loaded_sensor, stalk, ctx.height_cm, cfg.gradient, rng);
        auto& t = *ctx.current;
        t.nitrate_true_ppm = r.true_ppm;
        t.nitrate_est_ppm = r.est_ppm;
        t.reading_flag = r.flag;
        emit(ctx, Stage::Read, "reading",
             {{"true_ppm", r.true_ppm},
              {"est_ppm", r.est_ppm ? json(*r.est_ppm) : json(nullptr)},
              {"flag", std::string(to_string(r.flag))}},
             ev);
        res.next = MissionState::at(Stage::Retract);
        return res;
    }

    case Stage::Retract: {
        ctx.clock_s += ctx.timing.retract;
        const auto path = gripper::retract_and_release(cfg.kinematics, ctx.gripper);
        ctx.gripper = path.released;
        emit(ctx, Stage::Retract, "retracted", {{"extension_mm", ctx.gripper.extension_mm}}, ev);
        detail::finish_trial(ctx);
        res.next = MissionState::at(Stage::AdvanceBase);
        return res;
    }

    case Stage::Failed: {
        if (ctx.current) {
            if (!ctx.current->detected) ctx.visited.insert(ctx.current->stalk_id);
            ctx.current->failed_stage = state.failed_stage;
            ctx.current->failure_reason = state.reason;
        }
        emit(ctx, Stage::Failed, "trial_failed",
             {{"stage", std::string(to_string(state.failed_stage))}, {"reason", state.reason}}, ev);
        detail::finish_trial(ctx);
        res.next = MissionState::at(Stage::AdvanceBase);
        return res;
    }

    case Stage::Done:
        res.next = state;
        return res;
    }
    return res;
}

struct MissionResult {
    std::vector<TrialRecord> trials;
    std::vector<Event> log;
    std::vector<calibration::CalibrationRecord> calibrations;
    int replacements_attempted = 0;
    bool magazine_exhausted = false;
    double duration_s = 0.0;
};

inline MissionResult run_mission(const geometry::FieldLayout& field, const ScenarioConfig& cfg, std::uint64_t seed) {
    MissionContext ctx(cfg, field, seed);
    MissionState state = MissionState::at(Stage::AdvanceBase);
    // Each trial takes a bounded number of stages; the cap only guards bugs.
    const long max_steps = 64L * (cfg.mission.n_stalks + 2);
    for (long i = 0; !state.terminal(); ++i) {
        if (i > max_steps) throw Error(ErrorKind::InvalidArgument, "mission failed to terminate");
        state = step(state, ctx).next;
    }
    return {std::move(ctx.trials), std::move(ctx.log), std::move(ctx.calibrations), ctx.replacements_attempted,
            ctx.magazine_exhausted, ctx.clock_s};
}

/// Field sized to the mission and seeded from the same mission seed.
inline geometry::FieldLayout mission_field(const ScenarioConfig& cfg, std::uint64_t seed) {
    auto fc = cfg.field;
    fc.n_stalks = cfg.mission.n_stalks;
    return geometry::generate_field(fc, seed);
}

} // namespace stalkprobe::mission
