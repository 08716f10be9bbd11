#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "calibration.hpp"
#include "error.hpp"
#include "gripper.hpp"
#include "random.hpp"

namespace stalkprobe::exchange {

using calibration::Location;
using calibration::SensorUnit;
using gripper::GripperState;
using gripper::KinematicsConfig;

/// Sensor holder plus retrieval box. Slots are indexed from 0.
struct Magazine {
    std::vector<std::optional<SensorUnit>> slots;
    std::vector<SensorUnit> retrieval_box;
    bool flat_plate_present = true;

    int occupied() const {
        int n = 0;
        for (const auto& s : slots) n += s.has_value() ? 1 : 0;
        return n;
    }

    std::optional<int> next_occupied_slot() const {
        for (std::size_t i = 0; i < slots.size(); ++i)
            if (slots[i]) return static_cast<int>(i);
        return std::nullopt;
    }
};

inline constexpr int kDefaultMagazineCapacity = 5;

/// Fresh, commissioned sensors with ids first_id, first_id + 1, ...
inline Magazine make_magazine(int capacity, const calibration::SensorResponseModel& model, Rng& rng,
                              int first_id = 0) {
    require(capacity >= 0, ErrorKind::InvalidArgument, "capacity must be non-negative");
    Magazine m;
    for (int i = 0; i < capacity; ++i) {
        SensorUnit s;
        s.id = first_id + i;
        s.response = model;
        s.location = Location::MagazineSlot;
        s.slot = i;
        calibration::commission(s, rng);
        m.slots.emplace_back(std::move(s));
    }
    return m;
}

/// Sensors accounted for across slots, box and gripper slot.
inline int sensor_count(const Magazine& m, const GripperState& g) {
    return m.occupied() + static_cast<int>(m.retrieval_box.size()) + (g.loaded_sensor ? 1 : 0);
}

// ---------------------------------------------------------------------------
// Funnel
// ---------------------------------------------------------------------------

/// Tapered T-extrusion engaging the T-slot on the gripper. The extrusion tip
/// is the slot cross-section scaled (both axes) by sqrt(tip_area_ratio).
struct FunnelConfig {
    double slot_width_mm = 10.0;
    double slot_height_mm = 8.0;
    double tip_area_ratio = 0.18;
    double slot_tolerance_mm = 0.3;
    double contact_width_mm = 2.2;
    double contact_height_mm = 5.0;
};

struct Tolerance {
    double x_mm = 0.0;
    double y_mm = 0.0;
};

inline Tolerance capture_tolerance(const FunnelConfig& c) {
    const double s = std::sqrt(c.tip_area_ratio);
    return {c.slot_width_mm * (1.0 - s) / 2.0, c.slot_height_mm * (1.0 - s) / 2.0};
}

inline void validate(const FunnelConfig& c) {
    require(c.tip_area_ratio > 0.0 && c.tip_area_ratio < 1.0, ErrorKind::InvalidArgument,
            "tip_area_ratio must lie in (0, 1)");
    require(c.slot_width_mm > 0.0 && c.slot_height_mm > 0.0, ErrorKind::InvalidArgument, "slot dimensions");
    const auto t = capture_tolerance(c);
    require(c.slot_tolerance_mm >= 0.0 && c.slot_tolerance_mm < std::min(t.x_mm, t.y_mm), ErrorKind::InvalidArgument,
            "funnel capture tolerance must exceed the bare slot tolerance");
}

struct CaptureResult {
    bool captured = false;
    double residual_x_mm = 0.0;
    double residual_y_mm = 0.0;
};

/// Within the capture window the taper fully aligns the slot (zero residual).
inline CaptureResult funnel_capture(const FunnelConfig& c, double dx_mm, double dy_mm) {
    const auto t = capture_tolerance(c);
    if (std::abs(dx_mm) <= t.x_mm && std::abs(dy_mm) <= t.y_mm) return {true, 0.0, 0.0};
    return {false, dx_mm, dy_mm};
}

/// P(|X| <= t_x) * P(|Y| <= t_y) for X, Y ~ N(0, sigma^2).
inline double capture_probability(const FunnelConfig& c, double sigma_xy_mm) {
    require(sigma_xy_mm >= 0.0, ErrorKind::InvalidArgument, "sigma must be non-negative");
    if (sigma_xy_mm == 0.0) return 1.0;
    const auto t = capture_tolerance(c);
    auto axis = [&](double tol) { return std::erf(tol / (sigma_xy_mm * std::numbers::sqrt2)); };
    return axis(t.x_mm) * axis(t.y_mm);
}

// ---------------------------------------------------------------------------
// Exchange operations
// ---------------------------------------------------------------------------

struct ArmErrorModel {
    double sigma_xy_mm = 1.0;
    double sigma_insert_offset_mm = 4.5;
    double p_stuck = 0.1;
};

inline void validate(const ArmErrorModel& a) {
    require(a.sigma_xy_mm >= 0.0 && a.sigma_insert_offset_mm >= 0.0, ErrorKind::InvalidArgument,
            "arm sigmas must be non-negative");
    require(a.p_stuck >= 0.0 && a.p_stuck <= 1.0, ErrorKind::InvalidArgument, "p_stuck must lie in [0, 1]");
}

struct UnloadEvent {
    int sensor_id = 0;
    bool stuck = false;
};

/// Full retraction opens the lever; the sensor wing strikes the frame and
/// the sensor drops into the retrieval box unless it jams in the slot.
inline UnloadEvent unload(const KinematicsConfig& kc, GripperState& g, Magazine& m, const ArmErrorModel& arm,
                          Rng& rng) {
    require(g.loaded_sensor && g.loaded_sensor->location == Location::LoadedInGripper, ErrorKind::NoSensorLoaded,
            "unload requires a loaded sensor");
    g = gripper::move_to(kc, std::move(g), 0.0);
    UnloadEvent ev{g.loaded_sensor->id, rng.bernoulli(arm.p_stuck)};
    if (ev.stuck) {
        g.loaded_sensor->location = Location::StuckInSlot;
    } else {
        g.loaded_sensor->location = Location::RetrievalBox;
        m.retrieval_box.push_back(std::move(*g.loaded_sensor));
        g.loaded_sensor.reset();
    }
    return ev;
}

/// Sweeps the gripper across the flat plate. Returns true if a stuck sensor
/// was knocked into the box.
inline bool wipe_clear(GripperState& g, Magazine& m) {
    if (!g.loaded_sensor) return false;
    require(!(g.lever_hooked && g.loaded_sensor->location == Location::LoadedInGripper),
            ErrorKind::LeverStillHooked, "wipe with a hooked sensor would tear it out");
    g.loaded_sensor->location = Location::RetrievalBox;
    m.retrieval_box.push_back(std::move(*g.loaded_sensor));
    g.loaded_sensor.reset();
    return true;
}

struct LoadAttempt {
    double dx_mm = 0.0;
    double dy_mm = 0.0;
    bool captured = false;
};

struct LoadEvent {
    int slot = 0;
    int sensor_id = 0;
    std::vector<LoadAttempt> attempts; ///< failed attempts are collision aborts
    bool loaded = false;
};

inline LoadEvent load(const KinematicsConfig& kc, GripperState& g, Magazine& m, int slot_index,
                      const FunnelConfig& funnel, const ArmErrorModel& arm, Rng& rng, int retries = 1) {
    require(!g.loaded_sensor, ErrorKind::GripperOccupied, "gripper slot is occupied");
    require(slot_index >= 0 && static_cast<std::size_t>(slot_index) < m.slots.size() &&
                m.slots[static_cast<std::size_t>(slot_index)].has_value(),
            ErrorKind::SlotEmpty, "slot " + std::to_string(slot_index) + " is empty");
    auto& slot = m.slots[static_cast<std::size_t>(slot_index)];
    LoadEvent ev;
    ev.slot = slot_index;
    ev.sensor_id = slot->id;
    for (int attempt = 0; attempt <= retries; ++attempt) {
        LoadAttempt a;
        a.dx_mm = rng.normal(0.0, arm.sigma_xy_mm);
        a.dy_mm = rng.normal(0.0, arm.sigma_xy_mm);
        a.captured = funnel_capture(funnel, a.dx_mm, a.dy_mm).captured;
        ev.attempts.push_back(a);
        if (a.captured) {
            ev.loaded = true;
            break;
        }
    }
    if (!ev.loaded) return ev;

    slot->location = Location::LoadedInGripper;
    slot->slot = -1;
    g.loaded_sensor = std::move(*slot);
    slot.reset();
    g = gripper::move_to(kc, std::move(g), kc.lever_phase_end_mm); // lever hooks the wing
    return ev;
}

enum class SubStep { Unload, Wipe, Load };

constexpr std::string_view to_string(SubStep s) {
    switch (s) {
    case SubStep::Unload: return "unload";
    case SubStep::Wipe: return "wipe";
    case SubStep::Load: return "load";
    }
    return "?";
}

struct SubStepRecord {
    static SubStepRecord at(SubStep step, double t) {
        SubStepRecord r;
        r.step = step;
        r.timestamp_s = t;
        return r;
    }

    SubStep step = SubStep::Unload;
    double timestamp_s = 0.0;
    bool performed = true; ///< false when there was nothing to do
    std::optional<int> sensor_id;
    bool stuck = false;     ///< unload only
    int attempts = 0;       ///< load only
    bool success = true;
};

struct ReplacementRecord {
    std::vector<SubStepRecord> steps;
    int slot_used = -1;
    std::optional<int> removed_sensor;
    std::optional<int> loaded_sensor;
    bool success = false;
};

/// Simulated durations of the replacement motions.
struct ExchangeTiming {
    double unload_s = 4.0;
    double wipe_s = 2.0;
    double load_s = 6.0;
};

/// unload -> wipe -> load from the lowest occupied slot. Throws MagazineEmpty
/// before moving anything when no replacement sensor is left.
inline ReplacementRecord replace_sequence(const KinematicsConfig& kc, GripperState& g, Magazine& m,
                                          const FunnelConfig& funnel, const ArmErrorModel& arm, Rng& rng,
                                          double& clock_s, int retries = 1, const ExchangeTiming& timing = {}) {
    const auto slot = m.next_occupied_slot();
    require(slot.has_value(), ErrorKind::MagazineEmpty, "no sensors left in the holder");

    ReplacementRecord rec;
    auto un = SubStepRecord::at(SubStep::Unload, clock_s);
    if (g.loaded_sensor && g.loaded_sensor->location == Location::LoadedInGripper) {
        rec.removed_sensor = g.loaded_sensor->id;
        const auto ev = unload(kc, g, m, arm, rng);
        un.sensor_id = ev.sensor_id;
        un.stuck = ev.stuck;
    } else {
        un.performed = false;
    }
    clock_s += timing.unload_s;
    rec.steps.push_back(un);

    auto wipe = SubStepRecord::at(SubStep::Wipe, clock_s);
    wipe.sensor_id = g.loaded_sensor_id();
    if (!rec.removed_sensor && g.loaded_sensor) rec.removed_sensor = g.loaded_sensor->id;
    wipe.performed = wipe_clear(g, m);
    clock_s += timing.wipe_s;
    rec.steps.push_back(wipe);

    auto ld = SubStepRecord::at(SubStep::Load, clock_s);
    const auto ev = load(kc, g, m, *slot, funnel, arm, rng, retries);
    ld.sensor_id = ev.sensor_id;
    ld.attempts = static_cast<int>(ev.attempts.size());
    ld.success = ev.loaded;
    clock_s += timing.load_s;
    rec.steps.push_back(ld);

    rec.slot_used = *slot;
    rec.success = ev.loaded;
    if (ev.loaded) rec.loaded_sensor = ev.sensor_id;
    return rec;
}

} // namespace stalkprobe::exchange
