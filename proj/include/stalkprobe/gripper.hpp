#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>

#include "calibration.hpp"
#include "error.hpp"
#include "geometry.hpp"
#include "random.hpp"

namespace stalkprobe::gripper {

/// Single-actuator coupled slide. The stroke splits into three exclusive
/// phases: [0, lever_end) swings the sensor lever, [lever_end, grasp_end)
/// closes the fingers, [grasp_end, stroke] drives the sensor slot forward.
struct KinematicsConfig {
    double stroke_mm = 50.0;
    double lever_phase_end_mm = 8.0;
    double grasp_phase_end_mm = 32.0;
    double max_finger_gap_mm = 40.0;
    double insertion_travel_mm = 18.0;
    double grasp_min_diameter_mm = 15.0;
    double grasp_max_diameter_mm = 35.0;
    double centering_gain = 0.15;
    double centering_noise_sigma_mm = 0.0;
    /// Distance from the gripper centerline to the retracted spike tip.
    double tip_standoff_mm = 16.5;
};

/// Sensor insertion force, carried as an annotation on insert events.
inline constexpr double kInsertionForceN = 30.0;

inline void validate(const KinematicsConfig& c, double required_depth_mm = 8.5) {
    require(0.0 < c.lever_phase_end_mm && c.lever_phase_end_mm < c.grasp_phase_end_mm &&
                c.grasp_phase_end_mm < c.stroke_mm,
            ErrorKind::InvalidArgument, "phase boundaries must satisfy 0 < lever < grasp < stroke");
    require(c.insertion_travel_mm >= required_depth_mm, ErrorKind::InvalidArgument,
            "insertion travel must cover the required depth");
    require(c.max_finger_gap_mm > 0.0 && c.grasp_min_diameter_mm <= c.grasp_max_diameter_mm,
            ErrorKind::InvalidArgument, "finger gap / grasp range");
    require(c.centering_gain >= 0.0 && c.centering_gain <= 1.0, ErrorKind::InvalidArgument,
            "centering gain must lie in [0, 1]");
    require(c.centering_noise_sigma_mm >= 0.0 && c.tip_standoff_mm >= 0.0, ErrorKind::InvalidArgument,
            "noise/standoff must be non-negative");
}

struct KinematicsSample {
    double finger_gap_mm = 0.0;
    double sensor_travel_mm = 0.0;
    bool lever_hooked = false;
    double lever_fraction = 0.0; ///< 0 = open, 1 = hooked
};

inline KinematicsSample kinematics(const KinematicsConfig& c, double extension_mm) {
    require(extension_mm >= 0.0 && extension_mm <= c.stroke_mm, ErrorKind::ExtensionOutOfRange,
            "extension outside [0, stroke]");
    KinematicsSample out;
    out.lever_fraction = std::min(1.0, extension_mm / c.lever_phase_end_mm);
    out.lever_hooked = extension_mm >= c.lever_phase_end_mm;

    const double grasp_len = c.grasp_phase_end_mm - c.lever_phase_end_mm;
    const double close = std::clamp((extension_mm - c.lever_phase_end_mm) / grasp_len, 0.0, 1.0);
    out.finger_gap_mm = c.max_finger_gap_mm * (1.0 - close);

    const double insert_len = c.stroke_mm - c.grasp_phase_end_mm;
    const double drive = std::clamp((extension_mm - c.grasp_phase_end_mm) / insert_len, 0.0, 1.0);
    out.sensor_travel_mm = c.insertion_travel_mm * drive;
    return out;
}

/// Largest output change per mm of extension over the whole stroke.
inline double lipschitz_bound(const KinematicsConfig& c) {
    return std::max({1.0 / c.lever_phase_end_mm, c.max_finger_gap_mm / (c.grasp_phase_end_mm - c.lever_phase_end_mm),
                     c.insertion_travel_mm / (c.stroke_mm - c.grasp_phase_end_mm)});
}

struct GripperState {
    double extension_mm = 0.0;
    double finger_gap_mm = 40.0;
    bool lever_hooked = false;
    double sensor_travel_mm = 0.0;
    /// The sensor occupying the slot; its location is LoadedInGripper or StuckInSlot.
    std::optional<calibration::SensorUnit> loaded_sensor;

    std::optional<int> loaded_sensor_id() const {
        return loaded_sensor ? std::optional<int>(loaded_sensor->id) : std::nullopt;
    }
};

inline bool same_pose(const GripperState& a, const GripperState& b) {
    return a.extension_mm == b.extension_mm && a.finger_gap_mm == b.finger_gap_mm &&
           a.lever_hooked == b.lever_hooked && a.sensor_travel_mm == b.sensor_travel_mm &&
           a.loaded_sensor_id() == b.loaded_sensor_id();
}

/// Moves the actuator; the loaded sensor rides along untouched.
inline GripperState move_to(const KinematicsConfig& c, GripperState state, double extension_mm) {
    const auto k = kinematics(c, extension_mm);
    state.extension_mm = extension_mm;
    state.finger_gap_mm = k.finger_gap_mm;
    state.lever_hooked = k.lever_hooked;
    state.sensor_travel_mm = k.sensor_travel_mm;
    return state;
}

inline GripperState at_rest(const KinematicsConfig& c) { return move_to(c, GripperState{}, 0.0); }

/// Kinematics curve as CSV: extension_mm,finger_gap_mm,sensor_travel_mm,lever_hooked.
inline std::string kinematics_csv(const KinematicsConfig& c, double step_mm = 0.5) {
    require(step_mm > 0.0, ErrorKind::InvalidArgument, "step must be positive");
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(4);
    os << "extension_mm,finger_gap_mm,sensor_travel_mm,lever_hooked\n";
    const auto n = static_cast<long>(std::floor(c.stroke_mm / step_mm + 1e-9));
    for (long i = 0; i <= n; ++i) {
        const double e = std::min(c.stroke_mm, static_cast<double>(i) * step_mm);
        const auto k = kinematics(c, e);
        os << e << ',' << k.finger_gap_mm << ',' << k.sensor_travel_mm << ',' << (k.lever_hooked ? 1 : 0) << '\n';
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Grasp
// ---------------------------------------------------------------------------

enum class GraspError { None, DiameterOutOfRange, StalkMissed };

constexpr std::string_view to_string(GraspError e) {
    switch (e) {
    case GraspError::None: return "none";
    case GraspError::DiameterOutOfRange: return "diameter_out_of_range";
    case GraspError::StalkMissed: return "stalk_missed";
    }
    return "?";
}

struct GraspResult {
    GraspError error = GraspError::None;
    double residual_offset_mm = 0.0;

    bool ok() const { return error == GraspError::None; }
};

/// V-pad centering: the closing pads pull the stalk toward the gripper axis,
/// leaving centering_gain of the approach offset (plus optional scatter).
inline GraspResult grasp(const KinematicsConfig& c, double approach_offset_mm, double stalk_diameter_mm, Rng& rng) {
    require(stalk_diameter_mm > 0.0, ErrorKind::InvalidArgument, "stalk diameter must be positive");
    if (stalk_diameter_mm < c.grasp_min_diameter_mm || stalk_diameter_mm > c.grasp_max_diameter_mm)
        return {GraspError::DiameterOutOfRange, approach_offset_mm};
    if (std::abs(approach_offset_mm) > c.max_finger_gap_mm / 2.0) return {GraspError::StalkMissed, approach_offset_mm};
    return {GraspError::None, rng.normal(c.centering_gain * approach_offset_mm, c.centering_noise_sigma_mm)};
}

// ---------------------------------------------------------------------------
// Insertion
// ---------------------------------------------------------------------------

struct InsertionOutcome {
    bool hit = false;
    double achieved_depth_mm = 0.0;
    bool depth_ok = false;
    bool in_pith = false;
    double insertion_height_cm = 0.0;
    bool height_ok = false;
    double lateral_offset_mm = 0.0;
    double insertion_angle_deg = 0.0;
    double chord_mm = 0.0;
};

/// Drives the spike along the insertion ray. Depth is bounded by how far the
/// tip travels past the entry surface, the chord of the stalk and the spike
/// length.
inline InsertionOutcome insert(const GripperState& state, const KinematicsConfig& c,
                               const geometry::StalkInstance& stalk, double insertion_angle_deg,
                               double residual_offset_mm, double height_cm, const geometry::SensorGeometry& geom) {
    require(state.loaded_sensor.has_value() && state.loaded_sensor->location == calibration::Location::LoadedInGripper,
            ErrorKind::NoSensorLoaded, "insert requires a hooked sensor");
    InsertionOutcome out;
    out.insertion_height_cm = height_cm;
    out.lateral_offset_mm = residual_offset_mm;
    out.insertion_angle_deg = insertion_angle_deg;
    out.height_ok = geom.insertion_height_band_cm.contains(height_cm);

    const auto& cs = stalk.cross_section;
    const auto ray = geometry::make_ray(cs, insertion_angle_deg, residual_offset_mm);
    const auto hit = geometry::intersect(cs, ray);
    if (!hit) return out;

    out.hit = true;
    out.chord_mm = hit->chord();
    const double tip_reach = c.insertion_travel_mm - c.tip_standoff_mm; // along the ray, from the foot point
    const double penetration = std::max(0.0, tip_reach - hit->t_in);
    out.achieved_depth_mm = std::min({penetration, out.chord_mm, geom.spike_length_mm});
    out.depth_ok = out.achieved_depth_mm >= geom.required_depth_mm;
    out.in_pith = out.depth_ok && out.height_ok &&
                  geometry::electrodes_in_pith(cs, insertion_angle_deg, residual_offset_mm, out.achieved_depth_mm, geom);
    return out;
}

/// First the sensor retracts (back to the grasp boundary), then the fingers
/// open (back to the lever boundary). The sensor stays hooked throughout.
struct RetractPath {
    GripperState sensor_retracted;
    GripperState released;
};

inline RetractPath retract_and_release(const KinematicsConfig& c, const GripperState& state) {
    require(state.extension_mm == c.stroke_mm, ErrorKind::ExtensionOutOfRange,
            "retract_and_release starts from full stroke");
    RetractPath path;
    path.sensor_retracted = move_to(c, state, c.grasp_phase_end_mm);
    path.released = move_to(c, path.sensor_retracted, c.lever_phase_end_mm);
    return path;
}

} // namespace stalkprobe::gripper
