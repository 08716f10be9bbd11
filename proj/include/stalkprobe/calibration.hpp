#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string_view>
#include <vector>

#include "error.hpp"
#include "random.hpp"

namespace stalkprobe::calibration {

/// Sign of the healthy voltage/concentration slope.
enum class Polarity { Negative, Positive };

/// Persistent wear-failure response. Chosen once, at failure onset.
enum class Degeneracy { None, Flat, Inverted };

constexpr std::string_view to_string(Degeneracy d) {
    switch (d) {
    case Degeneracy::None: return "none";
    case Degeneracy::Flat: return "flat";
    case Degeneracy::Inverted: return "inverted";
    }
    return "?";
}

/// Per-sensor linear voltage response plus its wear model.
///
/// The marginal probability that a sensor is in the failed state after n
/// insertions is F(n) = min(1, wear_base_fail_p + wear_per_insert_p * n).
/// F(0) is drawn when the sensor is commissioned; each wear step applies the
/// conditional hazard (F(n) - F(n-1)) / (1 - F(n-1)).
struct SensorResponseModel {
    double true_slope_v_per_ppm = -1e-4;
    double true_intercept_v = 0.4;
    double noise_sigma_v = 0.005;
    double wear_base_fail_p = 0.2;
    double wear_per_insert_p = 0.04;
    double flat_given_failure_p = 0.5;
    Degeneracy degeneracy = Degeneracy::None;

    bool failed() const { return degeneracy != Degeneracy::None; }
};

inline void validate(const SensorResponseModel& m) {
    auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    require(m.noise_sigma_v >= 0.0, ErrorKind::InvalidArgument, "noise_sigma_v must be >= 0");
    require(prob(m.wear_base_fail_p) && m.wear_per_insert_p >= 0.0 && prob(m.flat_given_failure_p),
            ErrorKind::InvalidArgument, "wear probabilities out of range");
}

inline double failure_probability(const SensorResponseModel& m, int insert_count) {
    return std::clamp(m.wear_base_fail_p + m.wear_per_insert_p * insert_count, 0.0, 1.0);
}

enum class Location { MagazineSlot, LoadedInGripper, RetrievalBox, StuckInSlot };

constexpr std::string_view to_string(Location l) {
    switch (l) {
    case Location::MagazineSlot: return "magazine_slot";
    case Location::LoadedInGripper: return "loaded";
    case Location::RetrievalBox: return "retrieval_box";
    case Location::StuckInSlot: return "stuck_in_slot";
    }
    return "?";
}

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
};

struct SensorUnit {
    int id = 0;
    SensorResponseModel response;
    int insert_count = 0;
    Location location = Location::MagazineSlot;
    int slot = -1; ///< meaningful only while location == MagazineSlot
    bool calibrated = false;
    std::optional<LinearFit> fit;
};

// ---------------------------------------------------------------------------
// Voltage response and wear
// ---------------------------------------------------------------------------

inline double read_voltage(const SensorResponseModel& m, double concentration_ppm, Rng& rng) {
    require(concentration_ppm >= 0.0, ErrorKind::InvalidArgument, "concentration must be non-negative");
    // Worn-out sensors answer with a fixed degenerate line, so a failed sensor
    // can never validate as Pass again.
    switch (m.degeneracy) {
    case Degeneracy::Flat: return m.true_intercept_v;
    case Degeneracy::Inverted: return m.true_intercept_v - m.true_slope_v_per_ppm * concentration_ppm;
    case Degeneracy::None: break;
    }
    return rng.normal(m.true_intercept_v + m.true_slope_v_per_ppm * concentration_ppm, m.noise_sigma_v);
}

inline void enter_failure(SensorResponseModel& m, Rng& rng) {
    m.degeneracy = rng.bernoulli(m.flat_given_failure_p) ? Degeneracy::Flat : Degeneracy::Inverted;
}

/// Draws the as-built failure state (probability F(0)).
inline void commission(SensorUnit& sensor, Rng& rng) {
    if (!sensor.response.failed() && rng.bernoulli(failure_probability(sensor.response, sensor.insert_count)))
        enter_failure(sensor.response, rng);
}

inline SensorUnit& wear_step(SensorUnit& sensor, Rng& rng) {
    const double before = failure_probability(sensor.response, sensor.insert_count);
    ++sensor.insert_count;
    const double after = failure_probability(sensor.response, sensor.insert_count);
    if (sensor.response.failed()) return sensor;
    const double hazard = before >= 1.0 ? 1.0 : (after - before) / (1.0 - before);
    if (rng.bernoulli(hazard)) enter_failure(sensor.response, rng);
    return sensor;
}

// ---------------------------------------------------------------------------
// Two-point calibration
// ---------------------------------------------------------------------------

inline constexpr double kLowPpm = 200.0;
inline constexpr double kHighPpm = 2000.0;

inline LinearFit two_point_calibrate(double v_low, double v_high, double c_low = kLowPpm, double c_high = kHighPpm) {
    require(c_low != c_high, ErrorKind::InvalidArgument, "calibration concentrations must differ");
    const double slope = (v_high - v_low) / (c_high - c_low);
    return {slope, v_low - slope * c_low};
}

struct ConcentrationEstimate {
    double ppm = 0.0;
    bool clamped = false; ///< raw inverse was negative
};

inline ConcentrationEstimate estimate_concentration(const LinearFit& fit, double v) {
    require(fit.slope != 0.0, ErrorKind::ZeroSlope, "cannot invert a flat calibration line");
    const double raw = (v - fit.intercept) / fit.slope;
    if (raw < 0.0) return {0.0, true};
    return {raw, false};
}

enum class Outcome { Pass, FailFlat, FailInverted };

constexpr std::string_view to_string(Outcome o) {
    switch (o) {
    case Outcome::Pass: return "pass";
    case Outcome::FailFlat: return "fail_flat";
    case Outcome::FailInverted: return "fail_inverted";
    }
    return "?";
}

inline Outcome validate_calibration(double v_low, double v_high, double flat_epsilon_v,
                                    Polarity polarity = Polarity::Negative) {
    if (std::abs(v_low - v_high) <= flat_epsilon_v) return Outcome::FailFlat;
    const bool inverted = polarity == Polarity::Negative ? v_high > v_low : v_high < v_low;
    return inverted ? Outcome::FailInverted : Outcome::Pass;
}

// ---------------------------------------------------------------------------
// Maintenance station
// ---------------------------------------------------------------------------

struct CalibrationStation {
    std::array<double, 3> concentrations_ppm{0.0, kLowPpm, kHighPpm};
    double dwell_s = 15.0;
    int pumps = 3;
    double flat_epsilon_v = 0.01;
    Polarity polarity = Polarity::Negative;
};

inline void validate(const CalibrationStation& st) {
    require(st.concentrations_ppm[0] == 0.0, ErrorKind::InvalidArgument, "first solution must be deionized water");
    require(st.concentrations_ppm[0] < st.concentrations_ppm[1] && st.concentrations_ppm[1] < st.concentrations_ppm[2],
            ErrorKind::InvalidArgument, "concentrations must be strictly increasing");
    require(st.dwell_s >= 0.0 && st.flat_epsilon_v >= 0.0, ErrorKind::InvalidArgument, "dwell/epsilon");
}

struct CalibrationRecord {
    int sensor_id = 0;
    double v_low = 0.0;
    double v_high = 0.0;
    double fitted_slope = 0.0;
    double fitted_intercept = 0.0;
    Outcome outcome = Outcome::Pass;
    double started_s = 0.0;
    double finished_s = 0.0;
};

/// Runs clean -> low -> high -> clean with one dwell per step on the simulated
/// clock. Only the low/high readings enter the fit; the water steps rinse.
inline CalibrationRecord maintenance_sequence(SensorUnit& sensor, const CalibrationStation& station, Rng& rng,
                                              double& clock_s) {
    CalibrationRecord rec;
    rec.sensor_id = sensor.id;
    rec.started_s = clock_s;

    clock_s += station.dwell_s; // rinse
    clock_s += station.dwell_s;
    rec.v_low = read_voltage(sensor.response, station.concentrations_ppm[1], rng);
    clock_s += station.dwell_s;
    rec.v_high = read_voltage(sensor.response, station.concentrations_ppm[2], rng);
    clock_s += station.dwell_s; // rinse

    const LinearFit fit =
        two_point_calibrate(rec.v_low, rec.v_high, station.concentrations_ppm[1], station.concentrations_ppm[2]);
    rec.fitted_slope = fit.slope;
    rec.fitted_intercept = fit.intercept;
    rec.outcome = validate_calibration(rec.v_low, rec.v_high, station.flat_epsilon_v, station.polarity);
    rec.finished_s = clock_s;

    sensor.calibrated = rec.outcome == Outcome::Pass;
    sensor.fit = sensor.calibrated ? std::optional<LinearFit>(fit) : std::nullopt;
    return rec;
}

} // namespace stalkprobe::calibration
