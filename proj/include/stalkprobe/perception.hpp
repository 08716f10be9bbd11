#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <vector>

#include "error.hpp"
#include "geometry.hpp"
#include "random.hpp"

namespace stalkprobe::perception {

using geometry::StalkCrossSection;
using geometry::StalkInstance;
using geometry::Vec2;

struct DetectionModel {
    double p_leaf_false_positive = 1.0 / 30.0;
    double width_noise_sigma_mm = 1.0;
    double position_noise_sigma_mm = 3.0;
    double max_detect_range_m = 0.6;
    double stalk_confidence_alpha = 8.0;
    double stalk_confidence_beta = 2.0;
    double phantom_confidence_alpha = 4.0;
    double phantom_confidence_beta = 4.0;
    double phantom_width_mean_mm = 21.0;
    double phantom_width_sigma_mm = 4.0;
};

inline void validate(const DetectionModel& m) {
    require(m.p_leaf_false_positive >= 0.0 && m.p_leaf_false_positive <= 1.0, ErrorKind::InvalidArgument,
            "p_leaf_false_positive must lie in [0, 1]");
    require(m.width_noise_sigma_mm >= 0.0 && m.position_noise_sigma_mm >= 0.0 && m.phantom_width_sigma_mm >= 0.0,
            ErrorKind::InvalidArgument, "sigmas must be non-negative");
    require(m.max_detect_range_m > 0.0, ErrorKind::InvalidArgument, "detection range must be positive");
    require(m.stalk_confidence_alpha > 0 && m.stalk_confidence_beta > 0 && m.phantom_confidence_alpha > 0 &&
                m.phantom_confidence_beta > 0,
            ErrorKind::InvalidArgument, "beta shape parameters must be positive");
}

inline constexpr double kMinWidthMm = 0.1;
inline constexpr double kWidthTieMm = 1e-9;

struct Detection {
    int id = 0;                      ///< position in the scan output
    std::optional<int> stalk_id;     ///< empty for a leaf false positive
    std::optional<int> leaf_site;    ///< set for phantoms
    Vec2 est_position_m;
    double est_width_mm = 0.0;
    double confidence = 0.0;
    double distance_m = 0.0;

    bool phantom() const { return !stalk_id.has_value(); }
};

/// Noisy projected width: the pixel pipeline reduced to geometry plus noise.
inline double measure_width(const StalkInstance& stalk, double view_angle_deg, const DetectionModel& m, Rng& rng) {
    const double w = geometry::apparent_width(stalk.cross_section, view_angle_deg);
    return std::max(kMinWidthMm, rng.normal(w, m.width_noise_sigma_mm));
}

/// Heading from a to b in degrees, field frame.
inline double heading_deg(Vec2 from, Vec2 to) {
    return geometry::rad_to_deg(std::atan2(to.y - from.y, to.x - from.x));
}

/// Detections of every in-range stalk (minus `exclude`), then leaf phantoms.
inline std::vector<Detection> scan(const geometry::FieldLayout& field, Vec2 base_pose_m, const DetectionModel& m,
                                   Rng& rng, const std::set<int>& exclude = {}) {
    std::vector<Detection> out;
    const double pos_sigma_m = m.position_noise_sigma_mm / 1000.0;
    for (const auto& s : field.stalks) {
        if (exclude.contains(s.id)) continue;
        const double dist = (s.base_position_m - base_pose_m).norm();
        if (dist > m.max_detect_range_m) continue;
        Detection d;
        d.id = static_cast<int>(out.size());
        d.stalk_id = s.id;
        d.est_position_m = {rng.normal(s.base_position_m.x, pos_sigma_m), rng.normal(s.base_position_m.y, pos_sigma_m)};
        d.est_width_mm = measure_width(s, heading_deg(base_pose_m, s.base_position_m), m, rng);
        d.confidence = rng.beta(m.stalk_confidence_alpha, m.stalk_confidence_beta);
        d.distance_m = (d.est_position_m - base_pose_m).norm();
        out.push_back(d);
    }
    for (std::size_t k = 0; k < field.leaf_sites.size(); ++k) {
        const Vec2 leaf = field.leaf_sites[k];
        if ((leaf - base_pose_m).norm() > m.max_detect_range_m) continue;
        if (!rng.bernoulli(m.p_leaf_false_positive)) continue;
        Detection d;
        d.id = static_cast<int>(out.size());
        d.leaf_site = static_cast<int>(k);
        d.est_position_m = {rng.normal(leaf.x, pos_sigma_m), rng.normal(leaf.y, pos_sigma_m)};
        d.est_width_mm = std::max(kMinWidthMm, rng.normal(m.phantom_width_mean_mm, m.phantom_width_sigma_mm));
        d.confidence = rng.beta(m.phantom_confidence_alpha, m.phantom_confidence_beta);
        d.distance_m = (d.est_position_m - base_pose_m).norm();
        out.push_back(d);
    }
    return out;
}

struct SelectionWeights {
    double distance = 1.0 / 3.0;
    double confidence = 1.0 / 3.0;
    double width = 1.0 / 3.0;
    double max_range_m = 0.6;
    double reference_width_mm = 35.0;
};

inline double score(const Detection& d, const SelectionWeights& w) {
    return w.distance * (1.0 - d.distance_m / w.max_range_m) + w.confidence * d.confidence +
           w.width * (d.est_width_mm / w.reference_width_mm);
}

inline const Detection& select_stalk(const std::vector<Detection>& detections, const SelectionWeights& w = {}) {
    require(!detections.empty(), ErrorKind::NoDetections, "nothing to select");
    const Detection* best = &detections.front();
    double best_score = score(*best, w);
    for (const auto& d : detections) {
        const double s = score(d, w);
        if (s > best_score || (s == best_score && d.id < best->id)) {
            best = &d;
            best_score = s;
        }
    }
    return *best;
}

// ---------------------------------------------------------------------------
// Multi-view sweep
// ---------------------------------------------------------------------------

struct SweepPlan {
    double start_angle_deg = 0.0;
    double increment_deg = 15.0;
    int n_views = 3;

    double span_deg() const { return (n_views - 1) * increment_deg; }
    double angle(int k) const { return geometry::normalize_half_turn(start_angle_deg + k * increment_deg); }
};

inline void validate(const SweepPlan& p) {
    require(p.n_views >= 1, ErrorKind::InvalidArgument, "sweep needs at least one view");
    require(p.increment_deg >= 0.0, ErrorKind::InvalidArgument, "sweep increment must be non-negative");
}

struct SweepView {
    double angle_deg = 0.0;
    double measured_width_mm = 0.0;
};

struct SweepResult {
    double chosen_angle_deg = 0.0;
    double measured_width_mm = 0.0;
    std::vector<SweepView> views;
};

/// Widest measured view wins; ties keep the earliest view (toward start).
inline SweepResult sweep_select(const StalkInstance& stalk, const SweepPlan& plan, const DetectionModel& m,
                                Rng& rng) {
    validate(plan);
    SweepResult r;
    for (int k = 0; k < plan.n_views; ++k) {
        const double angle = plan.angle(k);
        r.views.push_back({angle, measure_width(stalk, angle, m, rng)});
    }
    // Widths equal up to rounding count as ties.
    const SweepView* best = &r.views.front();
    for (const auto& v : r.views)
        if (v.measured_width_mm > best->measured_width_mm + kWidthTieMm) best = &v;
    r.chosen_angle_deg = best->angle_deg;
    r.measured_width_mm = best->measured_width_mm;
    return r;
}

/// Angular distance to the optimal view, folded by the 180 deg symmetry.
/// Zero for a circular section, where every view is optimal.
inline double angle_error_to_optimal(double chosen_angle_deg, const StalkCrossSection& cs) {
    const auto opt = geometry::optimal_view_angle(cs);
    if (opt.degenerate) return 0.0;
    const double diff = geometry::normalize_half_turn(chosen_angle_deg - opt.angle_deg);
    return std::min(diff, 180.0 - diff);
}

} // namespace stalkprobe::perception
