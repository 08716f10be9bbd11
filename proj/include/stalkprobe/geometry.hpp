#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"
#include "random.hpp"

namespace stalkprobe::geometry {

constexpr double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }
constexpr double rad_to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

/// Wraps an angle into [0, 180).
inline double normalize_half_turn(double deg) {
    double r = std::fmod(deg, 180.0);
    if (r < 0.0) r += 180.0;
    if (r >= 180.0) r -= 180.0;
    return r;
}

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
    friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
    friend Vec2 operator*(double s, Vec2 v) { return {s * v.x, s * v.y}; }
    friend bool operator==(const Vec2&, const Vec2&) = default;
    double norm() const { return std::hypot(x, y); }
};

struct Band {
    double lo = 0.0;
    double hi = 0.0;
    bool contains(double v) const { return v >= lo && v <= hi; }
    friend bool operator==(const Band&, const Band&) = default;
};

/// Elliptical stalk cross-section. The pith is the concentric ellipse obtained
/// by scaling both semi-axes by pith_scale.
struct StalkCrossSection {
    double semi_major_mm = 10.5;
    double semi_minor_mm = 10.5;
    double orientation_deg = 0.0; ///< major axis heading in the field frame, [0, 180)
    double pith_scale = 0.8;

    friend bool operator==(const StalkCrossSection&, const StalkCrossSection&) = default;
};

inline constexpr Band kDefaultDiameterBand{15.0, 35.0};

inline void validate(const StalkCrossSection& cs) {
    require(cs.semi_minor_mm > 0.0, ErrorKind::InvalidArgument, "semi_minor_mm must be positive");
    require(cs.semi_major_mm >= cs.semi_minor_mm, ErrorKind::InvalidArgument,
            "semi_major_mm must be >= semi_minor_mm");
    require(cs.pith_scale > 0.0 && cs.pith_scale <= 1.0, ErrorKind::InvalidArgument,
            "pith_scale must lie in (0, 1]");
}

/// Soft check: out-of-band stalks are legal and simulate as grasp failures.
inline bool within_plausible_band(const StalkCrossSection& cs, Band band = kDefaultDiameterBand) {
    return band.contains(2.0 * cs.semi_minor_mm) && band.contains(2.0 * cs.semi_major_mm);
}

struct StalkInstance {
    int id = 0;
    Vec2 base_position_m;
    StalkCrossSection cross_section;
    double height_cm = 56.0;
    double ground_nitrate_ppm = 1000.0;

    friend bool operator==(const StalkInstance&, const StalkInstance&) = default;
};

struct FieldLayout {
    double row_spacing_m = 0.75;
    std::vector<double> rows;
    std::vector<StalkInstance> stalks;
    std::vector<Vec2> leaf_sites;

    friend bool operator==(const FieldLayout&, const FieldLayout&) = default;
};

struct SensorGeometry {
    double spike_width_mm = 5.0;
    double spike_length_mm = 12.0;
    double spike_thickness_mm = 1.6;
    double electrode_near_tip_mm = 3.0;
    double electrode_separation_mm = 5.5;
    double required_depth_mm = 8.5;
    Band insertion_height_band_cm{1.3, 2.5};
};

inline void validate(const SensorGeometry& g) {
    require(g.electrode_near_tip_mm + g.electrode_separation_mm <= g.spike_length_mm,
            ErrorKind::InvalidArgument, "electrodes must lie on the spike");
    require(std::abs(g.required_depth_mm - (g.electrode_near_tip_mm + g.electrode_separation_mm)) < 1e-9,
            ErrorKind::InvalidArgument, "required depth must equal the outer electrode position");
    require(g.insertion_height_band_cm.lo < g.insertion_height_band_cm.hi, ErrorKind::InvalidRange,
            "insertion height band is empty");
}

// ---------------------------------------------------------------------------
// Cross-section queries
// ---------------------------------------------------------------------------

/// Support width of the ellipse seen from direction view_angle_deg (field
/// frame): 2*sqrt(a^2 sin^2(t) + b^2 cos^2(t)) with t measured from the major axis.
inline double apparent_width(const StalkCrossSection& cs, double view_angle_deg) {
    const double t = deg_to_rad(view_angle_deg - cs.orientation_deg);
    const double s = std::sin(t);
    const double c = std::cos(t);
    const double a = cs.semi_major_mm;
    const double b = cs.semi_minor_mm;
    return 2.0 * std::sqrt(a * a * s * s + b * b * c * c);
}

struct OptimalView {
    double angle_deg = 0.0;
    bool degenerate = false; ///< circular section: every angle is optimal
};

inline OptimalView optimal_view_angle(const StalkCrossSection& cs) {
    if (cs.semi_major_mm == cs.semi_minor_mm) return {0.0, true};
    return {normalize_half_turn(cs.orientation_deg + 90.0), false};
}

/// Entry/exit parameters of an insertion ray against an ellipse scaled by
/// `scale`. The ray runs along insertion_angle_deg and passes the ellipse
/// center at signed perpendicular distance lateral_offset_mm; the parameter is
/// arc length measured from the foot of that perpendicular.
struct RayHit {
    double t_in = 0.0;
    double t_out = 0.0;
    double chord() const { return t_out - t_in; }
};

struct InsertionRay {
    Vec2 origin; ///< in the ellipse's principal-axis frame
    Vec2 direction;

    Vec2 at(double t) const { return origin + t * direction; }
};

inline InsertionRay make_ray(const StalkCrossSection& cs, double insertion_angle_deg, double lateral_offset_mm) {
    const double t = deg_to_rad(insertion_angle_deg - cs.orientation_deg);
    const Vec2 dir{std::cos(t), std::sin(t)};
    const Vec2 normal{-dir.y, dir.x};
    return {lateral_offset_mm * normal, dir};
}

inline std::optional<RayHit> intersect(const StalkCrossSection& cs, const InsertionRay& ray, double scale = 1.0) {
    const double a2 = std::pow(cs.semi_major_mm * scale, 2);
    const double b2 = std::pow(cs.semi_minor_mm * scale, 2);
    const auto [px, py] = ray.origin;
    const auto [ux, uy] = ray.direction;
    const double qa = ux * ux / a2 + uy * uy / b2;
    const double qb = 2.0 * (px * ux / a2 + py * uy / b2);
    const double qc = px * px / a2 + py * py / b2 - 1.0;
    const double disc = qb * qb - 4.0 * qa * qc;
    if (disc <= 0.0) return std::nullopt;
    const double root = std::sqrt(disc);
    return RayHit{(-qb - root) / (2.0 * qa), (-qb + root) / (2.0 * qa)};
}

inline bool inside_ellipse(const StalkCrossSection& cs, Vec2 p, double scale = 1.0, double tol = 1e-9) {
    const double a = cs.semi_major_mm * scale;
    const double b = cs.semi_minor_mm * scale;
    return (p.x * p.x) / (a * a) + (p.y * p.y) / (b * b) <= 1.0 + tol;
}

/// Full chord of the outer ellipse along the displaced insertion ray; 0 on a miss.
inline double chord_depth(const StalkCrossSection& cs, double insertion_angle_deg, double lateral_offset_mm) {
    const auto hit = intersect(cs, make_ray(cs, insertion_angle_deg, lateral_offset_mm));
    return hit ? hit->chord() : 0.0;
}

/// Both electrodes must sit inside the pith ellipse. Electrode positions are
/// measured from the entry point along the ray: depth - near_tip and
/// depth - near_tip - separation.
inline bool electrodes_in_pith(const StalkCrossSection& cs, double insertion_angle_deg, double lateral_offset_mm,
                               double achieved_depth_mm, const SensorGeometry& geom) {
    require(achieved_depth_mm >= 0.0, ErrorKind::InvalidArgument, "achieved depth must be non-negative");
    const double tip_electrode = achieved_depth_mm - geom.electrode_near_tip_mm;
    const double back_electrode = tip_electrode - geom.electrode_separation_mm;
    if (back_electrode < 0.0) return false;

    const auto ray = make_ray(cs, insertion_angle_deg, lateral_offset_mm);
    const auto hit = intersect(cs, ray);
    if (!hit) return false;
    return inside_ellipse(cs, ray.at(hit->t_in + tip_electrode), cs.pith_scale) &&
           inside_ellipse(cs, ray.at(hit->t_in + back_electrode), cs.pith_scale);
}

// ---------------------------------------------------------------------------
// Nitrate height gradient
// ---------------------------------------------------------------------------

enum class GradientModel { Linear, Compound };

struct GradientConfig {
    GradientModel model = GradientModel::Linear;
    double decay_per_cm = 0.04;
};

inline double nitrate_at_height(double ground_ppm, double height_cm, const GradientConfig& cfg = {}) {
    require(height_cm >= 0.0, ErrorKind::InvalidArgument, "height must be non-negative");
    if (cfg.model == GradientModel::Compound) return ground_ppm * std::pow(1.0 - cfg.decay_per_cm, height_cm);
    return ground_ppm * std::max(0.0, 1.0 - cfg.decay_per_cm * height_cm);
}

// ---------------------------------------------------------------------------
// Field generation
// ---------------------------------------------------------------------------

struct FieldGenConfig {
    int n_stalks = 30;
    int n_rows = 2;
    double row_spacing_m = 0.75;
    double stalk_spacing_m = 0.18;
    double position_jitter_m = 0.02;
    double mean_diameter_mm = 21.0;
    double diameter_sd_mm = 2.5;
    Band diameter_band_mm = kDefaultDiameterBand;
    Band aspect_ratio{1.0, 1.4};
    double pith_scale = 0.8;
    double mean_height_cm = 56.0;
    double height_sd_cm = 5.0;
    double mean_ground_nitrate_ppm = 1000.0;
    double ground_nitrate_sd_ppm = 200.0;
    double leaf_sites_per_stalk = 1.0;
    Band leaf_offset_m{0.05, 0.15};
};

inline void validate(const FieldGenConfig& cfg) {
    auto ordered = [](Band b) { return b.lo <= b.hi; };
    require(cfg.n_stalks >= 0 && cfg.n_rows >= 1, ErrorKind::InvalidRange, "field needs at least one row");
    require(ordered(cfg.diameter_band_mm) && cfg.diameter_band_mm.lo > 0.0, ErrorKind::InvalidRange,
            "diameter band");
    require(ordered(cfg.aspect_ratio) && cfg.aspect_ratio.lo >= 1.0, ErrorKind::InvalidRange,
            "aspect ratio range must be ordered and >= 1");
    require(ordered(cfg.leaf_offset_m) && cfg.leaf_offset_m.lo >= 0.0, ErrorKind::InvalidRange, "leaf offset");
    require(cfg.mean_diameter_mm > 0.0 && cfg.diameter_sd_mm >= 0.0, ErrorKind::InvalidRange, "diameter");
    require(cfg.pith_scale > 0.0 && cfg.pith_scale <= 1.0, ErrorKind::InvalidRange, "pith_scale");
    require(cfg.row_spacing_m > 0.0 && cfg.stalk_spacing_m > 0.0, ErrorKind::InvalidRange, "spacing");
    require(cfg.height_sd_cm >= 0.0 && cfg.ground_nitrate_sd_ppm >= 0.0 && cfg.leaf_sites_per_stalk >= 0.0,
            ErrorKind::InvalidRange, "spreads must be non-negative");
}

/// Cross-section with mean diameter d = a + b and aspect ratio a / b.
inline StalkCrossSection cross_section_from(double mean_diameter_mm, double aspect, double orientation_deg,
                                            double pith_scale) {
    const double b = mean_diameter_mm / (1.0 + aspect);
    return {aspect * b, b, normalize_half_turn(orientation_deg), pith_scale};
}

inline FieldLayout generate_field(const FieldGenConfig& cfg, std::uint64_t seed) {
    validate(cfg);
    Rng rng(seed, 0xF1E1D);
    FieldLayout field;
    field.row_spacing_m = cfg.row_spacing_m;
    for (int r = 0; r < cfg.n_rows; ++r) field.rows.push_back(r * cfg.row_spacing_m);

    const Band band = cfg.diameter_band_mm;
    for (int i = 0; i < cfg.n_stalks; ++i) {
        const int row = i % cfg.n_rows;
        const int along = i / cfg.n_rows;
        StalkInstance s;
        s.id = i;
        s.base_position_m = {along * cfg.stalk_spacing_m + rng.uniform(-1.0, 1.0) * cfg.position_jitter_m,
                             field.rows[row]};

        const double aspect = rng.uniform(cfg.aspect_ratio.lo, cfg.aspect_ratio.hi);
        const double orientation = rng.uniform(0.0, 180.0);
        // Diameters outside the band are redrawn; the clamp only triggers for
        // degenerate configs whose mean sits far outside the band.
        StalkCrossSection cs;
        bool ok = false;
        for (int attempt = 0; attempt < 64 && !ok; ++attempt) {
            cs = cross_section_from(rng.normal(cfg.mean_diameter_mm, cfg.diameter_sd_mm), aspect, orientation,
                                    cfg.pith_scale);
            ok = within_plausible_band(cs, band);
        }
        if (!ok) {
            const double d = std::clamp(cfg.mean_diameter_mm, band.lo * (1.0 + aspect) / 2.0,
                                        band.hi * (1.0 + aspect) / (2.0 * aspect));
            cs = cross_section_from(d, aspect, orientation, cfg.pith_scale);
        }
        s.cross_section = cs;
        s.height_cm = std::max(1.0, rng.normal(cfg.mean_height_cm, cfg.height_sd_cm));
        s.ground_nitrate_ppm = std::max(0.0, rng.normal(cfg.mean_ground_nitrate_ppm, cfg.ground_nitrate_sd_ppm));
        field.stalks.push_back(s);
    }

    const auto n_leaves = static_cast<int>(std::lround(cfg.leaf_sites_per_stalk * cfg.n_stalks));
    for (int k = 0; k < n_leaves && !field.stalks.empty(); ++k) {
        const auto& host = field.stalks[static_cast<std::size_t>(k) % field.stalks.size()];
        const double heading = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double dist = rng.uniform(cfg.leaf_offset_m.lo, cfg.leaf_offset_m.hi);
        field.leaf_sites.push_back(host.base_position_m + Vec2{dist * std::cos(heading), dist * std::sin(heading)});
    }
    return field;
}

} // namespace stalkprobe::geometry
