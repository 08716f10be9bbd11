#pragma once

// Independent oracles and random generators shared by the suites. The
// oracles work in the field frame with brute-force numerics and never call
// the closed forms they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <random>

#include "stalkprobe/geometry.hpp"

namespace oracle {

using stalkprobe::geometry::StalkCrossSection;
using stalkprobe::geometry::Vec2;

inline double rad(double deg) { return deg * std::numbers::pi / 180.0; }

/// Implicit ellipse value at a field-frame point; <= 0 inside.
inline double ellipse_f(const StalkCrossSection& cs, Vec2 p, double scale = 1.0) {
    const double o = rad(cs.orientation_deg);
    const double u = p.x * std::cos(o) + p.y * std::sin(o);
    const double v = -p.x * std::sin(o) + p.y * std::cos(o);
    const double a = cs.semi_major_mm * scale, b = cs.semi_minor_mm * scale;
    return u * u / (a * a) + v * v / (b * b) - 1.0;
}

inline Vec2 boundary_point(const StalkCrossSection& cs, double theta) {
    const double o = rad(cs.orientation_deg);
    const double u = cs.semi_major_mm * std::cos(theta), v = cs.semi_minor_mm * std::sin(theta);
    return {u * std::cos(o) - v * std::sin(o), u * std::sin(o) + v * std::cos(o)};
}

/// Extent of the boundary across the viewing direction: sample the boundary
/// at n points, then polish the extreme with golden-section search.
inline double projected_width(const StalkCrossSection& cs, double view_deg, int n = 4096) {
    const Vec2 normal{-std::sin(rad(view_deg)), std::cos(rad(view_deg))};
    auto proj = [&](double th) {
        const auto p = boundary_point(cs, th);
        return p.x * normal.x + p.y * normal.y;
    };
    const double step = 2.0 * std::numbers::pi / n;
    int best = 0;
    for (int i = 1; i < n; ++i)
        if (proj(i * step) > proj(best * step)) best = i;
    double lo = (best - 1) * step, hi = (best + 1) * step;
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int it = 0; it < 200; ++it) {
        const double m1 = hi - g * (hi - lo), m2 = lo + g * (hi - lo);
        if (proj(m1) < proj(m2))
            lo = m1;
        else
            hi = m2;
    }
    // The ellipse is centrally symmetric, so the width is twice the support.
    return 2.0 * proj(0.5 * (lo + hi));
}

struct Chord {
    Vec2 entry;
    Vec2 exit;
    double length = 0.0;
};

/// Entry/exit of the displaced insertion ray found by bisection on the
/// implicit function, starting from the ray's closest approach to the center.
inline std::optional<Chord> chord(const StalkCrossSection& cs, double angle_deg, double offset_mm) {
    const Vec2 d{std::cos(rad(angle_deg)), std::sin(rad(angle_deg))};
    const Vec2 n{-d.y, d.x};
    auto at = [&](double t) { return Vec2{offset_mm * n.x + t * d.x, offset_mm * n.y + t * d.y}; };
    auto f = [&](double t) { return ellipse_f(cs, at(t)); };

    const double reach = 4.0 * cs.semi_major_mm + std::abs(offset_mm);
    double lo = -reach, hi = reach;
    for (int it = 0; it < 300; ++it) {
        const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
        if (f(m1) < f(m2))
            hi = m2;
        else
            lo = m1;
    }
    const double tmid = 0.5 * (lo + hi);
    if (f(tmid) >= 0.0) return std::nullopt;

    auto root = [&](double inside, double outside) {
        for (int it = 0; it < 200; ++it) {
            const double m = 0.5 * (inside + outside);
            (f(m) <= 0.0 ? inside : outside) = m;
        }
        return 0.5 * (inside + outside);
    };
    const double t_in = root(tmid, -reach), t_out = root(tmid, reach);
    return Chord{at(t_in), at(t_out), t_out - t_in};
}

/// Electrode positions measured from the entry point, checked point-by-point
/// against the scaled ellipse. Returns the smaller |f| margin as well so
/// callers can skip cases that sit on the pith boundary.
struct PithCheck {
    bool inside = false;
    double margin = 0.0;
};

inline PithCheck electrodes_in_pith(const StalkCrossSection& cs, double angle_deg, double offset_mm, double depth_mm,
                                    double near_tip_mm, double separation_mm) {
    const double front = depth_mm - near_tip_mm, back = front - separation_mm;
    if (back < 0.0) return {false, std::abs(back)};
    const auto c = chord(cs, angle_deg, offset_mm);
    if (!c) return {false, 1.0};
    const Vec2 d{std::cos(rad(angle_deg)), std::sin(rad(angle_deg))};
    auto electrode = [&](double s) { return Vec2{c->entry.x + s * d.x, c->entry.y + s * d.y}; };
    const double f1 = ellipse_f(cs, electrode(front), cs.pith_scale);
    const double f2 = ellipse_f(cs, electrode(back), cs.pith_scale);
    return {f1 <= 0.0 && f2 <= 0.0, std::min(std::abs(f1), std::abs(f2))};
}

} // namespace oracle

namespace gen {

/// Small seeded generator for hand-rolled property tests.
class Gen {
public:
    explicit Gen(std::uint64_t seed) : engine_(seed) {}

    double real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(engine_); }
    bool coin(double p = 0.5) { return real(0.0, 1.0) < p; }

    stalkprobe::geometry::StalkCrossSection ellipse() {
        const double b = real(6.0, 14.0);
        const double a = b * real(1.0, 1.6);
        return {a, b, real(0.0, 180.0), real(0.3, 1.0)};
    }

    stalkprobe::geometry::StalkCrossSection circle(double d = 21.0, double pith = 0.8) {
        return {d / 2.0, d / 2.0, 0.0, pith};
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

/// Runs `cases` generated checks; the property receives the case index.
inline void for_all(int cases, std::uint64_t seed, const std::function<void(Gen&, int)>& property) {
    Gen g(seed);
    for (int i = 0; i < cases; ++i) property(g, i);
}

} // namespace gen
