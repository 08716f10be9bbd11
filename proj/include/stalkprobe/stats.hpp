#pragma once

#include <cmath>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "mission.hpp"

namespace stalkprobe::harness {

using json = nlohmann::ordered_json;

/// Two-sided 95% normal quantile.
inline constexpr double kZ95 = 1.959963984540054;

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

/// Wilson score interval for k successes in n trials.
inline Interval wilson_interval(long k, long n, double z = kZ95) {
    require(n > 0, ErrorKind::EmptyInput, "wilson interval of zero trials");
    const double nn = static_cast<double>(n);
    const double p = static_cast<double>(k) / nn;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / nn;
    const double center = (p + z2 / (2.0 * nn)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
    return {center - half, center + half};
}

struct Rate {
    long successes = 0;
    long trials = 0;
    double rate = 0.0;
    Interval wilson;
};

inline Rate make_rate(long k, long n) {
    if (n == 0) return {k, n, 0.0, {0.0, 1.0}};
    return {k, n, static_cast<double>(k) / static_cast<double>(n), wilson_interval(k, n)};
}

/// Staged success funnel. Cumulative rates use all trials as denominator;
/// conditional rates use the previous stage's successes.
struct FunnelStats {
    long n_trials = 0;
    Rate detect, grasp, insert, depth, pith;
    Rate grasp_given_detect, insert_given_grasp, depth_given_insert, pith_given_depth;
    Rate within_45deg; ///< over inserted trials only

    double detect_rate() const { return detect.rate; }
    double grasp_rate() const { return grasp.rate; }
    double insert_rate() const { return insert.rate; }
    double depth_rate() const { return depth.rate; }
    double pith_rate() const { return pith.rate; }
};

inline FunnelStats funnel_stats(const std::vector<mission::TrialRecord>& records) {
    require(!records.empty(), ErrorKind::EmptyInput, "no trial records");
    long d = 0, g = 0, i = 0, dep = 0, p = 0, w = 0;
    for (const auto& t : records) {
        d += t.detected;
        g += t.grasped;
        i += t.inserted;
        dep += t.depth_ok;
        p += t.in_pith;
        if (t.inserted && t.angle_error_deg && *t.angle_error_deg <= 45.0) ++w;
    }
    const long n = static_cast<long>(records.size());
    FunnelStats s;
    s.n_trials = n;
    s.detect = make_rate(d, n);
    s.grasp = make_rate(g, n);
    s.insert = make_rate(i, n);
    s.depth = make_rate(dep, n);
    s.pith = make_rate(p, n);
    s.grasp_given_detect = make_rate(g, d);
    s.insert_given_grasp = make_rate(i, g);
    s.depth_given_insert = make_rate(dep, i);
    s.pith_given_depth = make_rate(p, dep);
    s.within_45deg = make_rate(w, i);
    return s;
}

inline json to_json(const Rate& r) {
    return json{{"successes", r.successes},
                {"trials", r.trials},
                {"rate", r.rate},
                {"wilson95", json::array({r.wilson.lo, r.wilson.hi})}};
}

inline json to_json(const FunnelStats& s) {
    return json{{"n_trials", s.n_trials},
                {"cumulative",
                 {{"detect", to_json(s.detect)},
                  {"grasp", to_json(s.grasp)},
                  {"insert", to_json(s.insert)},
                  {"depth", to_json(s.depth)},
                  {"pith", to_json(s.pith)}}},
                {"conditional",
                 {{"grasp_given_detect", to_json(s.grasp_given_detect)},
                  {"insert_given_grasp", to_json(s.insert_given_grasp)},
                  {"depth_given_insert", to_json(s.depth_given_insert)},
                  {"pith_given_depth", to_json(s.pith_given_depth)}}},
                {"within_45deg_of_inserted", to_json(s.within_45deg)}};
}

} // namespace stalkprobe::harness
