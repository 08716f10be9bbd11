#include <gtest/gtest.h>

#include <cmath>

#include "stalkprobe/perception.hpp"
#include "stalkprobe/serialization.hpp"
#include "support.hpp"

using namespace stalkprobe;
using namespace stalkprobe::perception;

namespace {

DetectionModel quiet() {
    DetectionModel m;
    m.p_leaf_false_positive = 0.0;
    m.width_noise_sigma_mm = 0.0;
    m.position_noise_sigma_mm = 0.0;
    return m;
}

StalkInstance oval(double orientation = 0.0) {
    StalkInstance s;
    s.cross_section = {12.5, 9.0, orientation, 0.8};
    return s;
}

geometry::FieldLayout small_field() {
    geometry::FieldLayout f;
    f.rows = {0.0};
    for (int i = 0; i < 3; ++i) {
        StalkInstance s;
        s.id = i;
        s.base_position_m = {0.2 * i, 0.3};
        f.stalks.push_back(s);
    }
    return f;
}

Detection det(int id, double width, double conf = 0.8, double dist = 0.3) {
    Detection d;
    d.id = id;
    d.stalk_id = id;
    d.est_width_mm = width;
    d.confidence = conf;
    d.distance_m = dist;
    return d;
}

nlohmann::ordered_json as_json(const std::vector<Detection>& ds) {
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const auto& d : ds)
        j.push_back({{"id", d.id},
                     {"stalk", d.stalk_id ? *d.stalk_id : -1},
                     {"pos", d.est_position_m},
                     {"width", d.est_width_mm},
                     {"conf", d.confidence},
                     {"dist", d.distance_m}});
    return j;
}

} // namespace

TEST(Scan, NoiselessDetectionsMatchTruth) {
    const auto field = small_field();
    Rng rng(1);
    const auto ds = scan(field, {0.0, 0.0}, quiet(), rng);
    ASSERT_EQ(ds.size(), 3u);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        EXPECT_EQ(ds[i].stalk_id, static_cast<int>(i));
        EXPECT_EQ(ds[i].est_position_m, field.stalks[i].base_position_m);
        EXPECT_GE(ds[i].confidence, 0.0);
        EXPECT_LE(ds[i].confidence, 1.0);
        EXPECT_GT(ds[i].est_width_mm, 0.0);
    }
}

TEST(Scan, OutOfRangeStalksAreSkipped) {
    auto field = small_field();
    field.stalks[2].base_position_m = {5.0, 5.0};
    Rng rng(1);
    EXPECT_EQ(scan(field, {0.0, 0.0}, quiet(), rng).size(), 2u);
    EXPECT_EQ(scan(field, {0.0, 0.0}, quiet(), rng, {0}).size(), 1u);
}

TEST(Scan, CertainLeafGivesOnePhantom) {
    auto field = small_field();
    field.leaf_sites = {{0.1, 0.1}};
    auto m = quiet();
    m.p_leaf_false_positive = 1.0;
    Rng rng(1);
    const auto ds = scan(field, {0.0, 0.0}, m, rng);
    int phantoms = 0;
    for (const auto& d : ds) phantoms += d.phantom() ? 1 : 0;
    EXPECT_EQ(phantoms, 1);
    EXPECT_EQ(ds.back().leaf_site, 0);
}

TEST(Scan, PhantomRateMatchesProbability) {
    geometry::FieldLayout field;
    field.leaf_sites = {{0.1, 0.1}};
    DetectionModel m;
    Rng rng(30);
    int phantoms = 0;
    const int n = 30000;
    for (int i = 0; i < n; ++i) phantoms += static_cast<int>(scan(field, {0.0, 0.0}, m, rng).size());
    EXPECT_NEAR(static_cast<double>(phantoms) / n, 1.0 / 30.0, 3.0 * std::sqrt((1.0 / 30) * (29.0 / 30) / n));
}

TEST(Scan, DeterministicForSeed) {
    auto field = small_field();
    field.leaf_sites = {{0.1, 0.1}, {0.3, 0.2}};
    DetectionModel m;
    m.p_leaf_false_positive = 0.5;
    Rng a(77), b(77);
    EXPECT_EQ(as_json(scan(field, {0.0, 0.0}, m, a)).dump(), as_json(scan(field, {0.0, 0.0}, m, b)).dump());
}

TEST(Select, SingleDetection) {
    const std::vector<Detection> ds{det(0, 20.0)};
    EXPECT_EQ(select_stalk(ds).id, 0);
}

TEST(Select, WiderWins) {
    const std::vector<Detection> ds{det(0, 18.0), det(1, 25.0)};
    EXPECT_EQ(select_stalk(ds).id, 1);
}

TEST(Select, TiesGoToLowestId) {
    std::vector<Detection> ds{det(2, 21.0), det(1, 21.0), det(3, 21.0)};
    EXPECT_EQ(select_stalk(ds).id, 1);
    std::swap(ds[0], ds[2]);
    EXPECT_EQ(select_stalk(ds).id, 1);
}

TEST(Select, ScoreFormula) {
    const auto d = det(0, 35.0, 0.5, 0.3);
    EXPECT_NEAR(score(d, {}), (0.5 + 0.5 + 1.0) / 3.0, 1e-12);
}

TEST(Select, EmptyListThrows) {
    try {
        select_stalk({});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::NoDetections);
    }
}

TEST(MeasureWidth, Noiseless) {
    Rng rng(1);
    EXPECT_DOUBLE_EQ(measure_width(oval(), 90.0, quiet(), rng), 25.0);
    EXPECT_DOUBLE_EQ(measure_width(oval(), 0.0, quiet(), rng), 18.0);
}

TEST(MeasureWidth, NoiseStandardDeviation) {
    DetectionModel m;
    Rng rng(10);
    const int n = 10000;
    double sum = 0, sq = 0;
    for (int i = 0; i < n; ++i) {
        const double w = measure_width(oval(), 45.0, m, rng);
        sum += w;
        sq += w * w;
    }
    const double mean = sum / n;
    const double sd = std::sqrt((sq - n * mean * mean) / (n - 1));
    EXPECT_GE(sd, 0.95);
    EXPECT_LE(sd, 1.05);
}

TEST(MeasureWidth, FlooredAtMinimum) {
    DetectionModel m;
    m.width_noise_sigma_mm = 100.0;
    Rng rng(2);
    for (int i = 0; i < 1000; ++i) EXPECT_GE(measure_width(oval(), 0.0, m, rng), kMinWidthMm);
}

TEST(Sweep, PicksWidestSweptAngle) {
    Rng rng(1);
    const auto r = sweep_select(oval(), SweepPlan{70.0, 15.0, 3}, quiet(), rng);
    int best = 0;
    double widest = -1.0;
    for (int k = 0; k < 3; ++k) {
        const double w = oracle::projected_width(oval().cross_section, 70.0 + 15.0 * k);
        if (w > widest) {
            widest = w;
            best = k;
        }
    }
    EXPECT_EQ(best, 1);
    EXPECT_DOUBLE_EQ(r.chosen_angle_deg, 85.0);
    EXPECT_NEAR(r.measured_width_mm, widest, 1e-6);
    ASSERT_EQ(r.views.size(), 3u);
}

TEST(Sweep, CircleKeepsStartAngle) {
    StalkInstance s;
    s.cross_section = {10.5, 10.5, 0.0, 0.8};
    Rng rng(1);
    EXPECT_DOUBLE_EQ(sweep_select(s, SweepPlan{40.0, 15.0, 3}, quiet(), rng).chosen_angle_deg, 40.0);
}

TEST(Sweep, NoiselessChoiceIsOracleArgmax) {
    gen::for_all(1000, 17, [](gen::Gen& g, int) {
        StalkInstance s;
        s.cross_section = g.ellipse();
        const SweepPlan plan{g.real(0.0, 180.0), 15.0, 3};
        Rng rng(1);
        const auto r = sweep_select(s, plan, quiet(), rng);
        double widest = 0.0;
        for (int k = 0; k < 3; ++k) widest = std::max(widest, oracle::projected_width(s.cross_section, plan.angle(k)));
        EXPECT_NEAR(r.measured_width_mm, widest, 1e-6);
        EXPECT_GE(r.measured_width_mm, geometry::apparent_width(s.cross_section, plan.start_angle_deg));
    });
}

TEST(AngleError, Examples) {
    const auto cs = oval().cross_section;
    EXPECT_NEAR(angle_error_to_optimal(90.0, cs), 0.0, 1e-12);
    EXPECT_NEAR(angle_error_to_optimal(270.0, cs), 0.0, 1e-12);
    EXPECT_NEAR(angle_error_to_optimal(210.0, cs), 60.0, 1e-12);
}

TEST(AngleError, BoundedAndSymmetric) {
    gen::for_all(10000, 19, [](gen::Gen& g, int) {
        auto cs = g.ellipse();
        cs.semi_major_mm = cs.semi_minor_mm * g.real(1.05, 1.6);
        const double opt = geometry::optimal_view_angle(cs).angle_deg;
        const double delta = g.real(-360.0, 360.0);
        const double e = angle_error_to_optimal(opt + delta, cs);
        EXPECT_GE(e, 0.0);
        EXPECT_LE(e, 90.0);
        EXPECT_NEAR(e, angle_error_to_optimal(opt - delta, cs), 1e-9);
    });
}
