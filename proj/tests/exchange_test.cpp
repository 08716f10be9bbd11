#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "stalkprobe/exchange.hpp"
#include "support.hpp"

using namespace stalkprobe;
using namespace stalkprobe::exchange;

namespace {

const KinematicsConfig kKin;
const FunnelConfig kFunnel;

double phi(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

/// Hooked sensor in the gripper, as after a successful load.
GripperState loaded_gripper(int id) {
    GripperState g = gripper::move_to(kKin, GripperState{}, kKin.lever_phase_end_mm);
    SensorUnit s;
    s.id = id;
    s.location = Location::LoadedInGripper;
    g.loaded_sensor = s;
    return g;
}

Magazine fresh(int capacity = 5, std::uint64_t seed = 1) {
    Rng rng(seed);
    return make_magazine(capacity, calibration::SensorResponseModel{}, rng);
}

ArmErrorModel arm(double sigma, double p_stuck = 0.1) { return {sigma, 4.5, p_stuck}; }

void expect_kind(ErrorKind kind, const auto& fn) {
    try {
        fn();
        ADD_FAILURE() << "no error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), kind);
    }
}

} // namespace

TEST(Funnel, ToleranceFromTipAreaRatio) {
    const auto t = capture_tolerance(kFunnel);
    EXPECT_NEAR(t.x_mm, 10.0 * (1.0 - std::sqrt(0.18)) / 2.0, 1e-12);
    EXPECT_NEAR(t.x_mm, 2.8787, 1e-4);
    EXPECT_NEAR(t.y_mm, 8.0 * (1.0 - std::sqrt(0.18)) / 2.0, 1e-12);
}

TEST(Funnel, CaptureExamples) {
    const auto c0 = funnel_capture(kFunnel, 0.0, 0.0);
    EXPECT_TRUE(c0.captured);
    EXPECT_EQ(c0.residual_x_mm, 0.0);
    EXPECT_EQ(c0.residual_y_mm, 0.0);
    const auto c1 = funnel_capture(kFunnel, 2.8, 0.0);
    EXPECT_TRUE(c1.captured);
    EXPECT_EQ(c1.residual_x_mm, 0.0);
    EXPECT_FALSE(funnel_capture(kFunnel, 3.0, 0.0).captured);
}

TEST(Funnel, CaptureIsMonotone) {
    gen::for_all(10000, 11, [](gen::Gen& g, int) {
        const double dx = g.real(-4.0, 4.0), dy = g.real(-4.0, 4.0);
        if (!funnel_capture(kFunnel, dx, dy).captured) return;
        EXPECT_TRUE(funnel_capture(kFunnel, dx * g.real(0.0, 1.0), dy * g.real(0.0, 1.0)).captured);
    });
}

TEST(Funnel, FunnelMustBeatBareSlot) {
    FunnelConfig c;
    c.slot_tolerance_mm = 3.0;
    EXPECT_THROW(validate(c), Error);
    c = {};
    c.tip_area_ratio = 1.0;
    EXPECT_THROW(validate(c), Error);
    EXPECT_NO_THROW(validate(FunnelConfig{}));
}

TEST(CaptureProbability, ZeroSigmaIsCertain) { EXPECT_EQ(capture_probability(kFunnel, 0.0), 1.0); }

TEST(CaptureProbability, SquareToleranceExample) {
    // Square window: both axes use the 10 mm width.
    FunnelConfig sq;
    sq.slot_height_mm = sq.slot_width_mm;
    const double t = capture_tolerance(sq).x_mm;
    const double one_axis = 2.0 * phi(t / 1.5) - 1.0;
    EXPECT_NEAR(capture_probability(sq, 1.5), one_axis * one_axis, 1e-12);
    EXPECT_NEAR(capture_probability(sq, 1.5), 0.893, 5e-4);

    Rng rng(99);
    const int n = 1'000'000;
    int hits = 0;
    for (int i = 0; i < n; ++i) hits += funnel_capture(sq, rng.normal(0, 1.5), rng.normal(0, 1.5)).captured ? 1 : 0;
    const double p = capture_probability(sq, 1.5);
    EXPECT_NEAR(static_cast<double>(hits) / n, p, 3.0 * std::sqrt(p * (1 - p) / n));
}

TEST(CaptureProbability, VanishesForLargeSigma) {
    EXPECT_LT(capture_probability(kFunnel, 1000.0), 1e-4);
    double prev = 1.0;
    for (double s = 0.1; s < 20.0; s += 0.1) {
        const double p = capture_probability(kFunnel, s);
        EXPECT_LE(p, prev);
        prev = p;
    }
    EXPECT_THROW(capture_probability(kFunnel, -1.0), Error);
}

TEST(CaptureProbability, MonteCarloWithinThreeStandardErrors) {
    for (double sigma : {0.5, 1.0, 2.0, 4.0}) {
        Rng rng(static_cast<std::uint64_t>(sigma * 100));
        const int n = 100000;
        int hits = 0;
        for (int i = 0; i < n; ++i)
            hits += funnel_capture(kFunnel, rng.normal(0, sigma), rng.normal(0, sigma)).captured ? 1 : 0;
        const double p = capture_probability(kFunnel, sigma);
        const double se = std::sqrt(p * (1 - p) / n);
        EXPECT_LE(std::abs(static_cast<double>(hits) / n - p), 3.0 * se + 1e-12) << sigma;
    }
}

TEST(Unload, NeverStuck) {
    auto g = loaded_gripper(9);
    Magazine m = fresh(0);
    Rng rng(1);
    const auto ev = unload(kKin, g, m, arm(1.0, 0.0), rng);
    EXPECT_FALSE(ev.stuck);
    EXPECT_FALSE(g.loaded_sensor);
    ASSERT_EQ(m.retrieval_box.size(), 1u);
    EXPECT_EQ(m.retrieval_box[0].location, Location::RetrievalBox);
    EXPECT_FALSE(g.lever_hooked);
    EXPECT_EQ(g.extension_mm, 0.0);
}

TEST(Unload, AlwaysStuckThenWiped) {
    auto g = loaded_gripper(9);
    Magazine m = fresh(0);
    Rng rng(1);
    EXPECT_TRUE(unload(kKin, g, m, arm(1.0, 1.0), rng).stuck);
    ASSERT_TRUE(g.loaded_sensor);
    EXPECT_EQ(g.loaded_sensor->location, Location::StuckInSlot);
    EXPECT_TRUE(wipe_clear(g, m));
    EXPECT_FALSE(g.loaded_sensor);
    EXPECT_EQ(m.retrieval_box.size(), 1u);
}

TEST(Unload, StuckFraction) {
    Rng rng(5);
    int stuck = 0;
    for (int i = 0; i < 10000; ++i) {
        auto g = loaded_gripper(i);
        Magazine m;
        stuck += unload(kKin, g, m, arm(1.0, 0.1), rng).stuck ? 1 : 0;
    }
    EXPECT_NEAR(stuck / 10000.0, 0.1, 0.01);
}

TEST(Unload, RequiresSensor) {
    GripperState g;
    Magazine m;
    Rng rng(1);
    expect_kind(ErrorKind::NoSensorLoaded, [&] { unload(kKin, g, m, arm(1.0), rng); });
}

TEST(Wipe, EmptyGripperIsNoOp) {
    GripperState g;
    Magazine m;
    EXPECT_FALSE(wipe_clear(g, m));
    EXPECT_TRUE(m.retrieval_box.empty());
}

TEST(Wipe, HookedSensorIsRefused) {
    auto g = loaded_gripper(1);
    Magazine m;
    expect_kind(ErrorKind::LeverStillHooked, [&] { wipe_clear(g, m); });
}

TEST(Load, ZeroSigmaAlwaysLoads) {
    Magazine m = fresh();
    GripperState g;
    Rng rng(1);
    const auto ev = load(kKin, g, m, 2, kFunnel, arm(0.0), rng);
    EXPECT_TRUE(ev.loaded);
    EXPECT_EQ(ev.attempts.size(), 1u);
    EXPECT_EQ(g.loaded_sensor_id(), 2);
    EXPECT_TRUE(g.lever_hooked);
    EXPECT_FALSE(m.slots[2]);
    EXPECT_EQ(m.occupied(), 4);
}

TEST(Load, EmptySlotAndOccupiedGripper) {
    Magazine m = fresh();
    GripperState g;
    Rng rng(1);
    m.slots[0].reset();
    expect_kind(ErrorKind::SlotEmpty, [&] { load(kKin, g, m, 0, kFunnel, arm(0.0), rng); });
    expect_kind(ErrorKind::SlotEmpty, [&] { load(kKin, g, m, 7, kFunnel, arm(0.0), rng); });
    g = loaded_gripper(42);
    expect_kind(ErrorKind::GripperOccupied, [&] { load(kKin, g, m, 1, kFunnel, arm(0.0), rng); });
}

TEST(Load, OneRetryMatchesClosedForm) {
    const double p = capture_probability(kFunnel, 5.0);
    const double expected = p + (1.0 - p) * p;
    Rng rng(77);
    const int n = 100000;
    int ok = 0;
    for (int i = 0; i < n; ++i) {
        Magazine m = fresh(1, i);
        GripperState g;
        ok += load(kKin, g, m, 0, kFunnel, arm(5.0), rng, 1).loaded ? 1 : 0;
    }
    EXPECT_NEAR(static_cast<double>(ok) / n, expected, 3.0 * std::sqrt(expected * (1 - expected) / n));
}

TEST(Load, FailedCaptureLeavesSensorInSlot) {
    Rng rng(3);
    for (int i = 0; i < 200; ++i) {
        Magazine m = fresh(1);
        GripperState g;
        const auto ev = load(kKin, g, m, 0, kFunnel, arm(8.0), rng, 0);
        if (ev.loaded) continue;
        EXPECT_TRUE(m.slots[0]);
        EXPECT_EQ(m.slots[0]->location, Location::MagazineSlot);
        EXPECT_FALSE(g.loaded_sensor);
        return;
    }
    FAIL() << "no failed capture at sigma 8";
}

TEST(Replace, FiveThenEmpty) {
    Magazine m = fresh();
    GripperState g;
    Rng rng(1);
    double clock = 0.0;
    for (int i = 0; i < 5; ++i) {
        const auto r = replace_sequence(kKin, g, m, kFunnel, arm(0.0, 0.3), rng, clock);
        EXPECT_TRUE(r.success);
        EXPECT_EQ(r.slot_used, i);
        EXPECT_EQ(r.loaded_sensor, i);
    }
    EXPECT_EQ(m.occupied(), 0);
    expect_kind(ErrorKind::MagazineEmpty, [&] { replace_sequence(kKin, g, m, kFunnel, arm(0.0), rng, clock); });
    EXPECT_EQ(g.loaded_sensor_id(), 4);
}

TEST(Replace, CadenceOverTwentyFiveInsertions) {
    Magazine m = fresh();
    GripperState g;
    Rng rng(1);
    double clock = 0.0;
    int replacements = 0;
    for (int insertion = 0; insertion < 25; ++insertion) {
        if (!g.loaded_sensor || g.loaded_sensor->insert_count >= 5) {
            replace_sequence(kKin, g, m, kFunnel, arm(0.0), rng, clock);
            ++replacements;
        }
        ++g.loaded_sensor->insert_count;
    }
    EXPECT_EQ(replacements, 5);
}

TEST(Replace, SubStepsOrderedInTime) {
    Magazine m = fresh();
    GripperState g = loaded_gripper(100);
    Rng rng(1);
    double clock = 10.0;
    const auto r = replace_sequence(kKin, g, m, kFunnel, arm(1.0, 0.5), rng, clock);
    ASSERT_EQ(r.steps.size(), 3u);
    EXPECT_EQ(r.steps[0].step, SubStep::Unload);
    EXPECT_EQ(r.steps[1].step, SubStep::Wipe);
    EXPECT_EQ(r.steps[2].step, SubStep::Load);
    EXPECT_LT(r.steps[0].timestamp_s, r.steps[1].timestamp_s);
    EXPECT_LT(r.steps[1].timestamp_s, r.steps[2].timestamp_s);
    EXPECT_GT(clock, r.steps[2].timestamp_s);
    EXPECT_EQ(r.removed_sensor, 100);
}

TEST(Replace, ConservationOverRandomLifecycle) {
    // Random mix of unload / wipe / load / replace on a 5-slot magazine plus
    // one pre-loaded sensor; sensor count and id uniqueness must hold throughout.
    gen::Gen pick(2024);
    Rng rng(2024);
    Magazine m = fresh();
    GripperState g;
    double clock = 0.0;
    const int initial = sensor_count(m, g);
    int steps = 0;
    while (steps < 10000) {
        if (m.occupied() == 0 && !g.loaded_sensor) {
            m = fresh(5, static_cast<std::uint64_t>(steps));
            g = GripperState{};
        }
        const ArmErrorModel a = arm(pick.real(0.0, 3.0), pick.real(0.0, 1.0));
        try {
            switch (pick.integer(0, 3)) {
            case 0:
                if (g.loaded_sensor && g.loaded_sensor->location == Location::LoadedInGripper) unload(kKin, g, m, a, rng);
                break;
            case 1:
                if (!g.lever_hooked || !g.loaded_sensor ||
                    g.loaded_sensor->location != Location::LoadedInGripper)
                    wipe_clear(g, m);
                break;
            case 2:
                if (!g.loaded_sensor && m.next_occupied_slot()) load(kKin, g, m, *m.next_occupied_slot(), kFunnel, a, rng);
                break;
            default:
                if (m.next_occupied_slot()) replace_sequence(kKin, g, m, kFunnel, a, rng, clock);
                break;
            }
        } catch (const Error& e) {
            ADD_FAILURE() << e.what();
        }
        ++steps;
        ASSERT_EQ(sensor_count(m, g), initial) << steps;

        std::set<int> ids;
        int listed = 0;
        for (const auto& s : m.slots)
            if (s) {
                ids.insert(s->id);
                ++listed;
                EXPECT_EQ(s->location, Location::MagazineSlot);
            }
        for (const auto& s : m.retrieval_box) {
            ids.insert(s.id);
            ++listed;
            EXPECT_EQ(s.location, Location::RetrievalBox);
        }
        if (g.loaded_sensor) {
            ids.insert(g.loaded_sensor->id);
            ++listed;
        }
        ASSERT_EQ(static_cast<int>(ids.size()), listed);
    }
}

TEST(Replace, ZeroSigmaNeverFailsBeforeEmpty) {
    gen::for_all(50, 8, [](gen::Gen& pick, int i) {
        Magazine m = fresh(pick.integer(1, 8), static_cast<std::uint64_t>(i));
        GripperState g;
        Rng rng(static_cast<std::uint64_t>(i));
        double clock = 0.0;
        const int cap = m.occupied();
        for (int k = 0; k < cap; ++k)
            EXPECT_TRUE(replace_sequence(kKin, g, m, kFunnel, arm(0.0, pick.real(0.0, 1.0)), rng, clock).success);
        EXPECT_THROW(replace_sequence(kKin, g, m, kFunnel, arm(0.0), rng, clock), Error);
    });
}
