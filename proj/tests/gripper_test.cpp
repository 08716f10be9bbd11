#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <string>

#include "stalkprobe/gripper.hpp"
#include "support.hpp"

using namespace stalkprobe;
using namespace stalkprobe::gripper;

namespace {

const KinematicsConfig kDefault;

GripperState loaded_at(const KinematicsConfig& c, double extension) {
    GripperState g = move_to(c, GripperState{}, extension);
    calibration::SensorUnit s;
    s.id = 7;
    s.location = calibration::Location::LoadedInGripper;
    g.loaded_sensor = s;
    return g;
}

geometry::StalkInstance round_stalk(double pith = 1.0) {
    geometry::StalkInstance s;
    s.cross_section = {10.5, 10.5, 0.0, pith};
    return s;
}

} // namespace

TEST(Kinematics, FullyRetracted) {
    const auto k = kinematics(kDefault, 0.0);
    EXPECT_DOUBLE_EQ(k.finger_gap_mm, 40.0);
    EXPECT_DOUBLE_EQ(k.sensor_travel_mm, 0.0);
    EXPECT_FALSE(k.lever_hooked);
}

TEST(Kinematics, FullStroke) {
    const auto k = kinematics(kDefault, kDefault.stroke_mm);
    EXPECT_DOUBLE_EQ(k.finger_gap_mm, 0.0);
    EXPECT_DOUBLE_EQ(k.sensor_travel_mm, kDefault.insertion_travel_mm);
    EXPECT_TRUE(k.lever_hooked);
}

TEST(Kinematics, MidGraspPhase) {
    const auto k = kinematics(kDefault, 20.0);
    EXPECT_DOUBLE_EQ(k.finger_gap_mm, 20.0);
    EXPECT_DOUBLE_EQ(k.sensor_travel_mm, 0.0);
    EXPECT_TRUE(k.lever_hooked);
}

TEST(Kinematics, OutOfRangeExtensionThrows) {
    EXPECT_THROW(kinematics(kDefault, -0.01), Error);
    EXPECT_THROW(kinematics(kDefault, 50.01), Error);
    try {
        kinematics(kDefault, 60.0);
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::ExtensionOutOfRange);
    }
}

TEST(Kinematics, LipschitzOnFineGrid) {
    const double bound = lipschitz_bound(kDefault);
    const double step = 0.01;
    auto prev = kinematics(kDefault, 0.0);
    for (int i = 1; i <= 5000; ++i) {
        const auto k = kinematics(kDefault, i * step);
        EXPECT_LE(std::abs(k.finger_gap_mm - prev.finger_gap_mm), bound * step + 1e-9);
        EXPECT_LE(std::abs(k.sensor_travel_mm - prev.sensor_travel_mm), bound * step + 1e-9);
        EXPECT_LE(std::abs(k.lever_fraction - prev.lever_fraction), bound * step + 1e-9);
        prev = k;
    }
}

TEST(Kinematics, MonotoneOnFineGrid) {
    auto prev = kinematics(kDefault, 0.0);
    for (int i = 1; i <= 5000; ++i) {
        const auto k = kinematics(kDefault, i * 0.01);
        EXPECT_LE(k.finger_gap_mm, prev.finger_gap_mm);
        EXPECT_GE(k.sensor_travel_mm, prev.sensor_travel_mm);
        EXPECT_GE(k.lever_fraction, prev.lever_fraction);
        EXPECT_GE(k.lever_hooked, prev.lever_hooked);
        prev = k;
    }
}

TEST(Kinematics, PhasesAreExclusive) {
    for (int i = 0; i <= 5000; ++i) {
        const double e = i * 0.01;
        const auto k = kinematics(kDefault, e);
        if (e < kDefault.lever_phase_end_mm) {
            EXPECT_DOUBLE_EQ(k.finger_gap_mm, kDefault.max_finger_gap_mm) << e;
            EXPECT_DOUBLE_EQ(k.sensor_travel_mm, 0.0) << e;
            EXPECT_FALSE(k.lever_hooked) << e;
        } else if (e < kDefault.grasp_phase_end_mm) {
            EXPECT_DOUBLE_EQ(k.sensor_travel_mm, 0.0) << e;
            EXPECT_DOUBLE_EQ(k.lever_fraction, 1.0) << e;
        } else {
            EXPECT_DOUBLE_EQ(k.finger_gap_mm, 0.0) << e;
            EXPECT_DOUBLE_EQ(k.lever_fraction, 1.0) << e;
        }
    }
}

TEST(Kinematics, PropertiesHoldForRandomConfigs) {
    gen::for_all(200, 3, [](gen::Gen& g, int) {
        KinematicsConfig c;
        c.stroke_mm = g.real(30.0, 80.0);
        c.lever_phase_end_mm = g.real(1.0, 0.3 * c.stroke_mm);
        c.grasp_phase_end_mm = g.real(c.lever_phase_end_mm + 1.0, c.stroke_mm - 1.0);
        c.insertion_travel_mm = g.real(8.5, 25.0);
        validate(c);
        const double bound = lipschitz_bound(c);
        auto prev = kinematics(c, 0.0);
        for (double e = 0.01; e <= c.stroke_mm; e += 0.01) {
            const auto k = kinematics(c, e);
            EXPECT_LE(k.finger_gap_mm, prev.finger_gap_mm);
            EXPECT_GE(k.sensor_travel_mm, prev.sensor_travel_mm);
            EXPECT_LE(prev.finger_gap_mm - k.finger_gap_mm, bound * 0.01 + 1e-9);
            EXPECT_LE(k.sensor_travel_mm - prev.sensor_travel_mm, bound * 0.01 + 1e-9);
            EXPECT_FALSE(k.sensor_travel_mm > 0.0 && k.finger_gap_mm > 0.0);
            prev = k;
        }
    });
}

TEST(Kinematics, InvalidPhaseOrderRejected) {
    KinematicsConfig c;
    c.lever_phase_end_mm = 40.0;
    EXPECT_THROW(validate(c), Error);
    c = {};
    c.insertion_travel_mm = 8.0;
    EXPECT_THROW(validate(c), Error);
}

TEST(Kinematics, CsvHasOneRowPerStep) {
    const std::string csv = kinematics_csv(kDefault, 0.5);
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "extension_mm,finger_gap_mm,sensor_travel_mm,lever_hooked");
    int rows = 0;
    std::string last;
    while (std::getline(in, line)) {
        ++rows;
        last = line;
    }
    EXPECT_EQ(rows, 101);
    EXPECT_EQ(last, "50.0000,0.0000,18.0000,1");
    EXPECT_THROW(kinematics_csv(kDefault, 0.0), Error);
}

TEST(Grasp, CenteringShrinksOffset) {
    Rng rng(1);
    const auto r = grasp(kDefault, 10.0, 21.0, rng);
    ASSERT_TRUE(r.ok());
    EXPECT_NEAR(r.residual_offset_mm, 1.5, 1e-12);
}

TEST(Grasp, CenteredStaysCentered) {
    Rng rng(1);
    for (double d : {15.0, 21.0, 35.0}) EXPECT_DOUBLE_EQ(grasp(kDefault, 0.0, d, rng).residual_offset_mm, 0.0);
}

TEST(Grasp, DiameterOutsideRange) {
    Rng rng(1);
    EXPECT_EQ(grasp(kDefault, 0.0, 40.0, rng).error, GraspError::DiameterOutOfRange);
    EXPECT_EQ(grasp(kDefault, 0.0, 14.9, rng).error, GraspError::DiameterOutOfRange);
}

TEST(Grasp, OffsetBeyondFingerSpan) {
    Rng rng(1);
    EXPECT_EQ(grasp(kDefault, 20.5, 21.0, rng).error, GraspError::StalkMissed);
    EXPECT_TRUE(grasp(kDefault, 20.0, 21.0, rng).ok());
}

TEST(Grasp, ResidualNeverExceedsOffset) {
    gen::for_all(10000, 5, [](gen::Gen& g, int) {
        KinematicsConfig c;
        c.centering_gain = g.real(0.0, 1.0);
        Rng rng(1);
        const double offset = g.real(-20.0, 20.0);
        const auto r = grasp(c, offset, g.real(15.0, 35.0), rng);
        ASSERT_TRUE(r.ok());
        EXPECT_LE(std::abs(r.residual_offset_mm), std::abs(offset) + 1e-12);
    });
}

TEST(Insert, CenteredIdealCase) {
    const auto out = insert(loaded_at(kDefault, kDefault.stroke_mm), kDefault, round_stalk(), 0.0, 0.0, 1.9,
                            geometry::SensorGeometry{});
    EXPECT_TRUE(out.hit);
    EXPECT_TRUE(out.depth_ok);
    EXPECT_TRUE(out.height_ok);
    EXPECT_TRUE(out.in_pith);
    EXPECT_GE(out.achieved_depth_mm, 8.5);
}

TEST(Insert, OffsetBeyondRadiusMisses) {
    const auto out = insert(loaded_at(kDefault, kDefault.stroke_mm), kDefault, round_stalk(), 0.0, 12.0, 1.9,
                            geometry::SensorGeometry{});
    EXPECT_FALSE(out.hit);
    EXPECT_FALSE(out.depth_ok);
    EXPECT_FALSE(out.in_pith);
}

TEST(Insert, ShallowChordFailsDepth) {
    const auto out = insert(loaded_at(kDefault, kDefault.stroke_mm), kDefault, round_stalk(), 0.0, 9.7, 1.9,
                            geometry::SensorGeometry{});
    EXPECT_TRUE(out.hit);
    EXPECT_NEAR(out.chord_mm, 2.0 * std::sqrt(110.25 - 94.09), 1e-9);
    EXPECT_FALSE(out.depth_ok);
}

TEST(Insert, HeightOutsideBandIsNotInPith) {
    const auto out = insert(loaded_at(kDefault, kDefault.stroke_mm), kDefault, round_stalk(), 0.0, 0.0, 3.0,
                            geometry::SensorGeometry{});
    EXPECT_TRUE(out.depth_ok);
    EXPECT_FALSE(out.height_ok);
    EXPECT_FALSE(out.in_pith);
}

TEST(Insert, RequiresLoadedSensor) {
    try {
        insert(move_to(kDefault, GripperState{}, 50.0), kDefault, round_stalk(), 0.0, 0.0, 1.9,
               geometry::SensorGeometry{});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::NoSensorLoaded);
    }
}

TEST(Insert, StagingHoldsForRandomInputs) {
    const auto state = loaded_at(kDefault, kDefault.stroke_mm);
    gen::for_all(10000, 9, [&](gen::Gen& g, int) {
        KinematicsConfig c = kDefault;
        c.tip_standoff_mm = g.real(0.0, 18.0);
        geometry::StalkInstance s;
        s.cross_section = g.ellipse();
        const auto out = insert(state, c, s, g.real(0.0, 360.0), g.real(-15.0, 15.0), g.real(0.5, 3.5),
                                geometry::SensorGeometry{});
        EXPECT_TRUE(!out.in_pith || out.depth_ok);
        EXPECT_TRUE(!out.depth_ok || out.hit);
        EXPECT_LE(out.achieved_depth_mm, out.chord_mm + 1e-12);
        EXPECT_LE(out.achieved_depth_mm, 12.0);
    });
}

TEST(Retract, SensorRetractsThenFingersOpen) {
    const auto start = loaded_at(kDefault, kDefault.stroke_mm);
    const auto path = retract_and_release(kDefault, start);
    EXPECT_DOUBLE_EQ(path.sensor_retracted.sensor_travel_mm, 0.0);
    EXPECT_DOUBLE_EQ(path.sensor_retracted.finger_gap_mm, 0.0);
    EXPECT_DOUBLE_EQ(path.released.extension_mm, kDefault.lever_phase_end_mm);
    EXPECT_DOUBLE_EQ(path.released.finger_gap_mm, kDefault.max_finger_gap_mm);
    EXPECT_TRUE(path.released.lever_hooked);
    EXPECT_EQ(path.released.loaded_sensor_id(), 7);
}

TEST(Retract, RoundTripRestoresState) {
    const auto hooked = loaded_at(kDefault, kDefault.lever_phase_end_mm);
    const auto extended = move_to(kDefault, hooked, kDefault.stroke_mm);
    const auto back = retract_and_release(kDefault, extended).released;
    EXPECT_TRUE(same_pose(back, hooked));
    EXPECT_EQ(back.loaded_sensor->location, calibration::Location::LoadedInGripper);
}

TEST(Retract, MustStartAtFullStroke) {
    EXPECT_THROW(retract_and_release(kDefault, loaded_at(kDefault, 20.0)), Error);
}
