#pragma once

#include "error.hpp"
#include "random.hpp"
#include "geometry.hpp"
#include "serialization.hpp"
#include "gripper.hpp"
#include "calibration.hpp"
#include "exchange.hpp"
#include "perception.hpp"
#include "mission.hpp"
#include "stats.hpp"
#include "protocols.hpp"
#include "config.hpp"
#include "experiment.hpp"
