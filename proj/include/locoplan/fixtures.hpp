#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "locoplan/kinematics.hpp"

// Desk-scale robot fixtures. Planar worlds use (x, z); the wheeler is meant
// for a top-down world where the second coordinate is the lateral axis.
namespace locoplan::fixtures {

/// Fixed-base 2R arm with unit links; end-effector "ee".
RobotModel two_link_arm();

/// "point-robot-2d": translating disc, base (x, z), radius 0.1 m.
RobotModel point_robot_2d();

/// "planar-biped-7dof": floating base (x, z, pitch) plus hip/knee per leg.
/// End-effectors: left_foot, right_foot, left_kneecap, right_kneecap.
RobotModel planar_biped_7dof();

/// "planar-wheeler-6dof": floating base (x, y, yaw), front/rear steering
/// axles and a torso yaw joint. End-effectors: wheel_fl, wheel_fr, wheel_rl,
/// wheel_rr.
RobotModel planar_wheeler_6dof();

/// Looks up a fixture by name; throws NotFound.
RobotModel by_name(std::string_view name);
std::vector<std::string> names();

}  // namespace locoplan::fixtures
