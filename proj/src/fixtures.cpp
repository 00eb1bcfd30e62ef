#include "locoplan/fixtures.hpp"

#include <cmath>

#include "locoplan/errors.hpp"

namespace locoplan::fixtures {

namespace {

JointSpec revolute(std::string name, std::string parent, std::string child, Vec2 origin, double lo, double hi,
                   double vel) {
  JointSpec j;
  j.name = std::move(name);
  j.parent = std::move(parent);
  j.child = std::move(child);
  j.type = JointType::Revolute;
  j.origin = origin;
  j.lower = lo;
  j.upper = hi;
  j.vel_limit = vel;
  return j;
}

}  // namespace

RobotModel two_link_arm() {
  RobotDescription d;
  d.name = "two-link-arm";
  d.base_dof = 0;
  d.joints = {revolute("j1", "base", "link1", {0.0, 0.0}, -M_PI, M_PI, 1.0),
              revolute("j2", "link1", "link2", {1.0, 0.0}, -M_PI, M_PI, 1.0)};
  d.end_effectors = {{"ee", "link2", {1.0, 0.0}}};
  d.collision_spheres = {{"link1", {0.5, 0.0}, 0.05}, {"link2", {0.5, 0.0}, 0.05}};
  d.masses = {{"link1", 1.0, {0.5, 0.0}}, {"link2", 1.0, {0.5, 0.0}}};
  return RobotModel(std::move(d));
}

RobotModel point_robot_2d() {
  RobotDescription d;
  d.name = "point-robot-2d";
  d.base_dof = 2;
  d.base_vel_limits = {1.0, 1.0};
  d.collision_spheres = {{"base", {0.0, 0.0}, 0.1}};
  d.masses = {{"base", 1.0, {0.0, 0.0}}};
  return RobotModel(std::move(d));
}

RobotModel planar_biped_7dof() {
  RobotDescription d;
  d.name = "planar-biped-7dof";
  d.base_dof = 3;
  d.base_vel_limits = {0.5, 0.5, 1.0};
  for (const std::string side : {"left", "right"}) {
    d.joints.push_back(revolute(side + "_hip", "base", side + "_thigh", {0.0, 0.0}, -1.6, 1.8, 2.0));
    d.joints.push_back(revolute(side + "_knee", side + "_thigh", side + "_shin", {0.0, -0.5}, -2.6, -0.05, 2.0));
    d.end_effectors.push_back({side + "_foot", side + "_shin", {0.0, -0.5}});
    d.end_effectors.push_back({side + "_kneecap", side + "_thigh", {0.0, -0.5}});
    d.collision_spheres.push_back({side + "_thigh", {0.0, -0.25}, 0.07});
    d.collision_spheres.push_back({side + "_shin", {0.0, -0.25}, 0.05});
    d.masses.push_back({side + "_thigh", 5.0, {0.0, -0.25}});
    d.masses.push_back({side + "_shin", 2.0, {0.0, -0.25}});
  }
  d.collision_spheres.push_back({"base", {0.0, 0.35}, 0.15});
  d.masses.push_back({"base", 30.0, {0.0, 0.3}});
  return RobotModel(std::move(d));
}

RobotModel planar_wheeler_6dof() {
  RobotDescription d;
  d.name = "planar-wheeler-6dof";
  d.base_dof = 3;
  d.base_vel_limits = {1.0, 1.0, 1.5};
  d.joints = {revolute("front_axle", "base", "front_axle", {0.3, 0.0}, -0.5, 0.5, 1.5),
              revolute("rear_axle", "base", "rear_axle", {-0.3, 0.0}, -0.5, 0.5, 1.5),
              revolute("torso_yaw", "base", "torso", {0.0, 0.0}, -1.0, 1.0, 1.5)};
  d.end_effectors = {{"wheel_fl", "front_axle", {0.0, 0.22}},
                     {"wheel_fr", "front_axle", {0.0, -0.22}},
                     {"wheel_rl", "rear_axle", {0.0, 0.22}},
                     {"wheel_rr", "rear_axle", {0.0, -0.22}}};
  d.collision_spheres = {{"base", {0.0, 0.0}, 0.2},         {"front_axle", {0.0, 0.22}, 0.06},
                         {"front_axle", {0.0, -0.22}, 0.06}, {"rear_axle", {0.0, 0.22}, 0.06},
                         {"rear_axle", {0.0, -0.22}, 0.06},  {"torso", {0.15, 0.0}, 0.08}};
  d.masses = {{"base", 20.0, {0.0, 0.0}},
              {"front_axle", 3.0, {0.0, 0.0}},
              {"rear_axle", 3.0, {0.0, 0.0}},
              {"torso", 6.0, {0.1, 0.0}}};
  return RobotModel(std::move(d));
}

RobotModel by_name(std::string_view name) {
  if (name == "two-link-arm") return two_link_arm();
  if (name == "point-robot-2d") return point_robot_2d();
  if (name == "planar-biped-7dof") return planar_biped_7dof();
  if (name == "planar-wheeler-6dof") return planar_wheeler_6dof();
  throw NotFound("unknown robot fixture '" + std::string(name) + "'");
}

std::vector<std::string> names() {
  return {"two-link-arm", "point-robot-2d", "planar-biped-7dof", "planar-wheeler-6dof"};
}

}  // namespace locoplan::fixtures
