#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "locoplan/balance.hpp"
#include "locoplan/kinematics.hpp"
#include "locoplan/stance_planner.hpp"
#include "locoplan/world.hpp"

namespace locoplan {

inline constexpr const char* kTrajectoryFormat = "locoplan-traj/1";

struct WholeBodyParams {
  double step = 0.1;          // max distance between consecutive knots
  double safety = 1.0;        // fraction of the velocity limits used for timing
  int max_iters = 2000;       // RRT sampling budget
  int shortcut_attempts = 50;
  double goal_bias = 0.2;
  double com_margin = 0.02;
  double clearance = 0.0;
  double sample_pad = 0.5;    // base sampling box padding around the endpoints [m]
};

/// Piecewise-linear configuration trajectory under one stance.
struct Motion {
  std::vector<Configuration> knots;
  std::vector<double> timestamps;
  double duration = 0.0;
  Stance stance;
};

struct GlobalPlan {
  std::vector<Motion> motions;
};

struct TimeParameterization {
  double duration = 0.0;
  std::vector<double> timestamps;
};

/// Each segment lasts max_k |dq_k| / (safety * v_k). Throws
/// std::invalid_argument for fewer than two knots or safety outside (0, 1].
TimeParameterization time_parameterize(const std::vector<Configuration>& path, const RobotModel& model,
                                       double safety);

/// Minimum-norm Gauss-Newton projection onto the contact constraints of the
/// stance (100 iterations, residual <= 1e-6).
std::optional<Configuration> project_to_manifold(const RobotModel& model, const Configuration& q,
                                                 const Stance& stance);

/// project_to_manifold followed, when needed, by a CoM shift into the
/// support interval so the result is balanced under the stance.
std::optional<Configuration> project_balanced(const RobotModel& model, const Configuration& q, const Stance& stance,
                                              double com_margin = 0.02);

struct MotionContext {
  const RobotModel& model;
  const WorldState& world;
  WholeBodyParams params;
};

/// Contacts within tolerance, balanced, inside limits and clear of obstacles.
bool knot_feasible(const MotionContext& ctx, const Configuration& q, const Stance& stance, double tol_contact = 1e-6);

struct MotionResult {
  bool success = false;
  std::string failure;
  Motion motion;
  int samples = 0;
  bool direct = false;  // straight projected interpolation sufficed
};

/// Throws std::invalid_argument when an endpoint is infeasible for the stance.
MotionResult plan_motion(const MotionContext& ctx, const Configuration& q_a, const Configuration& q_b,
                         const Stance& stance, std::uint64_t seed);

struct GlobalPlanResult {
  bool success = false;
  std::string failure;
  GlobalPlan plan;
};

/// One motion per consecutive pair of the stance solution, each under the
/// earlier stance; `q_final` appends a last motion under the final stance.
GlobalPlanResult plan_global(const MotionContext& ctx, const StanceSolution& sol,
                             const std::optional<Configuration>& q_final, std::uint64_t seed);

std::vector<Violation> validate_motion(const MotionContext& ctx, const Motion& m, double tol_contact = 1e-6);
std::vector<Violation> validate_global_plan(const MotionContext& ctx, const GlobalPlan& plan,
                                            double tol_contact = 1e-6);

nlohmann::json to_json(const Motion& m);
Motion motion_from_json(const nlohmann::json& j, const std::string& path);
nlohmann::json to_json(const GlobalPlan& p);
GlobalPlan global_plan_from_json(const nlohmann::json& j, const std::string& path = "");

}  // namespace locoplan
