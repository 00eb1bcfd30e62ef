#pragma once

#include <optional>

#include "locoplan/balance.hpp"
#include "locoplan/kinematics.hpp"
#include "locoplan/world.hpp"

// Contact-manifold constraints shared by the stance and whole-body planners.
namespace locoplan {

/// Stacked (end-effector position - contact position) rows for every fixed
/// contact of the stance, plus an optional (com_x - target) row.
Eigen::VectorXd constraint_residual(const RobotModel& model, const Configuration& q, const Stance& stance,
                                    std::optional<double> com_target = std::nullopt);
Eigen::MatrixXd constraint_jacobian(const RobotModel& model, const Configuration& q, const Stance& stance,
                                    std::optional<double> com_target = std::nullopt);

struct ProjectOptions {
  int max_iters = 100;
  double tolerance = 1e-6;   // success threshold on the max-abs residual
  double target = 1e-11;     // iterate until below this or stalled
  double damping = 0.0;      // 0 gives the minimum-norm Gauss-Newton step
  double step_clamp = 0.0;   // max |dq| entry per iteration, 0 disables
  bool clamp_limits = false;
};

/// Gauss-Newton projection of q onto the constraint set. nullopt when the
/// residual stays above `tolerance`.
std::optional<Configuration> project_constraints(const RobotModel& model, const Configuration& q,
                                                 const Stance& stance, std::optional<double> com_target,
                                                 const ProjectOptions& opts);

/// Smallest (signed distance - radius) over the collision spheres.
double robot_clearance(const RobotModel& model, const WorldState& world, const Configuration& q);

/// Balance target for the CoM: the current x when already supported with
/// some slack, otherwise the closest point `margin` inside the support
/// interval (its midpoint when narrower than 2 * margin).
std::optional<double> com_target(const RobotModel& model, const Configuration& q, const Stance& stance,
                                 double margin);

}  // namespace locoplan
