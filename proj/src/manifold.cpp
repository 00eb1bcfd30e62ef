#include "locoplan/manifold.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace locoplan {

Eigen::VectorXd constraint_residual(const RobotModel& model, const Configuration& q, const Stance& stance,
                                    std::optional<double> com_target) {
  const bool fixed = !stance.rolling();
  const auto rows = static_cast<Eigen::Index>((fixed ? 2 * stance.size() : 0) + (com_target ? 1 : 0));
  Eigen::VectorXd r(rows);
  Eigen::Index k = 0;
  if (fixed) {
    const auto poses = link_poses(model, q);
    for (const auto& c : stance.contacts()) {
      const auto& f = model.frames()[model.frame_index(c.end_effector)];
      r.segment<2>(k) = poses[f.link].transform(f.offset) - c.position;
      k += 2;
    }
  }
  if (com_target) r[k] = center_of_mass(model, q).x() - *com_target;
  return r;
}

Eigen::MatrixXd constraint_jacobian(const RobotModel& model, const Configuration& q, const Stance& stance,
                                    std::optional<double> com_target) {
  const bool fixed = !stance.rolling();
  const auto rows = static_cast<Eigen::Index>((fixed ? 2 * stance.size() : 0) + (com_target ? 1 : 0));
  Eigen::MatrixXd jac(rows, model.dof());
  Eigen::Index k = 0;
  if (fixed) {
    const auto poses = link_poses(model, q);
    for (const auto& c : stance.contacts()) {
      const auto& f = model.frames()[model.frame_index(c.end_effector)];
      jac.middleRows(k, 2) = point_jacobian(model, poses, f.link, f.offset);
      k += 2;
    }
  }
  if (com_target) jac.row(k) = com_jacobian(model, q).row(0);
  return jac;
}

std::optional<Configuration> project_constraints(const RobotModel& model, const Configuration& q,
                                                 const Stance& stance, std::optional<double> com_target,
                                                 const ProjectOptions& opts) {
  Configuration x = q;
  Eigen::VectorXd r = constraint_residual(model, x, stance, com_target);
  if (r.size() == 0) return x;
  double err = r.cwiseAbs().maxCoeff();
  if (err <= opts.tolerance && !com_target) return x;
  for (int it = 0; it < opts.max_iters && err > opts.target; ++it) {
    const Eigen::MatrixXd jac = constraint_jacobian(model, x, stance, com_target);
    Eigen::VectorXd dq;
    if (opts.damping > 0.0) {
      Eigen::MatrixXd jjt = jac * jac.transpose();
      jjt.diagonal().array() += opts.damping;
      dq = -jac.transpose() * jjt.ldlt().solve(r);
    } else {
      dq = -jac.completeOrthogonalDecomposition().solve(r);
    }
    if (opts.step_clamp > 0.0) {
      const double big = dq.cwiseAbs().maxCoeff();
      if (big > opts.step_clamp) dq *= opts.step_clamp / big;
    }
    Configuration next = x + dq;
    if (opts.clamp_limits) clamp_to_limits(model, next);
    const Eigen::VectorXd rn = constraint_residual(model, next, stance, com_target);
    const double en = rn.cwiseAbs().maxCoeff();
    if (!std::isfinite(en)) break;
    const bool stalled = en >= err && err <= opts.tolerance;
    if (stalled) break;
    x = std::move(next);
    r = rn;
    err = en;
  }
  if (err > opts.tolerance) return std::nullopt;
  return x;
}

double robot_clearance(const RobotModel& model, const WorldState& world, const Configuration& q) {
  if (world.obstacles.empty()) return kNoObstacleDistance;
  const auto poses = link_poses(model, q);
  const auto centers = sphere_centers(model, poses);
  double best = kNoObstacleDistance;
  for (std::size_t s = 0; s < centers.size(); ++s)
    best = std::min(best, signed_distance(world, centers[s]).distance - model.collision_spheres()[s].radius);
  return best;
}

std::optional<double> com_target(const RobotModel& model, const Configuration& q, const Stance& stance,
                                 double margin) {
  const auto support = stance_support(model, q, stance);
  if (!support) return std::nullopt;
  const double cx = center_of_mass(model, q).x();
  if (support->width() < 2.0 * margin) return support->midpoint();
  return std::clamp(cx, support->lo + margin, support->hi - margin);
}

}  // namespace locoplan
