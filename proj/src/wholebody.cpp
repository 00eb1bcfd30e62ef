#include "locoplan/wholebody.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "locoplan/json_util.hpp"
#include "locoplan/manifold.hpp"

namespace locoplan {

namespace {

using Path = std::vector<Configuration>;

bool balanced_or_free(const RobotModel& model, const Configuration& q, const Stance& s) {
  return s.empty() || is_balanced(model, q, s);
}

// Straight interpolation from a to b with every interior point projected back
// onto the stance manifold. Consecutive knots stay within `step`.
std::optional<Path> connect(const MotionContext& ctx, const Configuration& a, const Configuration& b,
                            const Stance& stance) {
  const double step = ctx.params.step;
  const double dist = (b - a).norm();
  const int n = std::max(1, static_cast<int>(std::ceil(dist / (0.5 * step))));
  Path path{a};
  for (int k = 1; k < n; ++k) {
    const Configuration guess = a + (static_cast<double>(k) / n) * (b - a);
    auto q = project_balanced(ctx.model, guess, stance, ctx.params.com_margin);
    if (!q || (*q - path.back()).norm() > step || !knot_feasible(ctx, *q, stance)) return std::nullopt;
    path.push_back(*q);
  }
  if ((b - path.back()).norm() > step) return std::nullopt;
  path.push_back(b);
  return path;
}

struct SampleBox {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
};

SampleBox sample_box(const RobotModel& model, const Configuration& a, const Configuration& b, double pad) {
  SampleBox box{a.cwiseMin(b), a.cwiseMax(b)};
  for (int i = 0; i < model.base_dof(); ++i) {
    box.lo[i] -= pad;
    box.hi[i] += pad;
  }
  for (int j = 0; j < model.num_joints(); ++j) {
    box.lo[model.joint_dof(j)] = model.joints()[j].lower;
    box.hi[model.joint_dof(j)] = model.joints()[j].upper;
  }
  return box;
}

std::optional<Path> rrt(const MotionContext& ctx, const Configuration& a, const Configuration& b,
                        const Stance& stance, std::mt19937_64& rng, int& samples) {
  const auto& p = ctx.params;
  const SampleBox box = sample_box(ctx.model, a, b, p.sample_pad);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Path nodes{a};
  std::vector<int> parent{-1};
  for (samples = 0; samples < p.max_iters; ++samples) {
    Configuration target(a.size());
    if (unit(rng) < p.goal_bias) {
      target = b;
    } else {
      for (Eigen::Index i = 0; i < target.size(); ++i) target[i] = box.lo[i] + unit(rng) * (box.hi[i] - box.lo[i]);
    }
    int near = 0;
    double best = (nodes[0] - target).squaredNorm();
    for (int k = 1; k < static_cast<int>(nodes.size()); ++k) {
      const double d = (nodes[k] - target).squaredNorm();
      if (d < best) {
        best = d;
        near = k;
      }
    }
    const double d = std::sqrt(best);
    if (d < 1e-12) continue;
    const Configuration guess = nodes[near] + std::min(1.0, 0.5 * p.step / d) * (target - nodes[near]);
    auto q = project_balanced(ctx.model, guess, stance, p.com_margin);
    if (!q || (*q - nodes[near]).norm() > p.step || !knot_feasible(ctx, *q, stance)) continue;
    nodes.push_back(*q);
    parent.push_back(near);
    if ((b - *q).norm() <= p.step) {
      Path path{b};
      for (int k = static_cast<int>(nodes.size()) - 1; k >= 0; k = parent[k]) path.push_back(nodes[k]);
      std::reverse(path.begin(), path.end());
      return path;
    }
  }
  return std::nullopt;
}

void shortcut(const MotionContext& ctx, Path& path, const Stance& stance, std::mt19937_64& rng) {
  for (int attempt = 0; attempt < ctx.params.shortcut_attempts && path.size() > 2; ++attempt) {
    std::uniform_int_distribution<std::size_t> pick(0, path.size() - 1);
    std::size_t i = pick(rng), j = pick(rng);
    if (i > j) std::swap(i, j);
    if (j < i + 2) continue;
    auto seg = connect(ctx, path[i], path[j], stance);
    if (!seg || seg->size() >= j - i + 1) continue;
    Path next(path.begin(), path.begin() + static_cast<std::ptrdiff_t>(i));
    next.insert(next.end(), seg->begin(), seg->end());
    next.insert(next.end(), path.begin() + static_cast<std::ptrdiff_t>(j) + 1, path.end());
    path = std::move(next);
  }
}

}  // namespace

TimeParameterization time_parameterize(const std::vector<Configuration>& path, const RobotModel& model,
                                       double safety) {
  if (path.size() < 2) throw std::invalid_argument("time parameterization needs at least two knots");
  if (!(safety > 0.0 && safety <= 1.0)) throw std::invalid_argument("safety factor must lie in (0, 1]");
  const Eigen::VectorXd vmax = safety * model.velocity_limits();
  TimeParameterization out;
  out.timestamps.push_back(0.0);
  for (std::size_t k = 1; k < path.size(); ++k) {
    const double seg = ((path[k] - path[k - 1]).cwiseAbs().array() / vmax.array()).maxCoeff();
    out.duration += seg;
    out.timestamps.push_back(out.duration);
  }
  return out;
}

std::optional<Configuration> project_to_manifold(const RobotModel& model, const Configuration& q,
                                                 const Stance& stance) {
  ProjectOptions opts;
  opts.max_iters = 100;
  return project_constraints(model, q, stance, std::nullopt, opts);
}

std::optional<Configuration> project_balanced(const RobotModel& model, const Configuration& q, const Stance& stance,
                                              double com_margin) {
  auto p = project_to_manifold(model, q, stance);
  if (!p || balanced_or_free(model, *p, stance)) return p;
  ProjectOptions opts;
  opts.max_iters = 100;
  for (int round = 0; round < 3; ++round) {
    const auto target = com_target(model, *p, stance, com_margin);
    if (!target) return std::nullopt;
    p = project_constraints(model, *p, stance, *target, opts);
    if (!p) return std::nullopt;
    if (is_balanced(model, *p, stance)) return p;
  }
  return std::nullopt;
}

bool knot_feasible(const MotionContext& ctx, const Configuration& q, const Stance& stance, double tol_contact) {
  if (q.size() != ctx.model.dof() || !q.allFinite()) return false;
  if (contact_residual(ctx.model, q, stance) > tol_contact) return false;
  if (!balanced_or_free(ctx.model, q, stance)) return false;
  if (!within_joint_limits(ctx.model, q)) return false;
  return robot_clearance(ctx.model, ctx.world, q) >= ctx.params.clearance;
}

MotionResult plan_motion(const MotionContext& ctx, const Configuration& q_a, const Configuration& q_b,
                         const Stance& stance, std::uint64_t seed) {
  ctx.model.check(q_a);
  ctx.model.check(q_b);
  if (!knot_feasible(ctx, q_a, stance)) throw std::invalid_argument("motion start is infeasible for its stance");
  if (!knot_feasible(ctx, q_b, stance)) throw std::invalid_argument("motion goal is infeasible for its stance");

  MotionResult res;
  std::optional<Path> path;
  if ((q_b - q_a).norm() == 0.0) {
    path = Path{q_a, q_b};
  } else {
    path = connect(ctx, q_a, q_b, stance);
  }
  res.direct = path.has_value();
  std::mt19937_64 rng(seed);
  if (!path) path = rrt(ctx, q_a, q_b, stance, rng, res.samples);
  if (!path) {
    res.failure = "sampling budget exhausted";
    return res;
  }
  if (!res.direct) shortcut(ctx, *path, stance, rng);

  const auto timing = time_parameterize(*path, ctx.model, ctx.params.safety);
  res.motion.knots = std::move(*path);
  res.motion.timestamps = timing.timestamps;
  res.motion.duration = timing.duration;
  res.motion.stance = stance;
  res.success = true;
  return res;
}

GlobalPlanResult plan_global(const MotionContext& ctx, const StanceSolution& sol,
                             const std::optional<Configuration>& q_final, std::uint64_t seed) {
  GlobalPlanResult out;
  auto add = [&](const Configuration& a, const Configuration& b, const Stance& s, std::uint64_t sd) {
    MotionResult m = plan_motion(ctx, a, b, s, sd);
    if (!m.success) {
      out.failure = "motion " + std::to_string(out.plan.motions.size()) + ": " + m.failure;
      return false;
    }
    out.plan.motions.push_back(std::move(m.motion));
    return true;
  };
  for (std::size_t j = 0; j + 1 < sol.configs.size(); ++j)
    if (!add(sol.configs[j], sol.configs[j + 1], sol.stances[j], seed + j)) return out;
  if (q_final && !sol.configs.empty())
    if (!add(sol.configs.back(), *q_final, sol.stances.back(), seed + sol.configs.size())) return out;
  out.success = true;
  return out;
}

std::vector<Violation> validate_motion(const MotionContext& ctx, const Motion& m, double tol_contact) {
  std::vector<Violation> out;
  auto fail = [&](int k, std::string kind, std::string detail) { out.push_back({k, std::move(kind), std::move(detail)}); };
  if (m.knots.size() < 2 || m.timestamps.size() != m.knots.size()) {
    fail(-1, "shape", "motion needs >= 2 knots with one timestamp each");
    return out;
  }
  const Eigen::VectorXd vmax = ctx.params.safety * ctx.model.velocity_limits();
  for (std::size_t k = 0; k < m.knots.size(); ++k) {
    const Configuration& q = m.knots[k];
    const int ik = static_cast<int>(k);
    if (q.size() != ctx.model.dof() || !q.allFinite()) {
      fail(ik, "config", "wrong size or non-finite");
      continue;
    }
    const double miss = contact_residual(ctx.model, q, m.stance);
    if (miss > tol_contact) fail(ik, "contact", "residual " + std::to_string(miss) + " m");
    else if (!balanced_or_free(ctx.model, q, m.stance)) fail(ik, "balance", "no feasible contact forces");
    if (!within_joint_limits(ctx.model, q)) fail(ik, "joint_limit", "joint outside its range");
    const double clr = robot_clearance(ctx.model, ctx.world, q);
    if (clr < ctx.params.clearance) fail(ik, "collision", "clearance " + std::to_string(clr) + " m");
    if (k == 0) continue;
    const Eigen::VectorXd dq = (q - m.knots[k - 1]).cwiseAbs();
    const double dt = m.timestamps[k] - m.timestamps[k - 1];
    if (dt < 0.0) {
      fail(ik, "timing", "timestamps decrease");
    } else if (dt == 0.0) {
      if (dq.maxCoeff() > 0.0) fail(ik, "velocity", "motion in zero time");
    } else if (((dq / dt).array() - vmax.array()).maxCoeff() > 1e-9) {
      fail(ik, "velocity", "segment exceeds the scaled velocity limit");
    }
    if (dq.norm() > ctx.params.step + 1e-9) fail(ik, "step", "knots farther apart than the step size");
  }
  if (std::abs(m.duration - m.timestamps.back()) > 1e-12) fail(-1, "timing", "duration differs from last timestamp");
  return out;
}

std::vector<Violation> validate_global_plan(const MotionContext& ctx, const GlobalPlan& plan, double tol_contact) {
  std::vector<Violation> out;
  for (std::size_t j = 0; j < plan.motions.size(); ++j) {
    for (auto v : validate_motion(ctx, plan.motions[j], tol_contact)) {
      v.detail = "motion " + std::to_string(j) + ": " + v.detail;
      out.push_back(std::move(v));
    }
    if (j + 1 < plan.motions.size() && !plan.motions[j].knots.empty() && !plan.motions[j + 1].knots.empty() &&
        plan.motions[j].knots.back() != plan.motions[j + 1].knots.front())
      out.push_back({static_cast<int>(j), "chain", "motion end differs from the next motion start"});
  }
  return out;
}

nlohmann::json to_json(const Motion& m) {
  nlohmann::json knots = nlohmann::json::array();
  for (const auto& q : m.knots) knots.push_back(json_util::to_json(q));
  return {{"stance", to_json(m.stance)}, {"knots", knots}, {"timestamps", m.timestamps}, {"duration", m.duration}};
}

Motion motion_from_json(const nlohmann::json& j, const std::string& path) {
  namespace ju = json_util;
  Motion m;
  m.stance = stance_from_json(ju::require(j, "stance", path), ju::join(path, "stance"));
  const auto& knots = ju::array(ju::require(j, "knots", path), ju::join(path, "knots"));
  for (std::size_t k = 0; k < knots.size(); ++k) m.knots.push_back(ju::vector(knots[k], ju::join(path + "/knots", k)));
  const Eigen::VectorXd ts = ju::vector(ju::require(j, "timestamps", path), ju::join(path, "timestamps"));
  m.timestamps.assign(ts.data(), ts.data() + ts.size());
  m.duration = ju::number(j, "duration", path);
  if (m.timestamps.size() != m.knots.size()) throw FormatError(ju::join(path, "timestamps"), "one timestamp per knot expected");
  return m;
}

nlohmann::json to_json(const GlobalPlan& p) {
  nlohmann::json motions = nlohmann::json::array();
  for (const auto& m : p.motions) motions.push_back(to_json(m));
  return {{"format", kTrajectoryFormat}, {"motions", motions}};
}

GlobalPlan global_plan_from_json(const nlohmann::json& j, const std::string& path) {
  namespace ju = json_util;
  ju::expect_format(j, kTrajectoryFormat, path);
  GlobalPlan p;
  const auto& ms = ju::array(ju::require(j, "motions", path), ju::join(path, "motions"));
  for (std::size_t k = 0; k < ms.size(); ++k) p.motions.push_back(motion_from_json(ms[k], ju::join(path + "/motions", k)));
  return p;
}

}  // namespace locoplan
