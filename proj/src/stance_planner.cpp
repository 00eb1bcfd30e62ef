#include "locoplan/stance_planner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "locoplan/errors.hpp"
#include "locoplan/json_util.hpp"
#include "locoplan/manifold.hpp"

namespace locoplan {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Vec2 base_xz(const RobotModel& model, const Configuration& q) {
  return model.base_dof() >= 2 ? Vec2(q[0], q[1]) : Vec2::Zero();
}

Vec2 centroid(const Stance& s) {
  Vec2 c = Vec2::Zero();
  for (const auto& k : s.contacts()) c += k.position;
  return s.empty() ? c : Vec2(c / static_cast<double>(s.size()));
}

bool balanced_or_free(const RobotModel& model, const Configuration& q, const Stance& s) {
  return s.empty() || is_balanced(model, q, s);
}

WrenchSet wrenches_for(const RobotModel& model, const Configuration& q, const Stance& support, const Stance& listed) {
  WrenchSet solved;
  if (!support.empty()) {
    if (auto w = solve_contact_wrenches(model, q, support)) solved = *w;
  }
  WrenchSet out;
  for (const auto& c : listed.contacts()) {
    if (const ContactForce* f = solved.find(c.end_effector); f && support.contains(c)) {
      out.forces.push_back(*f);
    } else {
      out.forces.push_back({c.end_effector, 0.0, 0.0});
    }
  }
  return out;
}

// Parameter range of a surface whose points lie within `radius` of x = cx.
std::optional<std::pair<double, double>> reachable_range(const ContactSurface& s, double cx, double radius) {
  const double dx = s.p1.x() - s.p0.x();
  if (std::abs(dx) < 1e-12) {
    if (std::abs(s.p0.x() - cx) <= radius) return std::make_pair(0.0, 1.0);
    return std::nullopt;
  }
  double a = (cx - radius - s.p0.x()) / dx;
  double b = (cx + radius - s.p0.x()) / dx;
  if (a > b) std::swap(a, b);
  a = std::max(a, 0.0);
  b = std::min(b, 1.0);
  if (a > b) return std::nullopt;
  return std::make_pair(a, b);
}

}  // namespace

const char* to_string(Rejection r) {
  switch (r) {
    case Rejection::None: return "none";
    case Rejection::IkFailed: return "ik-failed";
    case Rejection::Unbalanced: return "unbalanced";
    case Rejection::Collision: return "collision";
    case Rejection::DuplicateStance: return "duplicate-stance";
    case Rejection::NoMove: return "no-move";
  }
  return "unknown";
}

Transition generate_transition(const PlanningContext& ctx, const Stance& sigma_a, const Stance& sigma_b,
                               const Configuration& q_seed) {
  const auto& model = ctx.model;
  const auto& p = ctx.params;
  Transition out;
  Stance both;
  try {
    both = stance_union(sigma_a, sigma_b);
  } catch (const std::invalid_argument&) {
    out.status = Rejection::IkFailed;
    return out;
  }
  const Stance shared = stance_intersection(sigma_a, sigma_b);

  ProjectOptions ik;
  ik.max_iters = p.max_ik_iters;
  ik.damping = p.ik_damping;
  ik.step_clamp = p.ik_step_clamp;
  ik.clamp_limits = true;
  auto q = project_constraints(model, q_seed, both, std::nullopt, ik);
  if (!q) {
    out.status = Rejection::IkFailed;
    return out;
  }

  if (!balanced_or_free(model, *q, shared)) {
    ProjectOptions shift;
    shift.max_iters = p.com_iters;
    shift.step_clamp = p.ik_step_clamp;
    shift.clamp_limits = true;
    bool ok = false;
    for (int round = 0; round < 3 && !ok; ++round) {
      const auto target = com_target(model, *q, shared, p.com_margin);
      if (!target) break;
      auto shifted = project_constraints(model, *q, both, *target, shift);
      if (!shifted) break;
      q = shifted;
      ok = is_balanced(model, *q, shared);
    }
    if (!ok) {
      out.status = Rejection::Unbalanced;
      return out;
    }
  }
  if (!within_joint_limits(model, *q)) {
    out.status = Rejection::IkFailed;
    return out;
  }
  if (robot_clearance(model, ctx.world, *q) < p.clearance) {
    out.status = Rejection::Collision;
    return out;
  }
  out.q = *q;
  out.wrenches = wrenches_for(model, out.q, shared, sigma_b);
  return out;
}

StanceTree make_tree(const PlanningContext& ctx, const Stance& sigma_init, const Configuration& q_init) {
  const auto& model = ctx.model;
  model.check(q_init);
  const double miss = contact_residual(model, q_init, sigma_init);
  if (miss > 1e-6) throw std::invalid_argument("initial configuration misses its contacts by " + std::to_string(miss) + " m");
  if (!balanced_or_free(model, q_init, sigma_init)) throw std::invalid_argument("initial configuration is unbalanced");
  if (!within_joint_limits(model, q_init)) throw std::invalid_argument("initial configuration violates joint limits");
  if (robot_clearance(model, ctx.world, q_init) < ctx.params.clearance)
    throw std::invalid_argument("initial configuration collides");
  StanceTree tree;
  tree.seed = ctx.params.seed;
  tree.vertices.push_back({sigma_init, q_init, wrenches_for(model, q_init, sigma_init, sigma_init), -1, 0, false});
  return tree;
}

ExpandResult expand_step(const PlanningContext& ctx, StanceTree& tree, const Stance& sigma_goal,
                         std::mt19937_64& rng) {
  if (tree.vertices.empty()) throw std::invalid_argument("expand_step needs a rooted tree");
  const auto& model = ctx.model;
  const auto& p = ctx.params;
  ++tree.iterations;

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const bool toward_goal = unit(rng) < p.p_goal;
  const StanceVertex& root = tree.vertices.front();
  const bool allow_empty = root.stance.empty();

  Vec2 target;
  Stance target_stance;
  if (toward_goal) {
    target = centroid(sigma_goal) + (base_xz(model, root.q) - centroid(root.stance));
    target_stance = sigma_goal;
  } else {
    target = {p.sample_lo.x() + unit(rng) * (p.sample_hi.x() - p.sample_lo.x()),
              p.sample_lo.y() + unit(rng) * (p.sample_hi.y() - p.sample_lo.y())};
  }

  int nearest = -1;
  double best = std::numeric_limits<double>::infinity();
  for (int v = 0; v < static_cast<int>(tree.vertices.size()); ++v) {
    const auto& vx = tree.vertices[v];
    if (toward_goal && vx.goal_exhausted) continue;
    const double d = (base_xz(model, vx.q) - target).norm() + p.beta * symmetric_difference(vx.stance, target_stance);
    if (d < best) {
      best = d;
      nearest = v;
    }
  }
  if (nearest < 0) return {-1, Rejection::NoMove};
  const Stance from = tree.vertices[nearest].stance;

  std::optional<Stance> candidate;
  if (toward_goal) {
    std::vector<Stance> moves;
    auto consider = [&](Stance s) {
      if (s.empty() && !allow_empty) return;
      if (tree.attempted.count({nearest, s.key()})) return;
      moves.push_back(std::move(s));
    };
    for (const auto& c : from.contacts())
      if (!sigma_goal.contains(c)) consider(from.without(c.end_effector));
    for (const auto& g : sigma_goal.contacts())
      if (!from.find(g.end_effector)) consider(from.with(g));
    if (moves.empty()) {
      tree.vertices[nearest].goal_exhausted = true;
      return {-1, Rejection::NoMove};
    }
    candidate = moves[std::uniform_int_distribution<std::size_t>(0, moves.size() - 1)(rng)];
  } else {
    std::vector<std::string> free_ees;
    for (const auto& ee : model.end_effectors())
      if (!from.find(ee.name)) free_ees.push_back(ee.name);
    const bool can_remove = from.size() > 1 || (allow_empty && !from.empty());
    const bool can_add = !free_ees.empty() && !ctx.world.surfaces.empty();
    if (!can_remove && !can_add) return {-1, Rejection::NoMove};
    const bool add = can_add && (!can_remove || unit(rng) < 0.5);
    if (add) {
      const std::string ee = free_ees[std::uniform_int_distribution<std::size_t>(0, free_ees.size() - 1)(rng)];
      std::vector<std::pair<const ContactSurface*, std::pair<double, double>>> options;
      for (const auto& s : ctx.world.surfaces)
        if (auto r = reachable_range(s, target.x(), p.add_radius)) options.push_back({&s, *r});
      if (options.empty()) return {-1, Rejection::NoMove};
      const auto& [surface, range] = options[std::uniform_int_distribution<std::size_t>(0, options.size() - 1)(rng)];
      const ContactPoint cp = sample_contact_point(ctx.world, surface->id, rng, range.first, range.second);
      candidate = from.with(Contact::on(ee, cp));
    } else {
      const auto& cs = from.contacts();
      candidate = from.without(cs[std::uniform_int_distribution<std::size_t>(0, cs.size() - 1)(rng)].end_effector);
    }
  }

  if (!tree.attempted.insert({nearest, candidate->key()}).second) return {-1, Rejection::DuplicateStance};

  const Transition tr = generate_transition(ctx, from, *candidate, tree.vertices[nearest].q);
  if (!tr.ok()) return {-1, tr.status};
  const int depth = tree.vertices[nearest].depth + 1;
  tree.vertices.push_back({*candidate, tr.q, tr.wrenches, nearest, depth, false});
  return {static_cast<int>(tree.vertices.size()) - 1, Rejection::None};
}

StanceSolution extract_solution(const StanceTree& tree, int goal_vertex) {
  if (goal_vertex < 0 || goal_vertex >= static_cast<int>(tree.vertices.size()))
    throw NotFound("no vertex " + std::to_string(goal_vertex) + " in the stance tree");
  std::vector<int> path;
  for (int v = goal_vertex; v >= 0; v = tree.vertices[v].parent) path.push_back(v);
  std::reverse(path.begin(), path.end());
  StanceSolution sol;
  for (int v : path) {
    sol.stances.push_back(tree.vertices[v].stance);
    sol.configs.push_back(tree.vertices[v].q);
    sol.wrenches.push_back(tree.vertices[v].wrenches);
  }
  return sol;
}

StancePlanResult plan_stances(const PlanningContext& ctx, const Stance& sigma_init, const Configuration& q_init,
                              const Stance& sigma_goal) {
  const auto t0 = Clock::now();
  StancePlanResult res;
  res.tree = make_tree(ctx, sigma_init, q_init);
  auto finish = [&](int goal) {
    res.stats.planning_time = seconds_since(t0);
    res.stats.iterations = res.tree.iterations;
    res.stats.vertices = static_cast<int>(res.tree.vertices.size());
    if (goal >= 0) {
      res.success = true;
      res.solution = extract_solution(res.tree, goal);
      res.stats.sequence_length = static_cast<int>(res.solution.stances.size());
    }
    res.stats.success = res.success;
  };
  if (sigma_init == sigma_goal) {
    finish(0);
    return res;
  }

  std::mt19937_64 rng(ctx.params.seed);
  while (res.tree.iterations < ctx.params.max_iters) {
    const auto tt = Clock::now();
    const ExpandResult r = expand_step(ctx, res.tree, sigma_goal, rng);
    res.stats.transition_time += seconds_since(tt);
    if (r.vertex < 0) {
      ++res.stats.rejections[to_string(r.reason)];
      continue;
    }
    if (res.tree.vertices[r.vertex].stance == sigma_goal) {
      finish(r.vertex);
      return res;
    }
  }
  res.failure = "iteration budget exhausted";
  finish(-1);
  return res;
}

std::vector<Violation> validate_stance_solution(const PlanningContext& ctx, const StanceSolution& sol,
                                                const Stance& sigma_init, const Stance& sigma_goal,
                                                double tol_contact) {
  const auto& model = ctx.model;
  std::vector<Violation> out;
  auto fail = [&](int j, std::string kind, std::string detail) { out.push_back({j, std::move(kind), std::move(detail)}); };

  const std::size_t n = sol.stances.size();
  if (n == 0 || sol.configs.size() != n || sol.wrenches.size() != n) {
    fail(-1, "shape", "sequences are empty or misaligned");
    return out;
  }
  if (!(sol.stances.front() == sigma_init)) fail(0, "endpoint", "first stance differs from the initial stance");
  if (!(sol.stances.back() == sigma_goal)) fail(static_cast<int>(n - 1), "endpoint", "last stance differs from the goal");

  auto check_config = [&](int j, const Configuration& q, const Stance& contacts, const Stance& support) {
    if (q.size() != model.dof() || !q.allFinite()) {
      fail(j, "config", "wrong size or non-finite");
      return;
    }
    const double miss = contact_residual(model, q, contacts);
    if (miss > tol_contact) {
      fail(j, "contact", "residual " + std::to_string(miss) + " m");
      return;
    }
    if (!balanced_or_free(model, q, support)) fail(j, "balance", "no feasible contact forces");
    if (!within_joint_limits(model, q)) fail(j, "joint_limit", "joint outside its range");
    const double clr = robot_clearance(model, ctx.world, q);
    if (clr < ctx.params.clearance) fail(j, "collision", "clearance " + std::to_string(clr) + " m");
  };

  check_config(0, sol.configs[0], sol.stances[0], sol.stances[0]);
  for (std::size_t j = 0; j + 1 < n; ++j) {
    const Stance& a = sol.stances[j];
    const Stance& b = sol.stances[j + 1];
    const int delta = symmetric_difference(a, b);
    if (delta != 1) {
      fail(static_cast<int>(j + 1), "stance_delta", "stances differ by " + std::to_string(delta) + " contacts");
      continue;
    }
    const Stance both = stance_union(a, b);
    const Stance shared = stance_intersection(a, b);
    const std::size_t before = out.size();
    check_config(static_cast<int>(j + 1), sol.configs[j + 1], both, shared);
    if (!shared.empty() && out.size() == before) {
      const auto contacts = effective_contacts(model, sol.configs[j + 1], shared);
      const Eigen::Vector3d r = equilibrium_residual(contacts, center_of_mass(model, sol.configs[j + 1]),
                                                     model.total_mass(), kGravity, sol.wrenches[j + 1]);
      if (r.norm() > 1e-6) fail(static_cast<int>(j + 1), "wrench", "stored wrenches leave residual " + std::to_string(r.norm()));
    }
  }
  return out;
}

nlohmann::json to_json(const PlanStats& s) {
  return {{"success", s.success},
          {"planning_time", s.planning_time},
          {"transition_time", s.transition_time},
          {"iterations", s.iterations},
          {"vertices", s.vertices},
          {"sequence_length", s.sequence_length},
          {"rejections", s.rejections}};
}

PlanStats plan_stats_from_json(const nlohmann::json& j, const std::string& path) {
  namespace ju = json_util;
  PlanStats s;
  s.success = ju::require(j, "success", path).get<bool>();
  s.planning_time = ju::number(j, "planning_time", path);
  s.transition_time = ju::number(j, "transition_time", path);
  s.iterations = static_cast<int>(ju::number(j, "iterations", path));
  s.vertices = static_cast<int>(ju::number(j, "vertices", path));
  s.sequence_length = static_cast<int>(ju::number(j, "sequence_length", path));
  if (j.contains("rejections")) s.rejections = j.at("rejections").get<std::map<std::string, int>>();
  return s;
}

nlohmann::json to_json(const StanceSolution& s) {
  nlohmann::json j{{"stances", nlohmann::json::array()},
                   {"configs", nlohmann::json::array()},
                   {"wrenches", nlohmann::json::array()}};
  for (const auto& st : s.stances) j["stances"].push_back(to_json(st));
  for (const auto& q : s.configs) j["configs"].push_back(json_util::to_json(q));
  for (const auto& w : s.wrenches) j["wrenches"].push_back(to_json(w));
  return j;
}

StanceSolution stance_solution_from_json(const nlohmann::json& j, const std::string& path) {
  namespace ju = json_util;
  StanceSolution s;
  const auto& st = ju::array(ju::require(j, "stances", path), ju::join(path, "stances"));
  for (std::size_t i = 0; i < st.size(); ++i) s.stances.push_back(stance_from_json(st[i], ju::join(path + "/stances", i)));
  const auto& qs = ju::array(ju::require(j, "configs", path), ju::join(path, "configs"));
  for (std::size_t i = 0; i < qs.size(); ++i) s.configs.push_back(ju::vector(qs[i], ju::join(path + "/configs", i)));
  const auto& ws = ju::array(ju::require(j, "wrenches", path), ju::join(path, "wrenches"));
  for (std::size_t i = 0; i < ws.size(); ++i) s.wrenches.push_back(wrenches_from_json(ws[i], ju::join(path + "/wrenches", i)));
  return s;
}

nlohmann::json to_json(const Violation& v) { return {{"index", v.index}, {"kind", v.kind}, {"detail", v.detail}}; }

}  // namespace locoplan
