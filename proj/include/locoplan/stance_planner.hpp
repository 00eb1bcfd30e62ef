#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "locoplan/balance.hpp"
#include "locoplan/kinematics.hpp"
#include "locoplan/world.hpp"

namespace locoplan {

struct StanceParams {
  int max_iters = 5000;
  double p_goal = 0.2;
  double beta = 0.5;          // [m] per differing contact in the stance distance
  std::uint64_t seed = 0;
  Vec2 sample_lo{-1.0, 0.0};  // base (x, z) sampling box for random targets
  Vec2 sample_hi{1.0, 1.0};
  double add_radius = 0.6;    // contact samples within this distance of the target base x
  int max_ik_iters = 200;
  double ik_damping = 1e-3;
  double ik_step_clamp = 0.2;
  int com_iters = 50;
  double com_margin = 0.02;   // how far inside the support interval the CoM shift aims
  double clearance = 0.0;     // required obstacle clearance of the collision spheres
};

enum class Rejection { None, IkFailed, Unbalanced, Collision, DuplicateStance, NoMove };

const char* to_string(Rejection r);

struct StanceVertex {
  Stance stance;
  Configuration q;
  WrenchSet wrenches;
  int parent = -1;
  int depth = 0;
  bool goal_exhausted = false;
};

struct StanceTree {
  std::vector<StanceVertex> vertices;
  std::uint64_t seed = 0;
  int iterations = 0;
  std::set<std::pair<int, std::string>> attempted;  // (parent, candidate stance key)
};

/// Inputs shared by every planning call. References must outlive the call.
struct PlanningContext {
  const RobotModel& model;
  const WorldState& world;
  StanceParams params;
};

struct Transition {
  Rejection status = Rejection::None;
  Configuration q;
  WrenchSet wrenches;

  bool ok() const { return status == Rejection::None; }
};

/// A configuration meeting the contacts of sigma_a and sigma_b, balanced on
/// their intersection. Wrenches list every contact of sigma_b; contacts not
/// shared with sigma_a carry zero force.
Transition generate_transition(const PlanningContext& ctx, const Stance& sigma_a, const Stance& sigma_b,
                               const Configuration& q_seed);

/// Result of one tree expansion.
struct ExpandResult {
  int vertex = -1;  // new vertex id, -1 on rejection
  Rejection reason = Rejection::None;
};

/// Adds the root after checking it; throws std::invalid_argument if q_init
/// misses its contacts, is unbalanced, violates limits or collides.
StanceTree make_tree(const PlanningContext& ctx, const Stance& sigma_init, const Configuration& q_init);

ExpandResult expand_step(const PlanningContext& ctx, StanceTree& tree, const Stance& sigma_goal, std::mt19937_64& rng);

struct StanceSolution {
  std::vector<Stance> stances;
  std::vector<Configuration> configs;
  std::vector<WrenchSet> wrenches;
};

/// Root-to-vertex path. Throws NotFound for an invalid id.
StanceSolution extract_solution(const StanceTree& tree, int goal_vertex);

struct PlanStats {
  bool success = false;
  double planning_time = 0.0;    // [s]
  double transition_time = 0.0;  // [s]
  int iterations = 0;
  int vertices = 0;
  int sequence_length = 0;       // |S_sigma|
  std::map<std::string, int> rejections;
};

struct StancePlanResult {
  bool success = false;
  std::string failure;
  StanceSolution solution;
  PlanStats stats;
  StanceTree tree;
};

StancePlanResult plan_stances(const PlanningContext& ctx, const Stance& sigma_init, const Configuration& q_init,
                              const Stance& sigma_goal);

struct Violation {
  int index = -1;
  std::string kind;
  std::string detail;
};

/// Independent re-check of a stance solution.
std::vector<Violation> validate_stance_solution(const PlanningContext& ctx, const StanceSolution& sol,
                                                const Stance& sigma_init, const Stance& sigma_goal,
                                                double tol_contact = 1e-6);

nlohmann::json to_json(const PlanStats& s);
PlanStats plan_stats_from_json(const nlohmann::json& j, const std::string& path);
nlohmann::json to_json(const StanceSolution& s);
StanceSolution stance_solution_from_json(const nlohmann::json& j, const std::string& path);
nlohmann::json to_json(const Violation& v);

}  // namespace locoplan
