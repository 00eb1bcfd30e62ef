#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "locoplan/lm_solver.hpp"
#include "locoplan/stance_planner.hpp"
#include "locoplan/trajectory_graph.hpp"

namespace locoplan {

struct RefinerConfig {
  int vertices = 50;  // discretization of each motion
  int window = 20;
  GraphConfig graph;                // margins and weights used by validation
  double clearance_buffer = 0.01;   // extra clearance demanded by the collision edges
  double velocity_scale = 0.9;      // velocity edges bound |dq|/dt by scale * v_max
  double anchor_tolerance = 0.05;
  double violation_tolerance = 1e-9;
  SolverParams solver;

  /// Edge configuration actually optimized: validation margins plus buffers.
  GraphConfig edge_config() const;
};

/// Moving-horizon view of one discretized motion.
struct HorizonState {
  std::vector<Configuration> configs;    // current trajectory, all vertices
  std::vector<Configuration> reference;  // the offline plan
  double dt = 0.0;
  Stance stance;
  int i = 0;
  int window = 20;
  std::uint64_t revision = 0;  // world revision last refined against
  double anchor_deviation = 0.0;  // |q_measured - planned q_i| at the last update
  int generation = 0;          // bumped on every publication

  int size() const { return static_cast<int>(configs.size()); }
  int window_end() const;      // exclusive
};

HorizonState make_horizon(std::vector<Configuration> configs, double dt, Stance stance, int window,
                          std::uint64_t revision);

/// Advances execution to i_new and anchors it at q_measured. Throws
/// std::invalid_argument if i_new < i or out of range.
HorizonState update_horizon(HorizonState state, int i_new, const Configuration& q_measured);

/// Window graph: vertices [i, window_end) plus the next vertex as a fixed
/// anchor when it exists. Vertex i and the motion's last vertex are fixed.
TrajectoryGraph build_window_graph(const HorizonState& state, const RobotModel& model,
                                   std::shared_ptr<const WorldState> world, const GraphConfig& config);

struct RefineOutcome {
  bool ran = false;        // false: no-op
  bool degraded = false;
  bool published = false;
  std::string reason;      // why the pass ran or was skipped
  int i = 0;
  int begin = 0;
  int end = 0;
  std::uint64_t revision = 0;
  double F_before = 0.0;
  double F_after = 0.0;
  double wall_ms = 0.0;
  SolveReport report;
  std::vector<Configuration> window;  // refined configs for [begin, end)
};

/// Decides whether a pass is needed and, if so, optimizes the window graph.
/// Does not modify the state.
RefineOutcome compute_refinement(const HorizonState& state, const RobotModel& model,
                                 std::shared_ptr<const WorldState> world, const RefinerConfig& config);

/// Writes a refinement into the state if it still matches the execution
/// index. A degraded result whose window collides is dropped and the
/// previous trajectory kept. Returns whether configs were written.
bool publish(HorizonState& state, RefineOutcome& outcome, const RobotModel& model, const WorldState& world,
             const RefinerConfig& config);

/// compute_refinement followed by publish.
RefineOutcome refine_tick(HorizonState& state, const RobotModel& model, std::shared_ptr<const WorldState> world,
                          const RefinerConfig& config);

/// Independent re-check of a window: joint limits, velocity at dt,
/// clearance >= clearance - 1e-6 and contact-force balance.
std::vector<Violation> validate_refinement(const std::vector<Configuration>& configs, double dt,
                                           const WorldState& world, const RobotModel& model, const Stance& stance,
                                           const GraphConfig& config, int first_index = 0);

nlohmann::json telemetry_json(const RefineOutcome& o, bool include_wall_time = true);
nlohmann::json to_json(const RefinerConfig& c);
RefinerConfig refiner_config_from_json(const nlohmann::json& j, const std::string& path, RefinerConfig base = {});

}  // namespace locoplan
