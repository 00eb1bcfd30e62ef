#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "locoplan/refiner.hpp"
#include "locoplan/scenario.hpp"
#include "locoplan/wholebody.hpp"
#include "locoplan/world.hpp"

namespace locoplan {

inline constexpr const char* kRunLogFormat = "locoplan-runlog/1";

/// JSON-lines run record: one header, one line per tick, one summary.
struct RunLog {
  nlohmann::json header;
  std::vector<nlohmann::json> ticks;
  nlohmann::json summary;

  std::string to_jsonl(bool include_wall_time = true) const;
  void write(const std::string& path) const;
  static RunLog parse(const std::string& text);
  static RunLog read(const std::string& path);
};

/// Copy of `j` without wall-clock measurements.
nlohmann::json strip_wall_time(const nlohmann::json& j);

/// Executed configuration of every tick, in order.
std::vector<Configuration> executed_path(const RunLog& log);

/// Outcome of one world edit, as logged.
struct CommandResult {
  bool ok = false;
  std::uint64_t revision = 0;
  std::string error;      // empty when ok
  bool not_found = false;
};

/// Inputs of an asynchronous refinement pass.
struct RefineJob {
  int motion = -1;
  HorizonState horizon;
  std::shared_ptr<const WorldState> world;
  RefinerConfig config;
};

/// Kinematic executor for a global plan. Each motion is discretized into
/// `refiner.vertices` configurations and executed under its own moving
/// horizon. Not thread-safe; callers serialize access.
class Simulation {
 public:
  Simulation(std::shared_ptr<const Scenario> scenario, GlobalPlan plan, std::uint64_t seed);

  /// Advances the clock by dt > 0. The execution index follows the vertex
  /// time grid; the horizon is re-anchored whenever it moves. Throws
  /// std::invalid_argument for dt <= 0.
  void step(double dt);

  /// Applies an obstacle edit to the world; returns the new revision.
  /// Throws NotFound for unknown ids and std::invalid_argument for bad edits.
  std::uint64_t apply_world_update(const WorldCommand& cmd);

  /// One synchronous refinement pass on the active motion.
  RefineOutcome refine();

  /// One loop iteration: advance by dt (skipped when dt == 0), apply due
  /// scripted events, then the given live commands, then at most one
  /// refinement pass when `sync_refine`. Appends and returns the tick record.
  const nlohmann::json& tick(double dt, const std::vector<WorldCommand>& live = {},
                             std::vector<CommandResult>* results = nullptr, bool sync_refine = true);

  /// Applies a partial refiner configuration ("weights", margins,
  /// "window", ...) before the next pass and logs it with the next tick.
  /// Throws FormatError; the vertex count cannot change mid-run.
  void patch_refiner(const nlohmann::json& patch);
  const RefinerConfig& refiner_config() const { return refiner_; }

  RefineJob refine_job() const;
  /// Publishes an asynchronously computed pass if it still applies.
  bool publish_async(const RefineJob& job, RefineOutcome& outcome);

  bool finished() const { return finished_; }
  double clock() const { return clock_; }
  long tick_count() const { return tick_; }
  int motion_index() const { return motion_; }
  int motion_count() const { return static_cast<int>(plan_.motions.size()); }
  int index() const { return horizon_.i; }
  const HorizonState& horizon() const { return horizon_; }
  const Configuration& current() const { return current_; }
  std::shared_ptr<const WorldState> world() const { return world_.snapshot(); }
  const Scenario& scenario() const { return *scenario_; }
  const GlobalPlan& plan() const { return plan_; }
  double min_clearance() const { return min_clearance_; }

  nlohmann::json state_json() const;
  /// Compact push message: tick, configs, window bounds, obstacles, last refine report.
  nlohmann::json snapshot_json() const;
  /// Current window graph, evaluated.
  nlohmann::json graph_json() const;

  const RunLog& log() const { return log_; }
  /// Finalizes the summary line.
  const RunLog& finish_log();

 private:
  void start_motion(int m);
  void locate();
  void interpolate();
  CommandResult run_command(const WorldCommand& cmd, const char* source, nlohmann::json& record);

  std::shared_ptr<const Scenario> scenario_;
  GlobalPlan plan_;
  std::uint64_t seed_ = 0;
  RefinerConfig refiner_;
  World world_;
  std::size_t next_event_ = 0;

  int motion_ = 0;
  double motion_start_ = 0.0;
  double vertex_dt_ = 0.0;
  HorizonState horizon_;

  double clock_ = 0.0;
  long tick_ = 0;
  bool finished_ = false;
  Configuration current_;
  double min_clearance_ = 0.0;
  double total_refine_ms_ = 0.0;
  double max_refine_ms_ = 0.0;
  int refine_passes_ = 0;
  int publications_ = 0;
  std::optional<RefineOutcome> last_refine_;
  std::vector<nlohmann::json> pending_refines_;
  std::vector<nlohmann::json> pending_patches_;
  RunLog log_;
};

/// Runs the plan headless with synchronous refinement until it finishes or
/// `max_ticks` elapse.
RunLog run_headless(std::shared_ptr<const Scenario> scenario, const GlobalPlan& plan, std::uint64_t seed,
                    long max_ticks = 1000000);

/// Re-executes a logged run: same scenario and plan, live commands and
/// pauses and refiner patches injected at their logged ticks.
RunLog replay(std::shared_ptr<const Scenario> scenario, const GlobalPlan& plan, const RunLog& log);

}  // namespace locoplan
