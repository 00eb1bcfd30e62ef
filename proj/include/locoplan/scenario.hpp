#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "locoplan/balance.hpp"
#include "locoplan/kinematics.hpp"
#include "locoplan/refiner.hpp"
#include "locoplan/stance_planner.hpp"
#include "locoplan/wholebody.hpp"
#include "locoplan/world.hpp"

namespace locoplan {

inline constexpr const char* kScenarioFormat = "locoplan-scenario/1";

/// Obstacle edit, scripted in a scenario or sent live through the API.
struct WorldCommand {
  enum class Op { Add, Move, Remove };
  Op op = Op::Add;
  double at = 0.0;     // sim time [s]; ignored for live commands
  std::string id;
  std::optional<Shape> shape;  // add and move
};

const char* to_string(WorldCommand::Op op);

/// Accepts {"op": "add", "id", "disc"|"box"}, {"op": "move", "id", "disc"|"box"}
/// and {"op": "remove", "id"}; "t" is read when `timed`.
WorldCommand world_command_from_json(const nlohmann::json& j, const std::string& path, bool timed);
nlohmann::json to_json(const WorldCommand& c);

/// Applies the command; returns the new revision. Throws NotFound for
/// unknown ids and std::invalid_argument for duplicate ids.
std::uint64_t apply_command(World& world, const WorldCommand& c);

struct Task {
  Configuration q_init;
  Stance sigma_init;
  std::optional<Stance> sigma_goal;
  std::optional<Vec2> goal_displacement;  // base (x, second coordinate)
};

struct SimConfig {
  double dt = 0.01;  // [s]
  std::vector<WorldCommand> events;  // sorted by time
};

struct Scenario {
  std::string name;
  nlohmann::json source;
  std::string base_dir = ".";  // resolves relative robot and point-cloud paths
  RobotModel robot;
  WorldState world;
  Task task;
  StanceParams params;
  WholeBodyParams wholebody;
  RefinerConfig refiner;
  SimConfig sim;

  const Stance& goal_stance() const { return task.sigma_goal ? *task.sigma_goal : task.sigma_init; }
  /// q_init shifted by the goal displacement, if the task has one.
  std::optional<Configuration> goal_configuration() const;
  /// FNV-1a of the canonical JSON text.
  std::uint64_t hash() const;
};

/// Parses a JSON file; syntax errors become FormatError with line and column.
nlohmann::json read_json_file(const std::string& path);

/// Throws FormatError with the offending field path.
Scenario scenario_from_json(const nlohmann::json& j, const std::string& base_dir = ".");
Scenario load_scenario(const std::string& path);

std::uint64_t fnv1a(const std::string& text);

}  // namespace locoplan
