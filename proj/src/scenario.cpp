#include "locoplan/scenario.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "locoplan/errors.hpp"
#include "locoplan/fixtures.hpp"
#include "locoplan/json_util.hpp"

namespace locoplan {

namespace ju = json_util;

namespace {

std::string message_of(const FormatError& e) {
  const std::string w = e.what();
  const std::string prefix = e.field() + ": ";
  return (!e.field().empty() && w.rfind(prefix, 0) == 0) ? w.substr(prefix.size()) : w;
}

RobotModel load_robot(const nlohmann::json& j, const std::string& base_dir) {
  try {
    if (j.is_string()) {
      const std::string s = j.get<std::string>();
      if (s.size() > 5 && s.substr(s.size() - 5) == ".json") {
        const auto path = std::filesystem::path(base_dir) / s;
        return robot_from_json(read_json_file(path.string()));
      }
      try {
        return fixtures::by_name(s);
      } catch (const NotFound& e) {
        throw FormatError("/robot", e.what());
      }
    }
    if (j.is_object()) return robot_from_json(j);
  } catch (const FormatError& e) {
    if (e.field().rfind("/robot", 0) == 0) throw;
    throw FormatError("/robot" + e.field(), message_of(e));
  }
  throw FormatError("/robot", "expected a fixture name, a robot file path or an inline robot");
}

StanceParams stance_params_from_json(const nlohmann::json& j, const std::string& path) {
  StanceParams p;
  if (!j.is_object()) throw FormatError(path, "expected an object");
  p.max_iters = static_cast<int>(ju::number_or(j, "max_iters", p.max_iters, path));
  p.p_goal = ju::number_or(j, "p_goal", p.p_goal, path);
  p.beta = ju::number_or(j, "beta", p.beta, path);
  p.seed = static_cast<std::uint64_t>(ju::number_or(j, "seed", 0.0, path));
  if (j.contains("sample_lo")) p.sample_lo = ju::vec2(j.at("sample_lo"), ju::join(path, "sample_lo"));
  if (j.contains("sample_hi")) p.sample_hi = ju::vec2(j.at("sample_hi"), ju::join(path, "sample_hi"));
  p.add_radius = ju::number_or(j, "add_radius", p.add_radius, path);
  p.max_ik_iters = static_cast<int>(ju::number_or(j, "max_ik_iters", p.max_ik_iters, path));
  p.ik_damping = ju::number_or(j, "ik_damping", p.ik_damping, path);
  p.ik_step_clamp = ju::number_or(j, "ik_step_clamp", p.ik_step_clamp, path);
  p.com_iters = static_cast<int>(ju::number_or(j, "com_iters", p.com_iters, path));
  p.com_margin = ju::number_or(j, "com_margin", p.com_margin, path);
  p.clearance = ju::number_or(j, "clearance", p.clearance, path);
  if (p.max_iters < 0) throw FormatError(ju::join(path, "max_iters"), "must be >= 0");
  if (!(p.p_goal >= 0.0 && p.p_goal <= 1.0)) throw FormatError(ju::join(path, "p_goal"), "must lie in [0, 1]");
  return p;
}

WholeBodyParams wholebody_params_from_json(const nlohmann::json& j, const std::string& path) {
  WholeBodyParams p;
  if (!j.is_object()) throw FormatError(path, "expected an object");
  p.step = ju::number_or(j, "step", p.step, path);
  p.safety = ju::number_or(j, "safety", p.safety, path);
  p.max_iters = static_cast<int>(ju::number_or(j, "max_iters", p.max_iters, path));
  p.shortcut_attempts = static_cast<int>(ju::number_or(j, "shortcut_attempts", p.shortcut_attempts, path));
  p.goal_bias = ju::number_or(j, "goal_bias", p.goal_bias, path);
  p.com_margin = ju::number_or(j, "com_margin", p.com_margin, path);
  p.clearance = ju::number_or(j, "clearance", p.clearance, path);
  p.sample_pad = ju::number_or(j, "sample_pad", p.sample_pad, path);
  if (!(p.step > 0.0)) throw FormatError(ju::join(path, "step"), "must be > 0");
  if (!(p.safety > 0.0 && p.safety <= 1.0)) throw FormatError(ju::join(path, "safety"), "must lie in (0, 1]");
  return p;
}

}  // namespace

const char* to_string(WorldCommand::Op op) {
  switch (op) {
    case WorldCommand::Op::Add: return "add";
    case WorldCommand::Op::Move: return "move";
    case WorldCommand::Op::Remove: return "remove";
  }
  return "unknown";
}

WorldCommand world_command_from_json(const nlohmann::json& j, const std::string& path, bool timed) {
  WorldCommand c;
  const std::string op = ju::string(j, "op", path);
  if (op == "add") {
    c.op = WorldCommand::Op::Add;
  } else if (op == "move") {
    c.op = WorldCommand::Op::Move;
  } else if (op == "remove") {
    c.op = WorldCommand::Op::Remove;
  } else {
    throw FormatError(ju::join(path, "op"), "expected \"add\", \"move\" or \"remove\"");
  }
  c.id = ju::string(j, "id", path);
  if (timed) {
    c.at = ju::number(j, "t", path);
    if (!(c.at >= 0.0)) throw FormatError(ju::join(path, "t"), "must be >= 0");
  }
  if (c.op != WorldCommand::Op::Remove) c.shape = shape_from_json(j, path);
  return c;
}

nlohmann::json to_json(const WorldCommand& c) {
  nlohmann::json j = c.shape ? shape_to_json(*c.shape) : nlohmann::json::object();
  j["op"] = to_string(c.op);
  j["id"] = c.id;
  j["t"] = c.at;
  return j;
}

std::uint64_t apply_command(World& world, const WorldCommand& c) {
  switch (c.op) {
    case WorldCommand::Op::Add: return world.add_obstacle({c.id, *c.shape, c.at});
    case WorldCommand::Op::Move: return world.move_obstacle(c.id, *c.shape);
    case WorldCommand::Op::Remove: return world.remove_obstacle(c.id);
  }
  return world.revision();
}

std::optional<Configuration> Scenario::goal_configuration() const {
  if (!task.goal_displacement) return std::nullopt;
  if (robot.base_dof() < 2) return std::nullopt;
  Configuration q = task.q_init;
  q[0] += task.goal_displacement->x();
  q[1] += task.goal_displacement->y();
  return q;
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t Scenario::hash() const { return fnv1a(source.dump()); }

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t k = 0; k + 1 < e.byte && k < text.size(); ++k) {
      if (text[k] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw FormatError("", path + ":" + std::to_string(line) + ":" + std::to_string(col) + ": invalid JSON");
  }
}

Scenario scenario_from_json(const nlohmann::json& j, const std::string& base_dir) {
  if (!j.is_object()) throw FormatError("/", "expected an object");
  ju::expect_format(j, kScenarioFormat);
  Scenario s;
  s.source = j;
  s.base_dir = base_dir;
  s.name = j.contains("name") ? ju::string(j.at("name"), "/name") : "scenario";
  s.robot = load_robot(ju::require(j, "robot", ""), base_dir);

  if (j.contains("surfaces")) {
    const auto& arr = ju::array(j.at("surfaces"), "/surfaces");
    for (std::size_t i = 0; i < arr.size(); ++i) s.world.surfaces.push_back(surface_from_json(arr[i], ju::join("/surfaces", i)));
  }
  if (j.contains("obstacles")) {
    const auto& arr = ju::array(j.at("obstacles"), "/obstacles");
    for (std::size_t i = 0; i < arr.size(); ++i) s.world.obstacles.push_back(obstacle_from_json(arr[i], ju::join("/obstacles", i)));
  }
  if (j.contains("point_cloud")) {
    const auto& pc = j.at("point_cloud");
    const auto path = std::filesystem::path(base_dir) / ju::string(pc, "path", "/point_cloud");
    const double cell = ju::number(pc, "cell", "/point_cloud");
    if (!(cell > 0.0)) throw FormatError("/point_cloud/cell", "must be > 0");
    for (auto& o : ingest_point_cloud(read_point_cloud(path.string()), cell)) s.world.obstacles.push_back(std::move(o));
  }
  try {
    validate(s.world);
  } catch (const std::invalid_argument& e) {
    throw FormatError("/", e.what());
  }

  const auto& task = ju::require(j, "task", "");
  s.task.q_init = ju::vector(ju::require(task, "q_init", "/task"), "/task/q_init");
  if (s.task.q_init.size() != s.robot.dof())
    throw FormatError("/task/q_init", "expected " + std::to_string(s.robot.dof()) + " values for robot '" +
                                          s.robot.name() + "', got " + std::to_string(s.task.q_init.size()));
  const bool rolling = task.contains("rolling") && task.at("rolling").get<bool>();
  auto check_ees = [&](const Stance& st, const std::string& path) {
    for (const auto& c : st.contacts())
      if (!s.robot.has_frame(c.end_effector)) throw FormatError(path, "unknown end-effector '" + c.end_effector + "'");
  };
  s.task.sigma_init = stance_from_task_json(ju::require(task, "sigma_init", "/task"), s.world, "/task/sigma_init", rolling);
  check_ees(s.task.sigma_init, "/task/sigma_init");
  if (task.contains("sigma_goal")) {
    s.task.sigma_goal = stance_from_task_json(task.at("sigma_goal"), s.world, "/task/sigma_goal", rolling);
    check_ees(*s.task.sigma_goal, "/task/sigma_goal");
  }
  if (task.contains("goal_displacement")) s.task.goal_displacement = ju::vec2(task.at("goal_displacement"), "/task/goal_displacement");
  if (!s.task.sigma_goal && !s.task.goal_displacement)
    throw FormatError("/task", "needs \"sigma_goal\" or \"goal_displacement\"");

  if (j.contains("params")) s.params = stance_params_from_json(j.at("params"), "/params");
  if (j.contains("wholebody")) s.wholebody = wholebody_params_from_json(j.at("wholebody"), "/wholebody");
  if (j.contains("refiner")) s.refiner = refiner_config_from_json(j.at("refiner"), "/refiner");
  if (j.contains("sim")) {
    const auto& sim = j.at("sim");
    s.sim.dt = ju::number_or(sim, "dt", s.sim.dt, "/sim");
    if (!(s.sim.dt > 0.0)) throw FormatError("/sim/dt", "must be > 0");
    if (sim.contains("events")) {
      const auto& arr = ju::array(sim.at("events"), "/sim/events");
      for (std::size_t i = 0; i < arr.size(); ++i)
        s.sim.events.push_back(world_command_from_json(arr[i], ju::join("/sim/events", i), true));
      std::stable_sort(s.sim.events.begin(), s.sim.events.end(),
                       [](const WorldCommand& a, const WorldCommand& b) { return a.at < b.at; });
    }
  }
  return s;
}

Scenario load_scenario(const std::string& path) {
  const auto j = read_json_file(path);
  return scenario_from_json(j, std::filesystem::absolute(std::filesystem::path(path)).parent_path().string());
}

}  // namespace locoplan
