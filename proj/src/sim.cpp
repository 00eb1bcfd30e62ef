#include "locoplan/sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "locoplan/errors.hpp"
#include "locoplan/json_util.hpp"
#include "locoplan/manifold.hpp"
#include "locoplan/trajectory_graph.hpp"

namespace locoplan {

namespace {

constexpr double kTimeEps = 1e-9;

bool is_wall_time_key(const std::string& k) {
  static const char* keys[] = {"refine_ms", "wall_ms", "wall_time", "total_refine_ms", "max_refine_ms", "max_tick_ms"};
  return std::any_of(std::begin(keys), std::end(keys), [&](const char* w) { return k == w; });
}

std::string hex64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

nlohmann::json strip_wall_time(const nlohmann::json& j) {
  if (j.is_object()) {
    nlohmann::json out = nlohmann::json::object();
    for (auto it = j.begin(); it != j.end(); ++it)
      if (!is_wall_time_key(it.key())) out[it.key()] = strip_wall_time(it.value());
    return out;
  }
  if (j.is_array()) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& v : j) out.push_back(strip_wall_time(v));
    return out;
  }
  return j;
}

std::string RunLog::to_jsonl(bool include_wall_time) const {
  std::string out;
  auto line = [&](const nlohmann::json& j) {
    out += (include_wall_time ? j : strip_wall_time(j)).dump();
    out += '\n';
  };
  line(header);
  for (const auto& t : ticks) line(t);
  if (!summary.is_null()) line(summary);
  return out;
}

void RunLog::write(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << to_jsonl();
}

RunLog RunLog::parse(const std::string& text) {
  RunLog log;
  std::istringstream in(text);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      throw FormatError("", "line " + std::to_string(n) + ": invalid JSON");
    }
    const std::string type = j.value("type", "");
    if (type == "header") {
      if (j.value("format", "") != kRunLogFormat) throw FormatError("/format", "expected \"" + std::string(kRunLogFormat) + "\"");
      log.header = std::move(j);
    } else if (type == "tick") {
      log.ticks.push_back(std::move(j));
    } else if (type == "summary") {
      log.summary = std::move(j);
    } else {
      throw FormatError("", "line " + std::to_string(n) + ": unknown record type '" + type + "'");
    }
  }
  if (log.header.is_null()) throw FormatError("", "run log has no header line");
  return log;
}

RunLog RunLog::read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::vector<Configuration> executed_path(const RunLog& log) {
  std::vector<Configuration> out;
  for (const auto& t : log.ticks) out.push_back(json_util::vector(t.at("q"), "/q"));
  return out;
}

Simulation::Simulation(std::shared_ptr<const Scenario> scenario, GlobalPlan plan, std::uint64_t seed)
    : scenario_(std::move(scenario)),
      plan_(std::move(plan)),
      seed_(seed),
      refiner_(scenario_->refiner),
      world_(scenario_->world) {
  if (plan_.motions.empty()) throw std::invalid_argument("plan has no motions");
  for (const auto& m : plan_.motions)
    if (m.knots.empty() || m.knots.front().size() != scenario_->robot.dof())
      throw std::invalid_argument("plan does not match the scenario robot");
  log_.header = {{"type", "header"},
                 {"format", kRunLogFormat},
                 {"scenario", scenario_->name},
                 {"scenario_hash", hex64(scenario_->hash())},
                 {"seed", seed_},
                 {"dt", scenario_->sim.dt},
                 {"motions", plan_.motions.size()},
                 {"vertices", refiner_.vertices},
                 {"window", refiner_.window},
                 {"refiner", to_json(refiner_)}};
  start_motion(0);
  interpolate();
  min_clearance_ = robot_clearance(scenario_->robot, *world_.snapshot(), current_);
}

void Simulation::start_motion(int m) {
  motion_ = m;
  const Motion& motion = plan_.motions[m];
  if (motion.knots.size() < 2 || motion.duration <= 0.0) {
    // a degenerate motion holds a single configuration
    horizon_ = make_horizon({motion.knots.front(), motion.knots.back()}, 1.0, motion.stance,
                            refiner_.window, world_.revision());
    vertex_dt_ = 0.0;
    return;
  }
  Discretization d = discretize_trajectory(motion, refiner_.vertices);
  vertex_dt_ = d.dt;
  horizon_ = make_horizon(std::move(d.configs), d.dt, motion.stance, refiner_.window, world_.revision());
}

// Moves to the vertex (and motion) containing the current clock.
void Simulation::locate() {
  for (;;) {
    const double duration = plan_.motions[motion_].duration;
    const double local = clock_ - motion_start_;
    if (vertex_dt_ <= 0.0 || local >= duration - kTimeEps) {
      if (motion_ + 1 < motion_count()) {
        motion_start_ += duration;
        start_motion(motion_ + 1);
        continue;
      }
      const int last = horizon_.size() - 1;
      if (horizon_.i != last) horizon_ = update_horizon(std::move(horizon_), last, horizon_.configs[last]);
      finished_ = true;
      return;
    }
    const int i = std::min(static_cast<int>(std::floor(local / vertex_dt_ + kTimeEps)), horizon_.size() - 1);
    if (i != horizon_.i) horizon_ = update_horizon(std::move(horizon_), i, horizon_.configs[i]);
    return;
  }
}

void Simulation::interpolate() {
  const int i = horizon_.i;
  if (finished_ || i + 1 >= horizon_.size() || vertex_dt_ <= 0.0) {
    current_ = horizon_.configs[i];
    return;
  }
  const double s = std::clamp((clock_ - motion_start_ - i * vertex_dt_) / vertex_dt_, 0.0, 1.0);
  current_ = (1.0 - s) * horizon_.configs[i] + s * horizon_.configs[i + 1];
}

void Simulation::step(double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("step_sim: dt must be > 0");
  if (finished_) return;
  clock_ += dt;
  locate();
  interpolate();
}

std::uint64_t Simulation::apply_world_update(const WorldCommand& cmd) { return apply_command(world_, cmd); }

RefineOutcome Simulation::refine() {
  RefineOutcome out = refine_tick(horizon_, scenario_->robot, world_.snapshot(), refiner_);
  interpolate();
  return out;
}

RefineJob Simulation::refine_job() const {
  return {finished_ ? -1 : motion_, horizon_, world_.snapshot(), refiner_};
}

void Simulation::patch_refiner(const nlohmann::json& patch) {
  RefinerConfig next = refiner_config_from_json(patch, "", refiner_);
  if (next.vertices != refiner_.vertices) throw FormatError("/vertices", "cannot change during a run");
  refiner_ = next;
  horizon_.window = refiner_.window;
  pending_patches_.push_back(patch);
}

bool Simulation::publish_async(const RefineJob& job, RefineOutcome& outcome) {
  bool ok = false;
  if (job.motion == motion_ && !finished_) ok = publish(horizon_, outcome, scenario_->robot, *job.world, job.config);
  if (outcome.ran) {
    ++refine_passes_;
    total_refine_ms_ += outcome.wall_ms;
    max_refine_ms_ = std::max(max_refine_ms_, outcome.wall_ms);
    if (ok) ++publications_;
    auto t = telemetry_json(outcome);
    t["motion"] = job.motion;
    pending_refines_.push_back(std::move(t));
    last_refine_ = outcome;
  }
  interpolate();
  return ok;
}

CommandResult Simulation::run_command(const WorldCommand& cmd, const char* source, nlohmann::json& record) {
  CommandResult r;
  nlohmann::json entry = to_json(cmd);
  entry["source"] = source;
  try {
    r.revision = apply_world_update(cmd);
    r.ok = true;
    entry["revision"] = r.revision;
  } catch (const NotFound& e) {
    r.error = e.what();
    r.not_found = true;
    entry["error"] = r.error;
  } catch (const std::invalid_argument& e) {
    r.error = e.what();
    entry["error"] = r.error;
  }
  record["commands"].push_back(std::move(entry));
  return r;
}

const nlohmann::json& Simulation::tick(double dt, const std::vector<WorldCommand>& live,
                                       std::vector<CommandResult>* results, bool sync_refine) {
  if (dt < 0.0) throw std::invalid_argument("tick: dt must be >= 0");
  ++tick_;
  nlohmann::json rec{{"type", "tick"}, {"tick", tick_}, {"advance", dt}, {"commands", nlohmann::json::array()}};
  if (!pending_patches_.empty()) {
    rec["refiner_patches"] = pending_patches_;
    pending_patches_.clear();
  }
  if (dt > 0.0) step(dt);

  const auto& events = scenario_->sim.events;
  while (next_event_ < events.size() && events[next_event_].at <= clock_ + kTimeEps)
    run_command(events[next_event_++], "script", rec);
  for (const auto& c : live) {
    WorldCommand cmd = c;
    cmd.at = clock_;
    CommandResult r = run_command(cmd, "api", rec);
    if (results) results->push_back(std::move(r));
  }

  if (sync_refine && !finished_) {
    RefineOutcome o = refine();
    if (o.ran) {
      ++refine_passes_;
      total_refine_ms_ += o.wall_ms;
      max_refine_ms_ = std::max(max_refine_ms_, o.wall_ms);
      if (o.published) ++publications_;
      auto t = telemetry_json(o);
      t["motion"] = motion_;
      pending_refines_.push_back(std::move(t));
      last_refine_ = std::move(o);
    }
  }
  interpolate();

  const double clr = robot_clearance(scenario_->robot, *world_.snapshot(), current_);
  min_clearance_ = std::min(min_clearance_, clr);
  rec["clock"] = clock_;
  rec["motion"] = motion_;
  rec["i"] = horizon_.i;
  rec["revision"] = world_.revision();
  rec["generation"] = horizon_.generation;
  rec["q"] = json_util::to_json(current_);
  rec["clearance"] = clr;
  rec["finished"] = finished_;
  rec["refine"] = pending_refines_;
  pending_refines_.clear();
  log_.ticks.push_back(std::move(rec));
  return log_.ticks.back();
}

const RunLog& Simulation::finish_log() {
  const Configuration& start = plan_.motions.front().knots.front();
  log_.summary = {{"type", "summary"},
                  {"success", finished_ && min_clearance_ >= 0.0},
                  {"finished", finished_},
                  {"ticks", tick_},
                  {"clock", clock_},
                  {"min_clearance", min_clearance_},
                  {"refine_passes", refine_passes_},
                  {"publications", publications_},
                  {"total_refine_ms", total_refine_ms_},
                  {"max_refine_ms", max_refine_ms_},
                  {"final_q", json_util::to_json(current_)},
                  {"displacement", json_util::to_json(Eigen::VectorXd(current_ - start))}};
  return log_;
}

nlohmann::json Simulation::state_json() const {
  const auto w = world_.snapshot();
  return {{"clock", clock_},
          {"tick", tick_},
          {"finished", finished_},
          {"motion", motion_},
          {"motions", motion_count()},
          {"i", horizon_.i},
          {"window", {horizon_.i, horizon_.window_end()}},
          {"vertex_dt", vertex_dt_},
          {"q", json_util::to_json(current_)},
          {"configs", [&] {
             nlohmann::json a = nlohmann::json::array();
             for (const auto& q : horizon_.configs) a.push_back(json_util::to_json(q));
             return a;
           }()},
          {"revision", w->revision},
          {"refined_revision", horizon_.revision},
          {"generation", horizon_.generation},
          {"world", world_to_json(*w)},
          {"min_clearance", min_clearance_},
          {"robot", scenario_->robot.name()}};
}

nlohmann::json Simulation::snapshot_json() const {
  const auto w = world_.snapshot();
  nlohmann::json obstacles = nlohmann::json::array();
  for (const auto& o : w->obstacles) obstacles.push_back(to_json(o));
  nlohmann::json configs = nlohmann::json::array();
  for (const auto& q : horizon_.configs) configs.push_back(json_util::to_json(q));
  return {{"tick", tick_},
          {"clock", clock_},
          {"motion", motion_},
          {"i", horizon_.i},
          {"window", {horizon_.i, horizon_.window_end()}},
          {"q", json_util::to_json(current_)},
          {"configs", std::move(configs)},
          {"obstacles", std::move(obstacles)},
          {"revision", w->revision},
          {"finished", finished_},
          {"refine", last_refine_ ? telemetry_json(*last_refine_) : nlohmann::json(nullptr)}};
}

nlohmann::json Simulation::graph_json() const {
  TrajectoryGraph g = build_window_graph(horizon_, scenario_->robot, world_.snapshot(), refiner_.edge_config());
  evaluate(g);
  nlohmann::json j = graph_to_json(g);
  j["window"] = {horizon_.i, horizon_.window_end()};
  j["F"] = total_cost(g);
  return j;
}

RunLog run_headless(std::shared_ptr<const Scenario> scenario, const GlobalPlan& plan, std::uint64_t seed,
                    long max_ticks) {
  Simulation sim(scenario, plan, seed);
  const double dt = scenario->sim.dt;
  while (!sim.finished() && sim.tick_count() < max_ticks) sim.tick(dt);
  return sim.finish_log();
}

RunLog replay(std::shared_ptr<const Scenario> scenario, const GlobalPlan& plan, const RunLog& log) {
  const std::uint64_t seed = log.header.value("seed", std::uint64_t{0});
  Simulation sim(scenario, plan, seed);
  for (const auto& rec : log.ticks) {
    if (rec.contains("refiner_patches"))
      for (const auto& p : rec.at("refiner_patches")) sim.patch_refiner(p);
    std::vector<WorldCommand> live;
    for (const auto& c : rec.at("commands"))
      if (c.value("source", "") == "api") live.push_back(world_command_from_json(c, "/commands", false));
    sim.tick(rec.at("advance").get<double>(), live);
  }
  return sim.finish_log();
}

}  // namespace locoplan
