#include "locoplan/refiner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "locoplan/json_util.hpp"
#include "locoplan/manifold.hpp"

namespace locoplan {

namespace {

struct Violations {
  double collision = 0.0;
  double other = 0.0;  // joint limits, velocity, balance
};

// Largest residual entry over edges that touch a free vertex.
Violations window_violations(const TrajectoryGraph& g) {
  Violations out;
  for (const auto& e : g.edges) {
    if (e.kind == EdgeKind::Tracking) continue;
    if (std::none_of(e.vertices.begin(), e.vertices.end(), [&](int v) { return !g.vertices[v].fixed; })) continue;
    const Eigen::VectorXd r = edge_residual(e, g);
    if (!r.size()) continue;
    double& slot = e.kind == EdgeKind::Collision ? out.collision : out.other;
    slot = std::max(slot, r.cwiseAbs().maxCoeff());
  }
  return out;
}

}  // namespace

GraphConfig RefinerConfig::edge_config() const {
  GraphConfig c = graph;
  c.clearance += clearance_buffer;
  c.velocity_scale *= velocity_scale;
  return c;
}

int HorizonState::window_end() const { return std::min(i + window, size()); }

HorizonState make_horizon(std::vector<Configuration> configs, double dt, Stance stance, int window,
                          std::uint64_t revision) {
  if (configs.size() < 2) throw std::invalid_argument("horizon needs at least two vertices");
  if (window < 2) throw std::invalid_argument("window must hold at least two vertices");
  HorizonState s;
  s.reference = configs;
  s.configs = std::move(configs);
  s.dt = dt;
  s.stance = std::move(stance);
  s.window = window;
  s.revision = revision;
  return s;
}

HorizonState update_horizon(HorizonState state, int i_new, const Configuration& q_measured) {
  if (i_new < state.i) throw std::invalid_argument("execution index cannot move backwards");
  if (i_new >= state.size()) throw std::invalid_argument("execution index past the last vertex");
  if (q_measured.size() != state.configs[i_new].size()) throw std::invalid_argument("measured configuration has the wrong size");
  state.anchor_deviation = (q_measured - state.configs[i_new]).norm();
  state.i = i_new;
  state.configs[i_new] = q_measured;
  return state;
}

TrajectoryGraph build_window_graph(const HorizonState& state, const RobotModel& model,
                                   std::shared_ptr<const WorldState> world, const GraphConfig& config) {
  const int begin = state.i;
  const int end = state.window_end();
  const int last = end < state.size() ? end : end - 1;  // include the anchor when there is one
  std::vector<Configuration> qs, refs;
  std::vector<bool> fixed;
  for (int t = begin; t <= last; ++t) {
    qs.push_back(state.configs[t]);
    refs.push_back(state.reference[t]);
    fixed.push_back(t == begin || t == end || t == state.size() - 1);
  }
  return build_graph(std::move(qs), model, std::move(world), std::move(refs), state.dt, config, state.stance,
                     std::move(fixed));
}

RefineOutcome compute_refinement(const HorizonState& state, const RobotModel& model,
                                 std::shared_ptr<const WorldState> world, const RefinerConfig& config) {
  const auto t0 = std::chrono::steady_clock::now();
  RefineOutcome out;
  out.i = state.i;
  out.begin = state.i;
  out.end = state.window_end();
  out.revision = world->revision;
  auto elapsed_ms = [&] { return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count(); };

  if (state.i >= state.size() - 1) {
    out.reason = "finished";
    out.wall_ms = elapsed_ms();
    return out;
  }
  TrajectoryGraph graph = build_window_graph(state, model, world, config.edge_config());
  const bool changed = world->revision != state.revision;
  const bool drifted = state.anchor_deviation > config.anchor_tolerance;
  // Violations are judged against the unbuffered margins so that penalty
  // residue inside the buffer does not re-trigger a pass every tick.
  // Collisions count in full. Other kinds count only beyond what the offline
  // reference itself carries over the same window (interpolated point-foot
  // balance, endpoints on a joint margin), which no pass can remove.
  HorizonState ref = state;
  ref.configs = state.reference;
  const Violations now = window_violations(build_window_graph(state, model, world, config.graph));
  const Violations base = window_violations(build_window_graph(ref, model, world, config.graph));
  const bool violated = now.collision > config.violation_tolerance ||
                        now.other > base.other + config.violation_tolerance;
  if (!changed && !drifted && !violated) {
    out.reason = "idle";
    out.wall_ms = elapsed_ms();
    return out;
  }
  out.reason = changed ? "world-revision" : (drifted ? "anchor-deviation" : "violation");
  out.ran = true;
  out.report = optimize(graph, config.solver);
  out.F_before = out.report.initial_F;
  out.F_after = out.report.final_F;
  out.degraded = out.report.termination == Termination::LambdaOverflow;
  for (int t = 0; t < out.end - out.begin; ++t) out.window.push_back(graph.vertices[t].q);
  out.wall_ms = elapsed_ms();
  return out;
}

bool publish(HorizonState& state, RefineOutcome& outcome, const RobotModel& model, const WorldState& world,
             const RefinerConfig& config) {
  outcome.published = false;
  if (!outcome.ran || outcome.i != state.i) return false;
  state.revision = outcome.revision;
  state.anchor_deviation = 0.0;
  if (outcome.degraded) {
    for (const auto& v : validate_refinement(outcome.window, state.dt, world, model, state.stance, config.graph, outcome.begin))
      if (v.kind == "collision") return false;
  }
  for (int t = outcome.begin + 1; t < outcome.end; ++t) state.configs[t] = outcome.window[t - outcome.begin];
  ++state.generation;
  outcome.published = true;
  return true;
}

RefineOutcome refine_tick(HorizonState& state, const RobotModel& model, std::shared_ptr<const WorldState> world,
                          const RefinerConfig& config) {
  RefineOutcome out = compute_refinement(state, model, world, config);
  publish(state, out, model, *world, config);
  return out;
}

std::vector<Violation> validate_refinement(const std::vector<Configuration>& configs, double dt,
                                           const WorldState& world, const RobotModel& model, const Stance& stance,
                                           const GraphConfig& config, int first_index) {
  std::vector<Violation> out;
  const Eigen::VectorXd vmax = model.velocity_limits();
  for (std::size_t k = 0; k < configs.size(); ++k) {
    const Configuration& q = configs[k];
    const int idx = first_index + static_cast<int>(k);
    if (!within_joint_limits(model, q)) out.push_back({idx, "joint_limit", "joint outside its range"});
    const double clr = robot_clearance(model, world, q);
    if (clr < config.clearance - 1e-6) out.push_back({idx, "collision", "clearance " + std::to_string(clr) + " m"});
    if (!stance.empty()) {
      if (contact_residual(model, q, stance) > kContactTolerance) {
        out.push_back({idx, "contact", "end-effector off its contact"});
      } else if (!is_balanced(model, q, stance)) {
        out.push_back({idx, "balance", "no feasible contact forces"});
      }
    }
    if (k > 0 && dt > 0.0) {
      const Eigen::VectorXd v = (q - configs[k - 1]).cwiseAbs() / dt;
      if ((v - vmax).maxCoeff() > 1e-9) out.push_back({idx, "velocity", "velocity limit exceeded"});
    }
  }
  return out;
}

nlohmann::json telemetry_json(const RefineOutcome& o, bool include_wall_time) {
  nlohmann::json j{{"i", o.i},
                   {"window", {o.begin, o.end}},
                   {"revision", o.revision},
                   {"ran", o.ran},
                   {"reason", o.reason},
                   {"degraded", o.degraded},
                   {"published", o.published},
                   {"F_before", o.F_before},
                   {"F_after", o.F_after},
                   {"termination", o.ran ? to_string(o.report.termination) : "no-op"},
                   {"iterations", o.report.iterations}};
  if (include_wall_time) j["refine_ms"] = o.wall_ms;
  return j;
}

nlohmann::json to_json(const RefinerConfig& c) {
  const auto& w = c.graph.weights;
  return {{"vertices", c.vertices},
          {"window", c.window},
          {"weights",
           {{"tracking", w.tracking},
            {"joint_limit", w.joint_limit},
            {"velocity", w.velocity},
            {"collision", w.collision},
            {"balance", w.balance}}},
          {"joint_margin", c.graph.joint_margin},
          {"clearance", c.graph.clearance},
          {"sweep_samples", c.graph.sweep_samples},
          {"clearance_buffer", c.clearance_buffer},
          {"velocity_scale", c.velocity_scale},
          {"anchor_tolerance", c.anchor_tolerance},
          {"solver", to_json(c.solver)}};
}

RefinerConfig refiner_config_from_json(const nlohmann::json& j, const std::string& path, RefinerConfig c) {
  namespace ju = json_util;
  if (!j.is_object()) throw FormatError(path, "expected an object");
  c.vertices = static_cast<int>(ju::number_or(j, "vertices", c.vertices, path));
  c.window = static_cast<int>(ju::number_or(j, "window", c.window, path));
  if (j.contains("weights")) {
    const auto& w = j.at("weights");
    const std::string p = ju::join(path, "weights");
    auto& cw = c.graph.weights;
    cw.tracking = ju::number_or(w, "tracking", cw.tracking, p);
    cw.joint_limit = ju::number_or(w, "joint_limit", cw.joint_limit, p);
    cw.velocity = ju::number_or(w, "velocity", cw.velocity, p);
    cw.collision = ju::number_or(w, "collision", cw.collision, p);
    cw.balance = ju::number_or(w, "balance", cw.balance, p);
    for (double v : {cw.tracking, cw.joint_limit, cw.velocity, cw.collision, cw.balance})
      if (!(v >= 0.0)) throw FormatError(p, "weights must be >= 0");
  }
  c.graph.joint_margin = ju::number_or(j, "joint_margin", c.graph.joint_margin, path);
  c.graph.clearance = ju::number_or(j, "clearance", c.graph.clearance, path);
  c.graph.sweep_samples = static_cast<int>(ju::number_or(j, "sweep_samples", c.graph.sweep_samples, path));
  if (c.graph.sweep_samples < 0) throw FormatError(ju::join(path, "sweep_samples"), "must be >= 0");
  c.clearance_buffer = ju::number_or(j, "clearance_buffer", c.clearance_buffer, path);
  c.velocity_scale = ju::number_or(j, "velocity_scale", c.velocity_scale, path);
  c.anchor_tolerance = ju::number_or(j, "anchor_tolerance", c.anchor_tolerance, path);
  if (j.contains("solver")) c.solver = solver_params_from_json(j.at("solver"), ju::join(path, "solver"), c.solver);
  if (c.vertices < 2) throw FormatError(ju::join(path, "vertices"), "must be >= 2");
  if (c.window < 2) throw FormatError(ju::join(path, "window"), "must be >= 2");
  if (!(c.velocity_scale > 0.0 && c.velocity_scale <= 1.0))
    throw FormatError(ju::join(path, "velocity_scale"), "must lie in (0, 1]");
  return c;
}

}  // namespace locoplan
