// Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned below.
// Exit status is the number of failed criteria (0 when all pass).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "graph_fd.hpp"
#include "grid_oracle.hpp"
#include "locoplan/balance.hpp"
#include "locoplan/fixtures.hpp"
#include "locoplan/lm_solver.hpp"
#include "locoplan/manifold.hpp"
#include "locoplan/pipeline.hpp"
#include "locoplan/refiner.hpp"
#include "locoplan/sim.hpp"
#include "oracles.hpp"

using namespace locoplan;

namespace {

// Pinned tolerances and budgets.
constexpr int kDerivativeGraphs = 50;
constexpr double kGradientRelTol = 1e-5;
constexpr double kJacobianTol = 1e-5;
constexpr double kDerivativeSeconds = 10.0;
constexpr double kLmResidualTol = 1e-10;
constexpr double kQuadraticTol = 1e-12;
constexpr double kDisplacementTol = 1e-9;
constexpr double kClearanceSlack = 1e-6;
constexpr double kGridSlack = 1e-6;
constexpr int kGridOffsets = 21;
constexpr double kGridHalfWidth = 0.8;  // [m] lateral
constexpr double kObstacleSeconds = 60.0;
constexpr int kLatencyTicks = 240;
constexpr double kLatencyCeilingMs = 70.0;
constexpr int kOfflineRuns = 100;
constexpr int kOfflineMinSuccess = 95;
constexpr int kBalanceCases = 1000;
constexpr double kSymmetricTol = 1e-9;  // times mg
constexpr double kContactTol = 1e-6;
constexpr double kVelocitySlack = 1e-9;
constexpr double kBindingTol = 1e-9;

const std::string kDir = LOCOPLAN_SCENARIO_DIR;

int g_failed = 0;

void report(const std::string& name, bool pass, const std::string& detail) {
  std::cout << (pass ? "PASS " : "FAIL ") << name << ": " << detail << std::endl;
  if (!pass) ++g_failed;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Configuration xz(double x, double z) { return Configuration(Vec2(x, z)); }

std::shared_ptr<WorldState> world_of(std::vector<Obstacle> obstacles, std::uint64_t revision = 0) {
  auto w = std::make_shared<WorldState>();
  w->obstacles = std::move(obstacles);
  w->revision = revision;
  return w;
}

struct Loaded {
  std::shared_ptr<const Scenario> scenario;
  PipelineResult result;
};

Loaded plan_scenario(const std::string& name, std::uint64_t seed = 0) {
  auto s = std::make_shared<Scenario>(load_scenario(kDir + "/" + name + ".json"));
  return {s, run_pipeline(*s, seed)};
}

// ---------------------------------------------------------------------------
// Derivative correctness

struct DerivativeStats {
  double worst_gradient = 0.0;
  double worst_jacobian = 0.0;
  long rows_checked = 0;
  std::set<std::string> kinds_active;
  int graphs_missing_kinds = 0;
};

void check_graph_derivatives(TrajectoryGraph& g, const std::set<EdgeKind>& must_be_active, DerivativeStats& st) {
  evaluate(g);
  std::set<EdgeKind> active;
  for (const auto& e : g.edges)
    if (e.residual.size() && e.residual.cwiseAbs().maxCoeff() > 0.0 && e.kind != EdgeKind::Tracking) active.insert(e.kind);
  for (const auto& e : g.edges)
    if (e.kind == EdgeKind::Tracking && e.residual.cwiseAbs().maxCoeff() > 0.0) active.insert(e.kind);
  for (EdgeKind k : must_be_active)
    if (!active.count(k)) {
      ++st.graphs_missing_kinds;
      break;
    }
  for (EdgeKind k : active) st.kinds_active.insert(to_string(k));

  const LinearSystem sys = assemble_system(g);
  const Eigen::VectorXd x = free_vector(g);
  auto cost = [&](const Eigen::VectorXd& y) {
    set_free_vector(g, y);
    const double f = total_cost(g);
    set_free_vector(g, x);
    return f;
  };
  const Eigen::VectorXd half_grad = 0.5 * oracle::fd_gradient(cost, x, 1e-6);
  st.worst_gradient = std::max(st.worst_gradient, (sys.b - half_grad).norm() / std::max(half_grad.norm(), 1e-300));

  for (const auto& e : g.edges) {
    const auto jac = edge_jacobian(e, g);
    const Eigen::VectorXd res = edge_residual(e, g);
    for (std::size_t m = 0; m < e.vertices.size(); ++m) {
      const Eigen::MatrixXd fd = oracle::fd_edge(g, e, static_cast<int>(m));
      for (Eigen::Index r = 0; r < fd.rows(); ++r) {
        if (oracle::near_kink(res[r], fd.row(r))) continue;
        st.worst_jacobian = std::max(st.worst_jacobian, (jac[m].row(r) - fd.row(r)).cwiseAbs().maxCoeff());
        ++st.rows_checked;
      }
    }
  }
}

void criterion_derivatives() {
  const auto t0 = std::chrono::steady_clock::now();
  DerivativeStats point, wheeler;
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-1.0, 1.0);

  // point-robot-2d: 12 vertices with fixed ends leave 10 free
  const auto robot = fixtures::point_robot_2d();
  for (int trial = 0; trial < kDerivativeGraphs; ++trial) {
    std::vector<Configuration> q, ref;
    for (int k = 0; k < 12; ++k) {
      q.push_back(xz(0.1 * k + 0.03 * u(rng), 0.1 * u(rng)));
      ref.push_back(q.back() + xz(0.05 * u(rng), 0.05 * u(rng)));
    }
    const auto world = world_of({{"a", Disc{{0.35 + 0.1 * u(rng), 0.05 * u(rng)}, 0.15}, 0.0},
                                 {"b", Disc{{0.8 + 0.1 * u(rng), 0.3 + 0.05 * u(rng)}, 0.2}, 0.0}});
    const double lo = 0.2 + 0.1 * u(rng);
    const Stance feet({{"l", "", {lo, 0.0}, Vec2::UnitY(), 0.5}, {"r", "", {lo + 0.4, 0.0}, Vec2::UnitY(), 0.5}});
    std::vector<bool> fixed(12, false);
    fixed.front() = fixed.back() = true;
    auto g = build_graph(q, robot, world, ref, 0.05, GraphConfig{}, feet, fixed);
    check_graph_derivatives(g, {EdgeKind::Velocity, EdgeKind::Collision, EdgeKind::Balance, EdgeKind::Tracking},
                            point);
  }

  // planar-wheeler-6dof: the point robot has no joints, so joint-limit
  // derivatives are exercised here
  const auto wrobot = fixtures::planar_wheeler_6dof();
  const Stance rolling({{"wheel_fl", "", Vec2::Zero(), Vec2::UnitY(), 0.5},
                        {"wheel_fr", "", Vec2::Zero(), Vec2::UnitY(), 0.5},
                        {"wheel_rl", "", Vec2::Zero(), Vec2::UnitY(), 0.5},
                        {"wheel_rr", "", Vec2::Zero(), Vec2::UnitY(), 0.5}},
                       true);
  for (int trial = 0; trial < kDerivativeGraphs; ++trial) {
    std::vector<Configuration> q, ref;
    for (int k = 0; k < 12; ++k) {
      Configuration c(6);
      c << 0.12 * k + 0.05 * u(rng), 0.2 * u(rng), 0.5 * u(rng), 0.6 * u(rng), 0.6 * u(rng), 1.1 * u(rng);
      q.push_back(c);
      ref.push_back(c + 0.05 * Configuration::Random(6));
    }
    const auto world = world_of({{"a", Disc{{0.6 + 0.2 * u(rng), 0.35}, 0.2}, 0.0}});
    std::vector<bool> fixed(12, false);
    fixed.front() = fixed.back() = true;
    auto g = build_graph(q, wrobot, world, ref, 0.05, GraphConfig{}, rolling, fixed);
    check_graph_derivatives(g, {EdgeKind::JointLimit, EdgeKind::Velocity, EdgeKind::Tracking}, wheeler);
  }

  const double secs = seconds_since(t0);
  const double grad = std::max(point.worst_gradient, wheeler.worst_gradient);
  const double jac = std::max(point.worst_jacobian, wheeler.worst_jacobian);
  std::set<std::string> kinds = point.kinds_active;
  kinds.insert(wheeler.kinds_active.begin(), wheeler.kinds_active.end());
  const bool pass = grad <= kGradientRelTol && jac <= kJacobianTol && secs < kDerivativeSeconds &&
                    point.graphs_missing_kinds == 0 && wheeler.graphs_missing_kinds == 0 && kinds.size() == 5;
  std::ostringstream d;
  d << kDerivativeGraphs << " point-robot + " << kDerivativeGraphs << " wheeler graphs, gradient rel err "
    << fmt("%.2e", grad) << ", jacobian err " << fmt("%.2e", jac) << " over " << point.rows_checked + wheeler.rows_checked
    << " rows, kinds active " << kinds.size() << "/5, graphs missing a kind "
    << point.graphs_missing_kinds + wheeler.graphs_missing_kinds << ", " << fmt("%.2f", secs) << " s";
  report("derivatives", pass, d.str());
}

// ---------------------------------------------------------------------------
// Linear-system exactness

void criterion_lm_exactness() {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(-1.0, 1.0), w(0.5, 2.0);
  double worst_res = 0.0;
  int systems = 0;
  // random banded normal equations
  for (int trial = 0; trial < 50; ++trial) {
    const int cols = 12 + trial % 30;
    Eigen::MatrixXd j(cols * 3, cols);
    for (int r = 0; r < j.rows(); ++r)
      for (int c = 0; c < cols; ++c) j(r, c) = (std::abs(r / 3 - c) <= 1) ? n(rng) : 0.0;
    const Eigen::SparseMatrix<double> h = Eigen::MatrixXd(j.transpose() * j).sparseView();
    Eigen::VectorXd b(cols);
    for (int k = 0; k < cols; ++k) b[k] = n(rng);
    for (double lambda : {0.0, 1e-8, 1e-4, 1.0, 1e4}) {
      const Eigen::VectorXd dx = lm_step(h, b, lambda);
      worst_res = std::max(worst_res, (Eigen::MatrixXd(h) * dx + lambda * dx + b).norm() / (1.0 + b.norm()));
      ++systems;
    }
  }
  // assembled systems of obstacle graphs
  const auto robot = fixtures::point_robot_2d();
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Configuration> q;
    for (int k = 0; k < 20; ++k) q.push_back(xz(0.1 * k, 0.02 * u(rng)));
    auto g = build_graph(q, robot, world_of({{"d", Disc{{1.0 + 0.3 * u(rng), 0.05 * u(rng)}, 0.3}, 0.0}}), q, 0.2,
                         GraphConfig{});
    evaluate(g);
    const auto sys = assemble_system(g);
    for (double lambda : {1e-8, 1e-4, 1.0}) {
      const Eigen::VectorXd dx = lm_step(sys.H, sys.b, lambda);
      worst_res =
          std::max(worst_res, (Eigen::MatrixXd(sys.H) * dx + lambda * dx + sys.b).norm() / (1.0 + sys.b.norm()));
      ++systems;
    }
  }

  // purely quadratic graphs: tracking only, minimum at the reference
  double worst_quad = 0.0;
  const auto wrobot = fixtures::planar_wheeler_6dof();
  for (int trial = 0; trial < 20; ++trial) {
    const bool use_wheeler = trial % 2 == 1;
    const RobotModel& m = use_wheeler ? wrobot : robot;
    std::vector<Configuration> q, ref;
    std::vector<bool> fixed;
    for (int k = 0; k < 15; ++k) {
      Configuration r = Configuration::Zero(m.dof());
      r[0] = 0.02 * k;
      ref.push_back(r);
      // small offsets keep every hinge edge inactive
      Configuration c = r;
      for (int d = 1; d < m.dof(); ++d) c[d] += 0.01 * u(rng);
      c[0] += 0.002 * u(rng);
      q.push_back(c);
      fixed.push_back(k == 0 || k == 7);
    }
    GraphConfig cfg;
    cfg.weights.tracking = w(rng);
    auto g = build_graph(q, m, nullptr, ref, 1.0, cfg, {}, fixed);
    evaluate(g);
    if (max_violation(g) != 0.0) worst_quad = 1.0;  // not a quadratic graph; fail loudly
    const auto sys = assemble_system(g);
    set_free_vector(g, free_vector(g) + lm_step(sys.H, sys.b, 0.0));
    for (int k = 0; k < 15; ++k)
      if (!fixed[k]) worst_quad = std::max(worst_quad, (g.vertices[k].q - ref[k]).cwiseAbs().maxCoeff());
  }
  const bool pass = worst_res <= kLmResidualTol && worst_quad <= kQuadraticTol;
  report("lm_exactness", pass,
         std::to_string(systems) + " systems, max |(H+lambda I)dx+b|/(1+|b|) " + fmt("%.2e", worst_res) +
             "; 20 quadratic graphs, max distance to analytic minimum after one step " + fmt("%.2e", worst_quad));
}

// ---------------------------------------------------------------------------
// Sparsity

void criterion_sparsity() {
  static_assert(std::is_same_v<decltype(LinearSystem::H), Eigen::SparseMatrix<double>>,
                "H is assembled as a sparse matrix");
  static_assert(std::is_invocable_r_v<Eigen::VectorXd, decltype(&lm_step), const Eigen::SparseMatrix<double>&,
                                      const Eigen::VectorXd&, double>,
                "the step is solved on the sparse matrix");
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::bernoulli_distribution coin(0.2);
  const auto point = fixtures::point_robot_2d();
  const auto wheeler = fixtures::planar_wheeler_6dof();
  int graphs = 0, mismatches = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const RobotModel& m = trial % 2 ? wheeler : point;
    const int nv = 5 + trial % 25;
    std::vector<Configuration> q;
    std::vector<bool> fixed;
    for (int k = 0; k < nv; ++k) {
      Configuration c = Configuration::Zero(m.dof());
      c[0] = 0.1 * k + 0.03 * u(rng);
      c[1] = 0.1 * u(rng);
      q.push_back(c);
      fixed.push_back(coin(rng));
    }
    if (std::none_of(fixed.begin(), fixed.end(), [](bool f) { return !f; })) fixed[nv / 2] = false;
    GraphConfig cfg;
    cfg.sweep_samples = trial % 3 == 0 ? 0 : 3;
    auto g = build_graph(q, m, world_of({{"d", Disc{{0.5 + u(rng), 0.0}, 0.3}, 0.0}}), q, 0.1, cfg, {}, fixed);
    evaluate(g);
    const auto sys = assemble_system(g);
    const auto offsets = g.free_offsets();
    std::map<int, int> block_of;  // stacked column offset -> vertex
    for (int v = 0; v < nv; ++v)
      if (offsets[v] >= 0) block_of[offsets[v] / m.dof()] = v;
    std::set<std::pair<int, int>> expected, actual;
    for (const auto& e : g.edges)
      for (int a : e.vertices)
        for (int b : e.vertices)
          if (offsets[a] >= 0 && offsets[b] >= 0) expected.insert({a, b});
    for (int k = 0; k < sys.H.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(sys.H, k); it; ++it)
        actual.insert({block_of.at(static_cast<int>(it.row()) / m.dof()), block_of.at(static_cast<int>(it.col()) / m.dof())});
    ++graphs;
    mismatches += expected != actual;
  }
  // a 20-vertex window of the wheeler: block tridiagonal, far from dense
  auto h = make_horizon(std::vector<Configuration>(50, Configuration::Zero(6)), 0.1, {}, 20, 0);
  for (int k = 0; k < 50; ++k) h.configs[k][0] = h.reference[k][0] = 0.08 * k;
  auto wg = build_window_graph(h, wheeler, world_of({}), RefinerConfig{}.edge_config());
  evaluate(wg);
  const auto ws = assemble_system(wg);
  const long n = ws.H.rows();
  const long dense = n * n;
  const long tridiagonal = (3 * (n / 6) - 2) * 36;
  const bool window_ok = ws.H.nonZeros() <= tridiagonal && ws.H.nonZeros() < dense / 4;
  report("sparsity", mismatches == 0 && window_ok,
         std::to_string(graphs) + " randomized graphs, block pattern mismatches " + std::to_string(mismatches) +
             "; 20-vertex wheeler window: " + std::to_string(ws.H.nonZeros()) + " stored entries vs " +
             std::to_string(dense) + " dense, factorized by sparse LDL^T");
}

// ---------------------------------------------------------------------------
// Fixed point

void criterion_fixed_point() {
  std::ostringstream d;
  bool pass = true;
  for (const std::string name : {"point_straight", "wheeler_straight"}) {
    const auto l = plan_scenario(name);
    if (!l.result.success) {
      pass = false;
      d << name << ": offline plan failed; ";
      continue;
    }
    // every tick of the run
    const RunLog log = run_headless(l.scenario, l.result.plan, 0);
    int passes = 0;
    for (const auto& t : log.ticks) passes += static_cast<int>(t.at("refine").size());
    const auto disp = log.summary.at("displacement");
    const double ex = std::abs(disp[0].get<double>() - 4.0), ey = std::abs(disp[1].get<double>());
    // direct refine_tick at every vertex
    const auto& motion = l.result.plan.motions.front();
    const auto dz = discretize_trajectory(motion, l.scenario->refiner.vertices);
    auto h = make_horizon(dz.configs, dz.dt, motion.stance, l.scenario->refiner.window, 0);
    const auto world = std::make_shared<const WorldState>(l.scenario->world);
    int ran = 0;
    for (int i = 0; i < h.size(); ++i) {
      h = update_horizon(h, i, h.configs[i]);
      ran += refine_tick(h, l.scenario->robot, world, l.scenario->refiner).ran;
    }
    const bool ok = log.summary.at("finished").get<bool>() && passes == 0 && ran == 0 && h.configs == dz.configs &&
                    ex <= kDisplacementTol && ey <= kDisplacementTol;
    pass = pass && ok;
    d << name << ": " << l.result.plan.motions.size() << " motion(s), " << h.size() << " configs, refine passes "
      << passes + ran << ", displacement error (" << fmt("%.1e", ex) << ", " << fmt("%.1e", ey) << "); ";
  }
  report("fixed_point", pass, d.str());
}

// ---------------------------------------------------------------------------
// Obstacle refinement

void criterion_obstacle() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto l = plan_scenario("wheeler_obstacle");
  if (!l.result.success) {
    report("obstacle_refinement", false, "offline plan failed: " + l.result.failure);
    return;
  }
  const Scenario& sc = *l.scenario;
  const double eps = sc.refiner.graph.clearance;
  Simulation sim(l.scenario, l.result.plan, 0);
  double min_clearance = 1e300;
  long outside_changes = 0, published = 0;
  int insert_i = -1;
  double final_F = -1.0;
  while (!sim.finished()) {
    const auto before = sim.horizon().configs;
    const int motion = sim.motion_index();
    const auto& rec = sim.tick(sc.sim.dt);
    min_clearance = std::min(min_clearance, rec.at("clearance").get<double>());
    const auto& h = sim.horizon();
    if (sim.motion_index() == motion) {
      for (int k = 0; k < h.size(); ++k)
        if ((k < h.i || k >= h.window_end()) && !(before[k].array() == h.configs[k].array()).all()) ++outside_changes;
    }
    for (const auto& r : rec.at("refine")) {
      published += r.at("published").get<bool>();
      if (insert_i < 0 && r.at("reason") == "world-revision") insert_i = r.at("i").get<int>();
      if (insert_i >= 0 && r.at("i").get<int>() == insert_i) final_F = r.at("F_after").get<double>();
    }
  }
  const RunLog& log = sim.finish_log();

  // grid oracle over the window graph at the insertion index
  double grid_F = -1.0;
  if (insert_i >= 0) {
    const auto& motion = l.result.plan.motions.front();
    const auto dz = discretize_trajectory(motion, sc.refiner.vertices);
    auto h = make_horizon(dz.configs, dz.dt, motion.stance, sc.refiner.window, 0);
    h = update_horizon(h, insert_i, h.configs[insert_i]);
    World w(sc.world);
    for (const auto& e : sc.sim.events) apply_command(w, e);
    const auto g = build_window_graph(h, sc.robot, w.snapshot(), sc.refiner.edge_config());
    grid_F = oracle::grid_search(g, 1, oracle::lateral_offsets(kGridHalfWidth, kGridOffsets)).F;
  }
  const double secs = seconds_since(t0);
  const bool pass = log.summary.at("finished").get<bool>() && insert_i >= 0 && published > 0 &&
                    min_clearance >= eps - kClearanceSlack && outside_changes == 0 && final_F >= 0.0 &&
                    final_F <= grid_F + kGridSlack && secs < kObstacleSeconds;
  std::ostringstream d;
  d << "wheeler, " << sc.refiner.vertices << " configs, W=" << sc.refiner.window << ", disc inserted at i=" << insert_i
    << "; min clearance " << fmt("%.4f", min_clearance) << " (eps " << eps << "), out-of-window changes "
    << outside_changes << ", publications " << published << ", final F " << fmt("%.6f", final_F) << " vs grid F "
    << fmt("%.6f", grid_F) << " (" << kGridOffsets << " lateral offsets), " << fmt("%.2f", secs) << " s";
  report("obstacle_refinement", pass, d.str());
}

// ---------------------------------------------------------------------------
// Latency

void criterion_latency() {
  const auto l = plan_scenario("wheeler_obstacle");
  if (!l.result.success) {
    report("latency", false, "offline plan failed");
    return;
  }
  const Scenario& sc = *l.scenario;
  const auto& motion = l.result.plan.motions.front();
  const auto dz = discretize_trajectory(motion, sc.refiner.vertices);
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> ms;
  int full_windows = 0;
  for (int trial = 0; trial < kLatencyTicks; ++trial) {
    auto h = make_horizon(dz.configs, dz.dt, motion.stance, sc.refiner.window, 0);
    const int i = trial % 30;
    h = update_horizon(h, i, h.configs[i]);
    full_windows += h.window_end() - h.i == sc.refiner.window;
    const double x = h.configs[i][0] + 0.3 + 1.0 * (u(rng) + 1.0);
    const auto world = world_of({{"d", Disc{{x, 0.15 * u(rng)}, 0.3}, 0.0}}, 1);  // new revision forces a solve
    const auto t0 = std::chrono::steady_clock::now();
    const auto o = refine_tick(h, sc.robot, world, sc.refiner);
    ms.push_back(1e3 * seconds_since(t0));
    if (!o.ran) ms.back() = 1e9;  // a skipped pass would not measure a solve
  }
  std::vector<double> sorted = ms;
  std::sort(sorted.begin(), sorted.end());
  const double median = sorted[sorted.size() / 2];
  const double p95 = sorted[static_cast<std::size_t>(std::ceil(0.95 * sorted.size())) - 1];
  const double worst = sorted.back();
  report("latency", worst <= kLatencyCeilingMs,
         std::to_string(ms.size()) + " forced refine_tick solves (W=" + std::to_string(sc.refiner.window) +
             ", wheeler, " + std::to_string(full_windows) + " full windows): median " + fmt("%.2f", median) +
             " ms, p95 " + fmt("%.2f", p95) + " ms, max " + fmt("%.2f", worst) + " ms, ceiling " +
             fmt("%.0f", kLatencyCeilingMs) + " ms");
}

// ---------------------------------------------------------------------------
// Offline validity and whole-body feasibility

struct OfflineRuns {
  std::shared_ptr<const Scenario> scenario;
  std::vector<PipelineResult> runs;
  std::vector<bool> valid;
};

OfflineRuns run_offline(const std::string& name) {
  OfflineRuns out;
  out.scenario = std::make_shared<Scenario>(load_scenario(kDir + "/" + name + ".json"));
  for (int seed = 0; seed < kOfflineRuns; ++seed) {
    out.runs.push_back(run_pipeline(*out.scenario, static_cast<std::uint64_t>(seed)));
    out.valid.push_back(out.runs.back().success && validate_pipeline(*out.scenario, out.runs.back()).empty());
  }
  return out;
}

void criterion_offline(const std::vector<OfflineRuns>& all) {
  bool pass = true;
  std::vector<BenchSummary> rows;
  std::ostringstream d;
  for (const auto& o : all) {
    const auto s = summarize(o.scenario->name, o.runs, o.valid);
    rows.push_back(s);
    pass = pass && s.successes >= kOfflineMinSuccess && s.validated == s.successes;
    d << o.scenario->name << " " << s.successes << "/" << s.runs << " successes, " << s.validated << " validated; ";
  }
  std::ostringstream table;
  print_stats_table(table, rows);
  std::cout << table.str();
  report("offline_validity", pass, d.str());
}

void criterion_wholebody(const std::vector<OfflineRuns>& all) {
  int motions = 0, knots = 0, bad_contact = 0, bad_balance = 0, bad_velocity = 0, bad_binding = 0, bad_timing = 0;
  auto check = [&](const Scenario& sc, const GlobalPlan& plan) {
    const Eigen::VectorXd vmax = sc.robot.velocity_limits();
    for (const auto& m : plan.motions) {
      ++motions;
      for (const auto& q : m.knots) {
        ++knots;
        if (!m.stance.empty()) {
          if (contact_residual(sc.robot, q, m.stance) > kContactTol) ++bad_contact;
          if (!is_balanced(sc.robot, q, m.stance)) ++bad_balance;
        }
      }
      for (std::size_t k = 0; k + 1 < m.knots.size(); ++k) {
        const double dt = m.timestamps[k + 1] - m.timestamps[k];
        const Eigen::VectorXd dq = (m.knots[k + 1] - m.knots[k]).cwiseAbs();
        if (dq.maxCoeff() == 0.0) continue;
        const Eigen::VectorXd v = dq / dt;
        if ((v - vmax).maxCoeff() > kVelocitySlack) ++bad_velocity;
        // the binding DoF runs at exactly safety * v_max
        const double ratio = (v.array() / vmax.array()).maxCoeff();
        if (std::abs(ratio - sc.wholebody.safety) > kBindingTol * std::max(1.0, ratio)) ++bad_binding;
      }
      if (m.knots.size() >= 2) {
        const auto tp = time_parameterize(m.knots, sc.robot, sc.wholebody.safety);
        for (std::size_t k = 0; k < tp.timestamps.size(); ++k)
          if (std::abs(tp.timestamps[k] - m.timestamps[k]) > 1e-9 * std::max(1.0, m.duration)) {
            ++bad_timing;
            break;
          }
      }
    }
  };
  for (const auto& o : all)
    for (std::size_t k = 0; k < o.runs.size(); ++k)
      if (o.runs[k].success) check(*o.scenario, o.runs[k].plan);
  for (const std::string name : {"point_straight", "wheeler_straight", "wheeler_obstacle"}) {
    const auto l = plan_scenario(name);
    if (l.result.success) check(*l.scenario, l.result.plan);
  }
  const bool pass = motions > 0 && bad_contact == 0 && bad_balance == 0 && bad_velocity == 0 && bad_binding == 0 &&
                    bad_timing == 0;
  std::ostringstream d;
  d << motions << " motions, " << knots << " knots: contact residual failures " << bad_contact
    << ", unbalanced knots " << bad_balance << ", velocity replay failures " << bad_velocity
    << ", non-binding segments " << bad_binding << ", time_parameterize mismatches " << bad_timing;
  report("wholebody_feasibility", pass, d.str());
}

// ---------------------------------------------------------------------------
// Balance oracle

Contact ground(const std::string& ee, double x, double mu) { return {ee, "ground", {x, 0.0}, {0.0, 1.0}, mu}; }

std::vector<oracle::PlanarContact> to_oracle(const std::vector<Contact>& cs) {
  std::vector<oracle::PlanarContact> out;
  for (const auto& c : cs) out.push_back({c.position, c.normal, c.mu});
  return out;
}

bool certified(const std::vector<Contact>& cs, const Vec2& com, double mass, const WrenchSet& w) {
  const double weight = mass * kGravity.norm();
  if (equilibrium_residual(cs, com, mass, kGravity, w).norm() > 1e-9 * weight) return false;
  for (const auto& c : cs) {
    const ContactForce* f = w.find(c.end_effector);
    if (!f || f->normal < -1e-9 * weight || std::abs(f->tangential) > c.mu * f->normal + 1e-9 * weight) return false;
  }
  return true;
}

void criterion_balance() {
  const double mg = 1.0 * kGravity.norm();
  const std::vector<Contact> sym{ground("l", -0.5, 0.5), ground("r", 0.5, 0.5)};
  const auto w = solve_static_equilibrium(sym, {0.0, 0.8}, 1.0, kGravity);
  const double dn = w ? std::abs(w->find("l")->normal - w->find("r")->normal) : 1e300;
  const double ft = w ? std::max(std::abs(w->find("l")->tangential), std::abs(w->find("r")->tangential)) : 1e300;
  const bool sym_ok = w && dn <= kSymmetricTol * mg && ft <= kSymmetricTol * mg;

  const std::vector<Contact> slick{ground("l", -0.5, 0.0), ground("r", 0.5, 0.0)};
  const bool outside_ok = !solve_static_equilibrium(slick, {1.0, 0.8}, 1.0, kGravity) &&
                          !oracle::brute_force_feasible(to_oracle(slick), {1.0, 0.8}, 1.0);

  std::mt19937_64 rng(1000);
  std::uniform_real_distribution<double> u(-1.0, 1.0), mu(0.0, 1.0);
  int monotone_breaks = 0, missed_certificates = 0, bad_certificates = 0, oracle_feasible = 0, agree = 0;
  for (int trial = 0; trial < kBalanceCases; ++trial) {
    std::vector<Contact> cs;
    const int m = 1 + trial % 2;
    for (int k = 0; k < m; ++k) {
      const double ang = M_PI / 2 + 0.6 * u(rng);
      cs.push_back({"c" + std::to_string(k), "", {u(rng), 0.3 * u(rng)}, {std::cos(ang), std::sin(ang)}, mu(rng)});
    }
    const Vec2 com{0.8 * u(rng), 0.5 + 0.3 * u(rng)};
    auto more = cs;
    const double ang = M_PI / 2 + 1.2 * u(rng);
    more.push_back({"extra", "", {u(rng), 0.5 * u(rng)}, {std::cos(ang), std::sin(ang)}, mu(rng)});
    for (const auto* set : {&cs, &more}) {
      const auto lib = solve_static_equilibrium(*set, com, 1.0, kGravity);
      const bool ref = oracle::brute_force_feasible(to_oracle(*set), com, 1.0);
      oracle_feasible += ref;
      if (ref && !lib) ++missed_certificates;
      if (lib && !certified(*set, com, 1.0, *lib)) ++bad_certificates;
      agree += ref == lib.has_value();
    }
    const bool before = solve_static_equilibrium(cs, com, 1.0, kGravity).has_value();
    const bool after = solve_static_equilibrium(more, com, 1.0, kGravity).has_value();
    if (before && !after) ++monotone_breaks;
  }
  const bool pass = sym_ok && outside_ok && monotone_breaks == 0 && missed_certificates == 0 && bad_certificates == 0;
  std::ostringstream d;
  d << "symmetric |dfn| " << fmt("%.1e", dn) << " N, max |ft| " << fmt("%.1e", ft) << " N; frictionless overhang "
    << (outside_ok ? "infeasible" : "FEASIBLE") << "; " << kBalanceCases << " cases: monotonicity breaks "
    << monotone_breaks << ", oracle certificates missed " << missed_certificates << ", invalid force sets "
    << bad_certificates << ", agreement " << agree << "/" << 2 * kBalanceCases << " (oracle feasible "
    << oracle_feasible << ")";
  report("balance_oracle", pass, d.str());
}

// ---------------------------------------------------------------------------
// Determinism

std::string scripted_run(const Loaded& l) {
  Simulation sim(l.scenario, l.result.plan, 7);
  WorldCommand add;
  add.op = WorldCommand::Op::Add;
  add.id = "live";
  add.shape = Disc{{3.2, -0.1}, 0.25};
  WorldCommand move = add;
  move.op = WorldCommand::Op::Move;
  move.shape = Disc{{3.3, 0.1}, 0.25};
  WorldCommand remove;
  remove.op = WorldCommand::Op::Remove;
  remove.id = "live";
  while (!sim.finished()) {
    std::vector<WorldCommand> live;
    if (sim.tick_count() == 250) live = {add};
    if (sim.tick_count() == 400) live = {move};
    if (sim.tick_count() == 520) live = {remove};
    if (sim.tick_count() == 300) sim.patch_refiner({{"weights", {{"tracking", 2.0}}}});
    sim.tick(sim.tick_count() % 97 == 0 ? 0.0 : l.scenario->sim.dt, live);
  }
  return sim.finish_log().to_jsonl(false);
}

void criterion_determinism() {
  const auto l = plan_scenario("wheeler_obstacle");
  if (!l.result.success) {
    report("determinism", false, "offline plan failed");
    return;
  }
  const std::string a = run_headless(l.scenario, l.result.plan, 0).to_jsonl(false);
  const std::string b = run_headless(l.scenario, l.result.plan, 0).to_jsonl(false);
  const std::string c = scripted_run(l);
  const std::string d = scripted_run(l);
  // a fresh offline plan with the same seed must match too
  const auto l2 = plan_scenario("wheeler_obstacle");
  const std::string e = run_headless(l2.scenario, l2.result.plan, 0).to_jsonl(false);
  const auto lines = std::count(c.begin(), c.end(), '\n');
  report("determinism", a == b && c == d && a == e,
         "scripted-only runs identical: " + std::string(a == b && a == e ? "yes" : "no") +
             "; runs with live edits, pauses and a refiner patch identical: " + std::string(c == d ? "yes" : "no") +
             " (" + std::to_string(lines) + " log lines, wall-time fields excluded)");
}

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();
  criterion_derivatives();
  criterion_lm_exactness();
  criterion_sparsity();
  criterion_fixed_point();
  criterion_obstacle();
  criterion_latency();
  const std::vector<OfflineRuns> offline{run_offline("biped_step"), run_offline("standing_up")};
  criterion_offline(offline);
  criterion_balance();
  criterion_wholebody(offline);
  criterion_determinism();
  std::cout << "acceptance: " << 10 - g_failed << "/10 criteria passed in " << fmt("%.1f", seconds_since(t0)) << " s"
            << std::endl;
  return g_failed;
}
