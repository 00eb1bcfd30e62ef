#include <gtest/gtest.h>

#include <random>
#include <set>

#include "locoplan/fixtures.hpp"
#include "locoplan/trajectory_graph.hpp"
#include "graph_fd.hpp"

using namespace locoplan;

namespace {

Configuration xz(double x, double z) { return Configuration(Vec2(x, z)); }

std::shared_ptr<const WorldState> world_with(std::vector<Obstacle> obs) {
  auto w = std::make_shared<WorldState>();
  w->obstacles = std::move(obs);
  return w;
}

Motion straight_motion(double length, double duration) {
  Motion m;
  m.knots = {xz(0, 0), xz(length / 2, 0), xz(length, 0)};
  m.timestamps = {0.0, duration / 2, duration};
  m.duration = duration;
  return m;
}

GraphConfig no_sweep() {
  GraphConfig c;
  c.sweep_samples = 0;
  return c;
}

const HyperEdge& first_edge(const TrajectoryGraph& g, EdgeKind kind, std::size_t members = 1) {
  for (const auto& e : g.edges)
    if (e.kind == kind && e.vertices.size() == members) return e;
  throw std::runtime_error("no such edge");
}

}  // namespace

TEST(TrajectoryGraph, DiscretizeFiftyUniform) {
  const auto d = discretize_trajectory(straight_motion(4.0, 8.0), 50);
  ASSERT_EQ(d.configs.size(), 50u);
  EXPECT_NEAR(d.dt, 8.0 / 49.0, 1e-15);
  for (int k = 0; k < 50; ++k) EXPECT_NEAR(d.configs[k][0], 4.0 * k / 49.0, 1e-12);
  EXPECT_EQ(d.configs.front(), xz(0, 0));
  EXPECT_EQ(d.configs.back(), xz(4, 0));
}

TEST(TrajectoryGraph, DiscretizeEndpointsAndConstant) {
  const auto two = discretize_trajectory(straight_motion(1.0, 2.0), 2);
  ASSERT_EQ(two.configs.size(), 2u);
  EXPECT_EQ(two.configs[0], xz(0, 0));
  EXPECT_EQ(two.configs[1], xz(1, 0));
  Motion still;
  still.knots = {xz(0.5, 0.2), xz(0.5, 0.2)};
  still.timestamps = {0.0, 0.0};
  const auto c = discretize_trajectory(still, 7);
  ASSERT_EQ(c.configs.size(), 7u);
  for (const auto& q : c.configs) EXPECT_EQ(q, xz(0.5, 0.2));
  EXPECT_THROW(discretize_trajectory(still, 1), std::invalid_argument);
}

TEST(TrajectoryGraph, EdgeCounts) {
  const auto robot = fixtures::point_robot_2d();
  const auto d = discretize_trajectory(straight_motion(4.0, 8.0), 50);
  const auto g = build_graph(d.configs, robot, nullptr, d.configs, d.dt, no_sweep());
  EXPECT_EQ(g.edges.size(), 249u);  // 4 per vertex plus one velocity edge per pair
  const auto small = build_graph({xz(0, 0), xz(1, 0)}, robot, nullptr, {xz(0, 0), xz(1, 0)}, 0.1, no_sweep());
  EXPECT_EQ(small.edges.size(), 9u);
  // swept collision edges add one per pair
  const auto swept = build_graph(d.configs, robot, nullptr, d.configs, d.dt, GraphConfig{});
  EXPECT_EQ(swept.edges.size(), 249u + 49u);
}

TEST(TrajectoryGraph, ZeroTrackingWeightIgnoresReference) {
  const auto robot = fixtures::point_robot_2d();
  GraphConfig c;
  c.weights.tracking = 0.0;
  const std::vector<Configuration> q{xz(0, 0), xz(0.05, 0), xz(0.1, 0)};
  const auto a = build_graph(q, robot, nullptr, q, 0.1, c);
  const auto b = build_graph(q, robot, nullptr, {xz(5, 5), xz(-3, 1), xz(2, 2)}, 0.1, c);
  EXPECT_EQ(total_cost(a), total_cost(b));
}

TEST(TrajectoryGraph, VelocityResiduals) {
  const auto robot = fixtures::point_robot_2d();
  GraphConfig c = no_sweep();
  c.velocity_scale = 2.0;  // v_max = 2 m/s
  auto g = build_graph({xz(0, 0), xz(0, 0)}, robot, nullptr, {xz(0, 0), xz(0, 0)}, 0.1, c);
  const HyperEdge& e = first_edge(g, EdgeKind::Velocity, 2);
  EXPECT_EQ(edge_residual(e, g), Eigen::VectorXd::Zero(2));
  g.vertices[1].q = xz(0.5, 0.0);
  EXPECT_NEAR(edge_residual(e, g)[0], 3.0, 1e-12);
  EXPECT_EQ(edge_residual(e, g)[1], 0.0);
  auto jac = edge_jacobian(e, g);
  EXPECT_NEAR(jac[0](0, 0), -10.0, 1e-12);
  EXPECT_NEAR(jac[1](0, 0), 10.0, 1e-12);
  g.vertices[1].q = xz(-0.5, 0.0);
  jac = edge_jacobian(e, g);
  EXPECT_NEAR(jac[0](0, 0), 10.0, 1e-12);
  EXPECT_NEAR(jac[1](0, 0), -10.0, 1e-12);
  EXPECT_EQ(jac[0](1, 1), 0.0);
}

TEST(TrajectoryGraph, CollisionResidualHandValue) {
  const auto robot = fixtures::point_robot_2d();
  GraphConfig c = no_sweep();
  c.clearance = 0.3;
  // sphere centre 0.25 m from the disc surface, radius 0.1
  const auto world = world_with({{"d", Disc{{0.75, 0.0}, 0.5}, 0.0}});
  auto g = build_graph({xz(0, 0), xz(-1, 0)}, robot, world, {xz(0, 0), xz(-1, 0)}, 1.0, c);
  const HyperEdge& e = first_edge(g, EdgeKind::Collision);
  EXPECT_NEAR(edge_residual(e, g)[0], 0.15, 1e-12);
  const auto jac = edge_jacobian(e, g);
  EXPECT_NEAR(jac[0](0, 0), 1.0, 1e-12);  // moving toward the obstacle raises the residual
}

TEST(TrajectoryGraph, TrackingEdge) {
  const auto robot = fixtures::point_robot_2d();
  auto g = build_graph({xz(0, 0), xz(1, 0)}, robot, nullptr, {xz(0, 0), xz(1, 0)}, 0.1, no_sweep());
  const HyperEdge& e = first_edge(g, EdgeKind::Tracking);
  EXPECT_EQ(edge_residual(e, g), Eigen::VectorXd::Zero(2));
  EXPECT_EQ(edge_jacobian(e, g)[0], Eigen::MatrixXd::Identity(2, 2));
}

TEST(TrajectoryGraph, EdgeJacobiansMatchFiniteDifferences) {
  const auto robot = fixtures::planar_wheeler_6dof();
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const auto world = world_with({{"a", Disc{{0.5, 0.1}, 0.3}, 0.0}, {"b", Box{{1.0, -0.6}, {1.4, -0.2}}, 0.0}});
  const Stance rolling({{"wheel_fl", "", Vec2::Zero(), Vec2::UnitY(), 0.5},
                        {"wheel_fr", "", Vec2::Zero(), Vec2::UnitY(), 0.5},
                        {"wheel_rl", "", Vec2::Zero(), Vec2::UnitY(), 0.5},
                        {"wheel_rr", "", Vec2::Zero(), Vec2::UnitY(), 0.5}},
                       true);
  int checked = 0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Configuration> qs, ref;
    for (int k = 0; k < 6; ++k) {
      Configuration q(6);
      q << 0.25 * k + 0.1 * u(rng), 0.2 * u(rng), 0.5 * u(rng), 0.6 * u(rng), 0.6 * u(rng), 1.1 * u(rng);
      qs.push_back(q);
      ref.push_back(q + 0.1 * Configuration::Random(6));
    }
    auto g = build_graph(qs, robot, world, ref, 0.1, GraphConfig{}, rolling);
    for (const auto& e : g.edges) {
      const auto jac = edge_jacobian(e, g);
      for (std::size_t m = 0; m < e.vertices.size(); ++m) {
        const Eigen::MatrixXd fd = oracle::fd_edge(g, e, static_cast<int>(m));
        // rows whose hinge flips inside the stencil are skipped
        for (Eigen::Index r = 0; r < fd.rows(); ++r) {
          if (oracle::near_kink(edge_residual(e, g)[r], fd.row(r))) continue;
          EXPECT_LE((jac[m].row(r) - fd.row(r)).cwiseAbs().maxCoeff(), 1e-5)
              << to_string(e.kind) << " row " << r << " member " << m;
          ++checked;
        }
      }
    }
  }
  EXPECT_GT(checked, 1000);
}

TEST(TrajectoryGraph, ZeroResidualsGiveZeroGradient) {
  const auto robot = fixtures::point_robot_2d();
  const std::vector<Configuration> q{xz(0, 0), xz(0.05, 0), xz(0.1, 0)};
  auto g = build_graph(q, robot, nullptr, q, 0.1, GraphConfig{});
  evaluate(g);
  const LinearSystem sys = assemble_system(g);
  EXPECT_EQ(sys.F, 0.0);
  EXPECT_EQ(sys.b, Eigen::VectorXd::Zero(6));
  // tracking edges alone contribute w * I per vertex
  const Eigen::MatrixXd h(sys.H);
  EXPECT_EQ(h, GraphConfig{}.weights.tracking * Eigen::MatrixXd::Identity(6, 6));
}

TEST(TrajectoryGraph, ChainIsBlockTridiagonal) {
  const auto robot = fixtures::point_robot_2d();
  std::vector<Configuration> q;
  for (int k = 0; k < 5; ++k) q.push_back(xz(0.3 * k, 0.0));  // fast enough to activate velocity edges
  auto g = build_graph(q, robot, nullptr, q, 0.1, GraphConfig{});
  evaluate(g);
  const Eigen::MatrixXd h(assemble_system(g).H);
  for (int a = 0; a < 5; ++a)
    for (int b = 0; b < 5; ++b) {
      const double block = h.block(2 * a, 2 * b, 2, 2).cwiseAbs().maxCoeff();
      if (std::abs(a - b) > 1) {
        EXPECT_EQ(block, 0.0) << a << "," << b;
      } else {
        EXPECT_GT(block, 0.0) << a << "," << b;
      }
    }
}

TEST(TrajectoryGraph, FixedVertexEliminated) {
  const auto robot = fixtures::point_robot_2d();
  const std::vector<Configuration> ref{xz(0, 0), xz(0.05, 0), xz(0.1, 0)};
  std::vector<Configuration> q = ref;
  q[0] = xz(-0.5, 0.0);  // fixed vertex far behind: velocity edge to vertex 1 is active
  auto g = build_graph(q, robot, nullptr, ref, 0.1, GraphConfig{}, {}, {true, false, false});
  EXPECT_EQ(g.num_free(), 2);
  EXPECT_EQ(g.free_offsets(), (std::vector<int>{-1, 0, 2}));
  evaluate(g);
  const LinearSystem sys = assemble_system(g);
  EXPECT_EQ(sys.H.rows(), 4);
  EXPECT_EQ(sys.b.size(), 4);
  EXPECT_NE(sys.b[0], 0.0);  // the fixed neighbour's velocity term lands on vertex 1
  EXPECT_EQ(free_vector(g).size(), 4);
}

TEST(TrajectoryGraph, AssembledGradientMatchesCost) {
  const auto robot = fixtures::point_robot_2d();
  const auto world = world_with({{"d", Disc{{0.6, 0.05}, 0.3}, 0.0}});
  const Stance support({{"a", "", {0.2, 0.0}, Vec2::UnitY(), 0.5}, {"b", "", {0.5, 0.0}, Vec2::UnitY(), 0.5}});
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<Configuration> q, ref;
    for (int k = 0; k < 8; ++k) {
      q.push_back(xz(0.15 * k + 0.05 * u(rng), 0.1 * u(rng)));
      ref.push_back(xz(0.15 * k, 0.0));
    }
    auto g = build_graph(q, robot, world, ref, 0.1, GraphConfig{}, support, {true, false, false, false, false, false, false, false});
    evaluate(g);
    const LinearSystem sys = assemble_system(g);
    EXPECT_NEAR(sys.F, total_cost(g), 1e-12 * std::max(1.0, sys.F));
    const Eigen::VectorXd x = free_vector(g);
    auto cost = [&](const Eigen::VectorXd& y) {
      set_free_vector(g, y);
      const double f = total_cost(g);
      set_free_vector(g, x);
      return f;
    };
    const Eigen::VectorXd grad = oracle::fd_gradient(cost, x, 1e-7);
    EXPECT_LE((sys.b - 0.5 * grad).norm(), 1e-5 * std::max(1.0, sys.b.norm())) << "trial " << trial;
  }
}

TEST(TrajectoryGraph, SparsityMatchesCoMembership) {
  const auto robot = fixtures::point_robot_2d();
  const auto world = world_with({{"d", Disc{{0.5, 0.0}, 0.3}, 0.0}});
  std::vector<Configuration> q;
  for (int k = 0; k < 10; ++k) q.push_back(xz(0.12 * k, 0.0));
  auto g = build_graph(q, robot, world, q, 0.1, GraphConfig{});
  evaluate(g);
  const auto sys = assemble_system(g);
  std::set<std::pair<int, int>> expected, actual;
  for (const auto& e : g.edges)
    for (int a : e.vertices)
      for (int b : e.vertices) expected.insert({a, b});
  for (int k = 0; k < sys.H.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(sys.H, k); it; ++it) actual.insert({it.row() / 2, it.col() / 2});
  EXPECT_EQ(actual, expected);
}

TEST(TrajectoryGraph, MaxViolationAndJson) {
  const auto robot = fixtures::point_robot_2d();
  const auto world = world_with({{"d", Disc{{0.1, 0.0}, 0.3}, 0.0}});
  auto g = build_graph({xz(0, 0), xz(0.1, 0)}, robot, world, {xz(0, 0), xz(0.1, 0)}, 0.1, GraphConfig{});
  EXPECT_GT(max_violation(g), 0.3);
  evaluate(g);
  const auto j = graph_to_json(g);
  EXPECT_EQ(j.at("vertices").size(), 2u);
  EXPECT_EQ(j.at("edges").size(), g.edges.size());
  EXPECT_THROW(build_graph({xz(0, 0)}, robot, world, {xz(0, 0)}, 0.1, GraphConfig{}), std::invalid_argument);
  EXPECT_THROW(build_graph({xz(0, 0), xz(1, 0)}, robot, world, {xz(0, 0), xz(1, 0)}, 0.0, GraphConfig{}),
               std::invalid_argument);
}
