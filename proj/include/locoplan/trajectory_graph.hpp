#pragma once

#include <Eigen/Sparse>

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "locoplan/balance.hpp"
#include "locoplan/kinematics.hpp"
#include "locoplan/wholebody.hpp"
#include "locoplan/world.hpp"

namespace locoplan {

enum class EdgeKind { JointLimit, Velocity, Collision, Balance, Tracking };

const char* to_string(EdgeKind k);

struct EdgeWeights {
  double tracking = 1.0;
  double joint_limit = 1e3;
  double velocity = 1e2;
  double collision = 1e4;
  double balance = 1e3;

  double of(EdgeKind k) const;
};

struct GraphConfig {
  EdgeWeights weights;
  double joint_margin = 0.02;   // [rad]
  double clearance = 0.05;      // [m]
  double velocity_scale = 1.0;  // velocity edges bound |dq|/dt by scale * v_max
  int sweep_samples = 3;        // interior collision samples per segment, 0 disables
};

struct GraphVertex {
  int index = 0;
  Configuration q;
  bool fixed = false;
};

struct HyperEdge {
  EdgeKind kind = EdgeKind::Tracking;
  std::vector<int> vertices;
  Eigen::VectorXd omega;  // diagonal of the weight matrix
  Eigen::VectorXd residual;
  std::vector<Eigen::MatrixXd> jacobians;  // one dim(e) x n block per member
};

struct TrajectoryGraph {
  const RobotModel* model = nullptr;
  std::shared_ptr<const WorldState> world;
  std::vector<GraphVertex> vertices;
  std::vector<HyperEdge> edges;
  std::vector<Configuration> reference;
  double dt = 0.0;
  Stance stance;
  std::optional<Interval> support;  // fixed-contact support, computed once
  GraphConfig config;

  int dof() const { return model->dof(); }
  int num_free() const;
  /// Column offset of a free vertex in the stacked decision vector, -1 if fixed.
  std::vector<int> free_offsets() const;
};

struct Discretization {
  std::vector<Configuration> configs;
  double dt = 0.0;
};

/// N samples equispaced over [0, duration], interpolating the knots linearly.
/// Endpoints are copied exactly. Throws std::invalid_argument for N < 2.
Discretization discretize_trajectory(const Motion& motion, int n);

/// Standard edge set: per vertex joint_limit, collision, balance and
/// tracking; per consecutive pair one velocity edge and, when
/// sweep_samples > 0, one swept collision edge. `fixed` defaults to
/// all-free.
TrajectoryGraph build_graph(std::vector<Configuration> configs, const RobotModel& model,
                            std::shared_ptr<const WorldState> world, std::vector<Configuration> reference, double dt,
                            const GraphConfig& config, Stance stance = {}, std::vector<bool> fixed = {});

Eigen::VectorXd edge_residual(const HyperEdge& edge, const TrajectoryGraph& graph);
std::vector<Eigen::MatrixXd> edge_jacobian(const HyperEdge& edge, const TrajectoryGraph& graph);

/// Refreshes the cached residuals and Jacobians of every edge.
void evaluate(TrajectoryGraph& graph);

/// F = sum e^T Omega e, computed from fresh residuals.
double total_cost(const TrajectoryGraph& graph);

struct LinearSystem {
  double F = 0.0;
  Eigen::VectorXd b;
  Eigen::SparseMatrix<double> H;
};

/// Uses the cached residuals and Jacobians (call evaluate first).
LinearSystem assemble_system(const TrajectoryGraph& graph);

/// Free-vertex values stacked in vertex order.
Eigen::VectorXd free_vector(const TrajectoryGraph& graph);
void set_free_vector(TrajectoryGraph& graph, const Eigen::VectorXd& x);

/// Largest residual entry over edges of the given kinds that touch a free vertex.
double max_violation(const TrajectoryGraph& graph, bool include_tracking = false);

nlohmann::json graph_to_json(const TrajectoryGraph& graph);

}  // namespace locoplan
