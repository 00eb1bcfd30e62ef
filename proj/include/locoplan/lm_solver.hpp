#pragma once

#include <Eigen/Sparse>

#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "locoplan/trajectory_graph.hpp"

namespace locoplan {

struct SolverParams {
  double lambda_init = 1e-4;
  double lambda_up = 10.0;
  double lambda_down = 0.5;
  int max_iterations = 20;  // linear solves per optimize call
  double f_tolerance = 1e-9;
  double step_tolerance = 1e-9;
  double lambda_max = 1e8;

  /// Throws std::invalid_argument unless all values are positive and up > 1 > down.
  void check() const;
};

enum class Termination { ConvergedF, ConvergedStep, Budget, LambdaOverflow };

const char* to_string(Termination t);

struct SolveReport {
  int iterations = 0;  // accepted steps
  int attempts = 0;    // linear solves
  double initial_F = 0.0;
  double final_F = 0.0;
  std::vector<double> lambda_history;
  std::vector<double> f_history;  // F after each accepted step
  Termination termination = Termination::ConvergedStep;
  double wall_time = 0.0;  // [s]
};

class SingularSystem : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Solves (H + lambda I) dx = -b with a sparse LDL^T factorization.
Eigen::VectorXd lm_step(const Eigen::SparseMatrix<double>& H, const Eigen::VectorXd& b, double lambda);

/// Levenberg-Marquardt over the free vertices; never throws on divergence.
SolveReport optimize(TrajectoryGraph& graph, const SolverParams& params);

nlohmann::json to_json(const SolveReport& r, bool include_wall_time = true);
nlohmann::json to_json(const SolverParams& p);
SolverParams solver_params_from_json(const nlohmann::json& j, const std::string& path, SolverParams base = {});

}  // namespace locoplan
