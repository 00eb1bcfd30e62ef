#include "locoplan/lm_solver.hpp"

#include <Eigen/SparseCholesky>

#include <chrono>
#include <cmath>

#include "locoplan/json_util.hpp"

namespace locoplan {

void SolverParams::check() const {
  if (!(lambda_init > 0.0 && lambda_up > 1.0 && lambda_down > 0.0 && lambda_down < 1.0 && max_iterations > 0 &&
        f_tolerance > 0.0 && step_tolerance > 0.0 && lambda_max > 0.0))
    throw std::invalid_argument("solver parameters must be positive with lambda_up > 1 > lambda_down");
}

const char* to_string(Termination t) {
  switch (t) {
    case Termination::ConvergedF: return "converged-dF";
    case Termination::ConvergedStep: return "converged-step";
    case Termination::Budget: return "budget";
    case Termination::LambdaOverflow: return "lambda-overflow";
  }
  return "unknown";
}

Eigen::VectorXd lm_step(const Eigen::SparseMatrix<double>& H, const Eigen::VectorXd& b, double lambda) {
  if (H.rows() != H.cols() || H.rows() != b.size()) throw std::invalid_argument("lm_step: dimension mismatch");
  if (lambda < 0.0) throw std::invalid_argument("lm_step: lambda must be >= 0");
  if (b.size() == 0 || b.cwiseAbs().maxCoeff() == 0.0) return Eigen::VectorXd::Zero(b.size());

  Eigen::SparseMatrix<double> a = H;
  if (lambda > 0.0) {
    Eigen::SparseMatrix<double> eye(H.rows(), H.cols());
    eye.setIdentity();
    a += lambda * eye;
  }
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(a);
  if (ldlt.info() != Eigen::Success) throw SingularSystem("factorization failed");
  if ((ldlt.vectorD().array().abs() <= 1e-14 * std::max(1.0, ldlt.vectorD().cwiseAbs().maxCoeff())).any())
    throw SingularSystem("system matrix is singular");
  Eigen::VectorXd dx = ldlt.solve(-b);
  // one step of iterative refinement
  const Eigen::VectorXd r = a * dx + b;
  dx -= ldlt.solve(r);
  if (!dx.allFinite()) throw SingularSystem("non-finite step");
  return dx;
}

SolveReport optimize(TrajectoryGraph& graph, const SolverParams& params) {
  params.check();
  const auto t0 = std::chrono::steady_clock::now();
  SolveReport rep;
  auto finish = [&](Termination t) {
    rep.termination = t;
    rep.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
  };

  evaluate(graph);
  LinearSystem sys = assemble_system(graph);
  double f = sys.F;
  rep.initial_F = rep.final_F = f;
  if (sys.b.size() == 0 || sys.b.cwiseAbs().maxCoeff() == 0.0) return finish(Termination::ConvergedStep);

  Eigen::VectorXd x = free_vector(graph);
  double lambda = params.lambda_init;
  while (rep.attempts < params.max_iterations) {
    ++rep.attempts;
    rep.lambda_history.push_back(lambda);
    Eigen::VectorXd dx;
    try {
      dx = lm_step(sys.H, sys.b, lambda);
    } catch (const SingularSystem&) {
      lambda *= params.lambda_up;
      if (lambda > params.lambda_max) return finish(Termination::LambdaOverflow);
      continue;
    }
    const bool tiny_step = dx.norm() <= params.step_tolerance * (1.0 + x.norm());
    const Eigen::VectorXd x_new = x + dx;
    set_free_vector(graph, x_new);
    const double f_new = total_cost(graph);
    if (f_new < f) {
      const double df = f - f_new;
      const double f_old = f;
      x = x_new;
      f = f_new;
      rep.final_F = f;
      ++rep.iterations;
      rep.f_history.push_back(f);
      lambda *= params.lambda_down;
      if (f == 0.0 || df <= params.f_tolerance * (1.0 + f_old)) return finish(Termination::ConvergedF);
      if (tiny_step) return finish(Termination::ConvergedStep);
      evaluate(graph);
      sys = assemble_system(graph);
      if (sys.b.cwiseAbs().maxCoeff() == 0.0) return finish(Termination::ConvergedStep);
    } else {
      set_free_vector(graph, x);
      if (tiny_step) return finish(Termination::ConvergedStep);
      lambda *= params.lambda_up;
      if (lambda > params.lambda_max) return finish(Termination::LambdaOverflow);
    }
  }
  return finish(Termination::Budget);
}

nlohmann::json to_json(const SolveReport& r, bool include_wall_time) {
  nlohmann::json j{{"iterations", r.iterations},
                   {"attempts", r.attempts},
                   {"initial_F", r.initial_F},
                   {"final_F", r.final_F},
                   {"lambda_history", r.lambda_history},
                   {"f_history", r.f_history},
                   {"termination", to_string(r.termination)}};
  if (include_wall_time) j["wall_time"] = r.wall_time;
  return j;
}

nlohmann::json to_json(const SolverParams& p) {
  return {{"lambda_init", p.lambda_init}, {"lambda_up", p.lambda_up},         {"lambda_down", p.lambda_down},
          {"max_iterations", p.max_iterations}, {"f_tolerance", p.f_tolerance}, {"step_tolerance", p.step_tolerance},
          {"lambda_max", p.lambda_max}};
}

SolverParams solver_params_from_json(const nlohmann::json& j, const std::string& path, SolverParams p) {
  namespace ju = json_util;
  if (!j.is_object()) throw FormatError(path, "expected an object");
  p.lambda_init = ju::number_or(j, "lambda_init", p.lambda_init, path);
  p.lambda_up = ju::number_or(j, "lambda_up", p.lambda_up, path);
  p.lambda_down = ju::number_or(j, "lambda_down", p.lambda_down, path);
  p.max_iterations = static_cast<int>(ju::number_or(j, "max_iterations", p.max_iterations, path));
  p.f_tolerance = ju::number_or(j, "f_tolerance", p.f_tolerance, path);
  p.step_tolerance = ju::number_or(j, "step_tolerance", p.step_tolerance, path);
  p.lambda_max = ju::number_or(j, "lambda_max", p.lambda_max, path);
  try {
    p.check();
  } catch (const std::invalid_argument& e) {
    throw FormatError(path, e.what());
  }
  return p;
}

}  // namespace locoplan
