#include "locoplan/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>

#include "locoplan/errors.hpp"
#include "locoplan/json_util.hpp"

namespace locoplan {

namespace ju = json_util;

PipelineResult run_pipeline(const Scenario& scenario, std::uint64_t seed) {
  PipelineResult out;
  out.seed = seed;
  StanceParams params = scenario.params;
  params.seed = seed;
  const PlanningContext ctx{scenario.robot, scenario.world, params};
  StancePlanResult sp = plan_stances(ctx, scenario.task.sigma_init, scenario.task.q_init, scenario.goal_stance());
  out.stats = sp.stats;
  if (!sp.success) {
    out.failure = "stance planning: " + sp.failure;
    return out;
  }
  out.solution = std::move(sp.solution);

  const auto t0 = std::chrono::steady_clock::now();
  const MotionContext mc{scenario.robot, scenario.world, scenario.wholebody};
  GlobalPlanResult gp = plan_global(mc, out.solution, scenario.goal_configuration(), seed);
  out.wholebody_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!gp.success) {
    out.failure = "whole-body planning: " + gp.failure;
    return out;
  }
  out.plan = std::move(gp.plan);
  out.success = true;
  return out;
}

std::vector<Violation> validate_pipeline(const Scenario& scenario, const PipelineResult& result) {
  StanceParams params = scenario.params;
  params.seed = result.seed;
  const PlanningContext ctx{scenario.robot, scenario.world, params};
  auto out = validate_stance_solution(ctx, result.solution, scenario.task.sigma_init, scenario.goal_stance());
  const MotionContext mc{scenario.robot, scenario.world, scenario.wholebody};
  for (auto& v : validate_global_plan(mc, result.plan)) {
    v.kind = "motion-" + v.kind;
    out.push_back(std::move(v));
  }
  if (!result.plan.motions.empty() && !result.solution.configs.empty()) {
    const auto& first = result.plan.motions.front().knots.front();
    if ((first - result.solution.configs.front()).cwiseAbs().maxCoeff() > 1e-9)
      out.push_back({0, "motion-start", "first motion does not start at the initial configuration"});
    if (const auto goal = scenario.goal_configuration()) {
      const auto& last = result.plan.motions.back().knots.back();
      if ((last - *goal).cwiseAbs().maxCoeff() > 1e-9)
        out.push_back({static_cast<int>(result.plan.motions.size()) - 1, "motion-goal",
                       "last motion does not end at the goal configuration"});
    }
  }
  return out;
}

nlohmann::json plan_file_json(const Scenario& scenario, const PipelineResult& result) {
  return {{"format", kPlanFormat},
          {"scenario", scenario.source},
          {"scenario_hash", scenario.hash()},
          {"scenario_dir", scenario.base_dir},
          {"seed", result.seed},
          {"stats", to_json(result.stats)},
          {"solution", to_json(result.solution)},
          {"trajectory", to_json(result.plan)}};
}

PlanFile plan_file_from_json(const nlohmann::json& j, const std::string& base_dir) {
  if (!j.is_object()) throw FormatError("/", "expected an object");
  ju::expect_format(j, kPlanFormat);
  PlanFile f;
  try {
    const std::string dir = j.contains("scenario_dir") ? ju::string(j, "scenario_dir", "") : base_dir;
    f.scenario = scenario_from_json(ju::require(j, "scenario", ""), dir);
  } catch (const FormatError& e) {
    const std::string w = e.what();
    const std::string prefix = e.field() + ": ";
    throw FormatError("/scenario" + e.field(), w.rfind(prefix, 0) == 0 ? w.substr(prefix.size()) : w);
  }
  f.result.seed = static_cast<std::uint64_t>(ju::number(j, "seed", ""));
  f.result.stats = plan_stats_from_json(ju::require(j, "stats", ""), "/stats");
  f.result.solution = stance_solution_from_json(ju::require(j, "solution", ""), "/solution");
  f.result.plan = global_plan_from_json(ju::require(j, "trajectory", ""), "/trajectory");
  f.result.success = true;
  return f;
}

PlanFile load_plan_file(const std::string& path) {
  return plan_file_from_json(read_json_file(path), std::filesystem::path(path).parent_path().string());
}

BenchSummary summarize(const std::string& task, const std::vector<PipelineResult>& runs,
                       const std::vector<bool>& valid) {
  BenchSummary s;
  s.task = task;
  s.runs = static_cast<int>(runs.size());
  for (std::size_t k = 0; k < runs.size(); ++k) {
    const auto& r = runs[k];
    if (!r.success) continue;
    ++s.successes;
    if (k < valid.size() && valid[k]) ++s.validated;
    s.planning_time += r.stats.planning_time;
    s.transition_time += r.stats.transition_time;
    s.iterations += r.stats.iterations;
    s.vertices += r.stats.vertices;
    s.stances += r.stats.sequence_length;
  }
  if (s.successes > 0) {
    const double n = s.successes;
    s.planning_time /= n;
    s.transition_time /= n;
    s.iterations /= n;
    s.vertices /= n;
    s.stances /= n;
  }
  return s;
}

void print_stats_table(std::ostream& os, const std::vector<BenchSummary>& rows) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-22s %10s %12s %10s %10s %10s %9s\n", "Task", "Plan [s]", "Transit. [s]",
                "Iters", "|T|", "|S_sigma|", "Success");
  os << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%-22s %10.4f %12.4f %10.2f %10.2f %10.2f %5d/%-3d\n", r.task.c_str(),
                  r.planning_time, r.transition_time, r.iterations, r.vertices, r.stances, r.successes, r.runs);
    os << buf;
  }
}

nlohmann::json to_json(const BenchSummary& s) {
  return {{"task", s.task},
          {"runs", s.runs},
          {"successes", s.successes},
          {"validated", s.validated},
          {"planning_time", s.planning_time},
          {"transition_time", s.transition_time},
          {"iterations", s.iterations},
          {"vertices", s.vertices},
          {"stances", s.stances}};
}

}  // namespace locoplan
