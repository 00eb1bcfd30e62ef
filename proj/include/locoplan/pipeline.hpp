#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "locoplan/scenario.hpp"
#include "locoplan/stance_planner.hpp"
#include "locoplan/wholebody.hpp"

namespace locoplan {

inline constexpr const char* kPlanFormat = "locoplan-plan/1";

/// Output of the offline pipeline: stance search followed by whole-body planning.
struct PipelineResult {
  bool success = false;
  std::string failure;
  std::uint64_t seed = 0;
  PlanStats stats;
  StanceSolution solution;
  GlobalPlan plan;
  double wholebody_time = 0.0;  // [s]
};

PipelineResult run_pipeline(const Scenario& scenario, std::uint64_t seed);

/// Solution validator for a pipeline result: stance chain checks plus
/// every motion of the global plan.
std::vector<Violation> validate_pipeline(const Scenario& scenario, const PipelineResult& result);

/// The plan file embeds its scenario so that it can be validated and
/// executed on its own.
nlohmann::json plan_file_json(const Scenario& scenario, const PipelineResult& result);

struct PlanFile {
  Scenario scenario;
  PipelineResult result;
};

/// `base_dir` resolves relative paths inside the embedded scenario.
PlanFile plan_file_from_json(const nlohmann::json& j, const std::string& base_dir = ".");
PlanFile load_plan_file(const std::string& path);

/// Aggregates over seeded runs: means over successful runs.
struct BenchSummary {
  std::string task;
  int runs = 0;
  int successes = 0;
  int validated = 0;  // successes passing the validator
  double planning_time = 0.0;
  double transition_time = 0.0;
  double iterations = 0.0;
  double vertices = 0.0;
  double stances = 0.0;
};

BenchSummary summarize(const std::string& task, const std::vector<PipelineResult>& runs,
                       const std::vector<bool>& valid);

/// Rows in the layout: task, planning time, transition generation time,
/// iterations, tree vertices, stances in the sequence.
void print_stats_table(std::ostream& os, const std::vector<BenchSummary>& rows);
nlohmann::json to_json(const BenchSummary& s);

}  // namespace locoplan
