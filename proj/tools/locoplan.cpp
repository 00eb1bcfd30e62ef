#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <csignal>
#include <fstream>
#include <iostream>
#include <thread>

#include "locoplan/errors.hpp"
#include "locoplan/pipeline.hpp"
#include "locoplan/server.hpp"
#include "locoplan/sim.hpp"

using namespace locoplan;

namespace {

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted = true; }

// "0..99" or "7"
std::pair<std::uint64_t, std::uint64_t> parse_seed_range(const std::string& text) {
  const auto dots = text.find("..");
  try {
    if (dots == std::string::npos) {
      const auto v = std::stoull(text);
      return {v, v};
    }
    const auto lo = std::stoull(text.substr(0, dots));
    const auto hi = std::stoull(text.substr(dots + 2));
    if (hi < lo) throw std::invalid_argument("");
    return {lo, hi};
  } catch (const std::exception&) {
    throw CLI::ValidationError("--seeds", "expected N or LO..HI, got '" + text + "'");
  }
}

void print_violations(const std::vector<Violation>& vs) {
  for (const auto& v : vs) std::cout << "  [" << v.index << "] " << v.kind << ": " << v.detail << "\n";
}

std::string task_name(const Scenario& s) { return s.name; }

int cmd_plan(const std::string& scenario_path, std::uint64_t seed, const std::string& out) {
  const Scenario s = load_scenario(scenario_path);
  const PipelineResult r = run_pipeline(s, seed);
  std::vector<bool> valid{false};
  std::vector<Violation> violations;
  if (r.success) {
    violations = validate_pipeline(s, r);
    valid[0] = violations.empty();
  }
  print_stats_table(std::cout, {summarize(task_name(s), {r}, valid)});
  if (!r.success) {
    std::cerr << "planning failed: " << r.failure << "\n";
    return 1;
  }
  std::cout << "stances: " << r.solution.stances.size() << ", motions: " << r.plan.motions.size() << ", duration: ";
  double total = 0.0;
  for (const auto& m : r.plan.motions) total += m.duration;
  std::cout << total << " s, whole-body time: " << r.wholebody_time << " s\n";
  if (!violations.empty()) {
    std::cout << "validator: " << violations.size() << " violation(s)\n";
    print_violations(violations);
  } else {
    std::cout << "validator: ok\n";
  }
  if (!out.empty()) {
    std::ofstream f(out);
    if (!f) throw std::runtime_error("cannot write " + out);
    f << plan_file_json(s, r).dump(1) << "\n";
    std::cout << "wrote " << out << "\n";
  }
  return violations.empty() ? 0 : 1;
}

int cmd_bench(const std::string& scenario_path, int runs, const std::string& seeds, const std::string& json_out) {
  const Scenario s = load_scenario(scenario_path);
  auto [lo, hi] = seeds.empty() ? std::pair<std::uint64_t, std::uint64_t>{0, runs > 0 ? runs - 1 : 0}
                                : parse_seed_range(seeds);
  if (!seeds.empty() && runs > 0 && hi - lo + 1 != static_cast<std::uint64_t>(runs))
    throw CLI::ValidationError("--runs", "does not match the number of seeds in --seeds");
  std::vector<PipelineResult> results;
  std::vector<bool> valid;
  for (std::uint64_t seed = lo; seed <= hi; ++seed) {
    results.push_back(run_pipeline(s, seed));
    valid.push_back(results.back().success && validate_pipeline(s, results.back()).empty());
  }
  const BenchSummary sum = summarize(task_name(s), results, valid);
  print_stats_table(std::cout, {sum});
  std::cout << "validated: " << sum.validated << "/" << sum.successes << " successful runs\n";
  if (!json_out.empty()) {
    std::ofstream f(json_out);
    if (!f) throw std::runtime_error("cannot write " + json_out);
    nlohmann::json j = to_json(sum);
    j["scenario"] = scenario_path;
    j["seeds"] = {lo, hi};
    f << j.dump(1) << "\n";
  }
  return 0;
}

struct SimArgs {
  std::string scenario;
  std::string plan;
  std::uint64_t seed = 0;
  bool headless = false;
  std::string serve;
  std::string runlog;
  bool sync_refine = false;
  bool paused = false;
  bool exit_on_finish = false;
  bool quiet = false;
};

int cmd_sim(const SimArgs& a) {
  auto scenario = std::make_shared<Scenario>(load_scenario(a.scenario));
  GlobalPlan plan;
  std::uint64_t seed = a.seed;
  if (!a.plan.empty()) {
    const PlanFile pf = load_plan_file(a.plan);
    if (pf.scenario.hash() != scenario->hash())
      std::cerr << "warning: plan was computed for a different scenario definition\n";
    plan = pf.result.plan;
    seed = pf.result.seed;
  } else {
    const PipelineResult r = run_pipeline(*scenario, seed);
    if (!r.success) {
      std::cerr << "planning failed: " << r.failure << "\n";
      return 1;
    }
    plan = r.plan;
  }

  if (a.serve.empty()) {
    const RunLog log = run_headless(scenario, plan, seed);
    if (!a.runlog.empty()) log.write(a.runlog);
    std::cout << log.summary.dump() << "\n";
    return log.summary.value("success", false) ? 0 : 1;
  }

  ServerOptions opt;
  parse_listen_address(a.serve, opt.host, opt.port);
  opt.async_refine = !a.sync_refine;
  opt.start_paused = a.paused;
  opt.runlog_path = a.runlog;
  SimServer server(std::make_unique<Simulation>(scenario, plan, seed), opt);
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  const unsigned short port = server.start();
  std::cout << "serving on http://" << opt.host << ":" << port << "\n" << std::flush;
  while (!g_interrupted) {
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    if (a.exit_on_finish && server.state().value("finished", false)) break;
  }
  server.stop();
  const RunLog log = server.run_log();
  if (!a.quiet) std::cout << log.summary.dump() << "\n";
  return 0;
}

int cmd_validate(const std::string& path) {
  const PlanFile pf = load_plan_file(path);
  const auto violations = validate_pipeline(pf.scenario, pf.result);
  if (violations.empty()) {
    std::cout << path << ": ok (" << pf.result.solution.stances.size() << " stances, " << pf.result.plan.motions.size()
              << " motions)\n";
    return 0;
  }
  std::cout << path << ": " << violations.size() << " violation(s)\n";
  print_violations(violations);
  return 1;
}

int cmd_replay(const std::string& scenario_path, const std::string& plan_path, const std::string& log_path) {
  auto scenario = std::make_shared<Scenario>(load_scenario(scenario_path));
  const PlanFile pf = load_plan_file(plan_path);
  const RunLog log = RunLog::read(log_path);
  const RunLog again = replay(scenario, pf.result.plan, log);
  const auto a = executed_path(log), b = executed_path(again);
  const bool same_path = a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin());
  RunLog logged = log;
  logged.summary = again.summary;  // a live log may end before the summary
  const bool same_log = logged.to_jsonl(false) == again.to_jsonl(false);
  std::cout << "executed path: " << (same_path ? "identical" : "differs") << " (" << b.size() << " ticks)\n";
  std::cout << "run log (without wall times): " << (same_log ? "identical" : "differs") << "\n";
  return same_path ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-contact stance planning, whole-body planning and online refinement"};
  app.require_subcommand(1);

  std::string scenario, out, plan_path, seeds, json_out, log_path;
  std::uint64_t seed = 0;
  int runs = 0;

  auto* plan = app.add_subcommand("plan", "Plan stances and whole-body motions for a scenario");
  plan->add_option("scenario", scenario, "Scenario file")->required()->check(CLI::ExistingFile);
  plan->add_option("--seed", seed, "Random seed");
  plan->add_option("--out", out, "Plan file to write");

  auto* bench = app.add_subcommand("bench", "Seeded planning runs with averaged statistics");
  bench->add_option("scenario", scenario, "Scenario file")->required()->check(CLI::ExistingFile);
  bench->add_option("--runs", runs, "Number of runs (default: number of seeds, or 100)");
  bench->add_option("--seeds", seeds, "Seed range LO..HI");
  bench->add_option("--json", json_out, "Write the summary as JSON");

  SimArgs sa;
  auto* sim = app.add_subcommand("sim", "Execute a plan with online refinement");
  sim->add_option("scenario", sa.scenario, "Scenario file")->required()->check(CLI::ExistingFile);
  sim->add_option("--plan", sa.plan, "Plan file (planned on the fly when omitted)")->check(CLI::ExistingFile);
  sim->add_option("--seed", sa.seed, "Seed used when planning on the fly");
  sim->add_flag("--headless", sa.headless, "Run as fast as possible without a server (default)");
  sim->add_option("--serve", sa.serve, "Serve the HTTP/WebSocket API at [host]:port");
  sim->add_option("--runlog", sa.runlog, "Write the run log (JSON lines)");
  sim->add_flag("--sync-refine", sa.sync_refine, "Serve mode: refine inside the tick loop (deterministic)");
  sim->add_flag("--paused", sa.paused, "Serve mode: start paused");
  sim->add_flag("--exit-on-finish", sa.exit_on_finish, "Serve mode: stop once the plan is executed");

  auto* validate = app.add_subcommand("validate", "Run the solution validator on a plan file");
  validate->add_option("plan", plan_path, "Plan file")->required()->check(CLI::ExistingFile);

  auto* rep = app.add_subcommand("replay", "Re-execute a run log and compare the executed path");
  rep->add_option("scenario", scenario, "Scenario file")->required()->check(CLI::ExistingFile);
  rep->add_option("--plan", plan_path, "Plan file")->required()->check(CLI::ExistingFile);
  rep->add_option("--runlog", log_path, "Run log")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*plan) return cmd_plan(scenario, seed, out);
    if (*bench) return cmd_bench(scenario, seeds.empty() && runs == 0 ? 100 : runs, seeds, json_out);
    if (*sim) {
      if (sa.headless && !sa.serve.empty()) throw CLI::ValidationError("--headless", "cannot be combined with --serve");
      return cmd_sim(sa);
    }
    if (*validate) return cmd_validate(plan_path);
    if (*rep) return cmd_replay(scenario, plan_path, log_path);
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
