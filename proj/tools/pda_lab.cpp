// Command-line front end: run scenarios, paired batches, Nash sweeps and
// lemma checks. Exit status is nonzero when a verification fails.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>

#include "pda/equilibrium.hpp"
#include "pda/scenario.hpp"

namespace fs = std::filesystem;
using namespace pda;

namespace {

struct GridOptions {
  GridSpec spec;
  bool exhaustive = false;
};

// "qsteps=4,midpoints=1" or "exhaustive"
GridOptions parse_grid(const std::string& text) {
  GridOptions g;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    if (item == "exhaustive") {
      g.exhaustive = true;
      continue;
    }
    const auto eq = item.find('=');
    const std::string key = item.substr(0, eq);
    const std::string value = eq == std::string::npos ? "" : item.substr(eq + 1);
    if (key == "qsteps") {
      g.spec.quantity_steps = std::stoi(value);
    } else if (key == "midpoints") {
      g.spec.midpoints = value != "0" && value != "off";
    } else {
      throw RejectedInput("--grid: unknown key '" + key + "'");
    }
  }
  return g;
}

int cmd_run(const std::string& file, const fs::path& out) {
  const Scenario sc = load_scenario(file);
  const auto r = run_experiment(sc);
  std::ostringstream traj, results, cumulative;
  write_trajectory_csv(traj, r.trajectory);
  write_results_csv(results, sc.id, r);
  write_cumulative_csv(cumulative, r.trajectory);
  write_file_atomic(out / "trajectory.csv", traj.str());
  write_file_atomic(out / "results.csv", results.str());
  write_file_atomic(out / "cumulative.csv", cumulative.str());
  for (BuyerId b = 0; b < r.total_costs.size(); ++b) {
    std::cout << "buyer " << b << " (" << (b < sc.policies.size() ? sc.policies[b] : "mpne")
              << "): total cost " << r.total_costs[b] << ", residual " << r.trajectory.terminal.requirements[b]
              << '\n';
  }
  return 0;
}

int cmd_batch(const std::string& file, std::size_t count, std::uint64_t seed, const std::string& deviant,
              const fs::path& out) {
  BatchSpec spec;
  spec.base = load_scenario(file);
  spec.count = count;
  spec.seed = seed;
  const auto colon = deviant.find(':');
  if (colon == std::string::npos) throw RejectedInput("--deviant: expected <buyer>:<policy>");
  spec.deviant = std::stoul(deviant.substr(0, colon));
  spec.deviant_policy = deviant.substr(colon + 1);
  (void)policy_from_name(spec.deviant_policy, spec.deviant);
  const auto r = run_batch(spec);
  std::ostringstream rows, summary;
  write_batch_csv(rows, r);
  write_batch_summary_csv(summary, r);
  write_file_atomic(out / "results.csv", rows.str());
  write_file_atomic(out / "summary.csv", summary.str());
  std::cout << summary.str();
  return 0;
}

int cmd_verify(const std::string& file, const std::string& grid_text, const fs::path& out) {
  const Scenario sc = load_scenario(file);
  const GridOptions grid = parse_grid(grid_text);
  std::ostringstream csv;
  bool all_ok = true;
  for (BuyerId b = 0; b < sc.requirements.size(); ++b) {
    const auto res = grid.exhaustive ? exhaustive_search(sc.initial_state(), b, sc.cfg)
                                     : best_response_search(sc.initial_state(), b, sc.cfg, full_grid_builder(grid.spec));
    write_deviations_csv(csv, sc.id, res.reports, b == 0);
    const auto* w = res.worst();
    std::cout << "buyer " << b << ": " << res.reports.size() << " deviations, min margin " << res.min_margin();
    if (w && w->margin < Money{}) {
      std::cout << "  PROFITABLE at round " << w->round << " bid " << w->deviation.price << "@" << w->deviation.quantity;
      if (!w->path.empty()) std::cout << " path " << w->path;
    }
    std::cout << '\n';
    all_ok &= res.nash_holds();
  }
  write_file_atomic(out / "deviations.csv", csv.str());
  std::cout << (all_ok ? "nash: holds on grid\n" : "nash: VIOLATED\n");
  return all_ok ? 0 : 1;
}

int cmd_check_lemmas(const std::string& file) {
  const Scenario sc = load_scenario(file);
  const auto traj = rollout(sc.initial_state(), uniform_profile(sc.requirements.size(), mpne_policy()), sc.cfg);
  bool ok = true;
  for (const auto& step : traj.steps) {
    const auto pred = lemma1_predict(step.state, sc.cfg);
    if (!pred) continue;
    bool match = step.outcome.mcp == pred->mcp && step.outcome.total_cleared == pred->total;
    for (BuyerId b = 0; b < pred->fills.size(); ++b) match &= step.outcome.fill_for(b) == pred->fills[b];
    if (!match) {
      std::cout << "clearing table: mismatch at round " << step.state.round << '\n';
      ok = false;
    }
  }
  std::cout << "clearing table: " << (ok ? "consistent" : "INCONSISTENT") << '\n';
  const auto mono = check_mcp_monotone(traj);
  std::cout << "mcp monotone: " << (mono.ok ? "yes" : "NO, first drop at round " + std::to_string(*mono.violation_round))
            << '\n';
  bool values = true;
  for (BuyerId b = 0; b < sc.requirements.size(); ++b) {
    const Money cf = closed_form_value(sc.initial_state(), b, sc.cfg);
    const Money v = traj.total_cost(b);
    std::cout << "buyer " << b << ": closed form " << cf << ", rollout " << v << '\n';
    values &= cf == v;
  }
  std::cout << "closed form: " << (values ? "equal" : "DIFFERS") << '\n';
  return ok && mono.ok && values ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Periodic double auction lab"};
  app.require_subcommand(1);
  fs::path out = ".";
  app.add_option("--out", out, "Directory for CSV outputs");

  std::string file;
  auto* run = app.add_subcommand("run", "Play a scenario and write trajectory.csv, results.csv, cumulative.csv");
  run->add_option("scenario", file, "Scenario YAML")->required();

  std::size_t count = 100;
  std::uint64_t seed = 0;
  std::string deviant = "0:zi";
  std::string base = std::string(PDA_SCENARIO_DIR) + "/baseline.yaml";
  auto* batch = app.add_subcommand("batch", "Paired PDAs: all-equilibrium vs one deviant buyer");
  batch->add_option("--count", count, "Number of PDAs")->check(CLI::PositiveNumber);
  batch->add_option("--seed", seed, "Batch seed");
  batch->add_option("--deviant", deviant, "<buyer>:<policy>");
  batch->add_option("--scenario", base, "Base scenario (requirements are rescaled per PDA)");

  std::string grid = "qsteps=4";
  auto* verify = app.add_subcommand("verify-nash", "Best-response sweep; writes deviations.csv");
  verify->add_option("scenario", file, "Scenario YAML")->required();
  verify->add_option("--grid", grid, "qsteps=N,midpoints=0|1 or exhaustive");

  auto* lemmas = app.add_subcommand("check-lemmas", "Clearing table, MCP monotonicity and closed-form values");
  lemmas->add_option("scenario", file, "Scenario YAML")->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(file, out);
    if (*batch) return cmd_batch(base, count, seed, deviant, out);
    if (*verify) return cmd_verify(file, grid, out);
    if (*lemmas) return cmd_check_lemmas(file);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
