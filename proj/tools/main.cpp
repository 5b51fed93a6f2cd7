#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>

#include "eelearn/economy_io.hpp"
#include "eelearn/equilibrium.hpp"
#include "eelearn/harness.hpp"
#include "eelearn/learner.hpp"
#include "eelearn/losses.hpp"

namespace {

using nlohmann::json;

bool log_info() {
  const char* v = std::getenv("EELEARN_LOG");
  return v != nullptr && std::string(v) != "quiet";
}

json outcome_to_json(const eelearn::MarketOutcome& o) {
  json j;
  j["prices"] = eelearn::vector_to_json(o.prices.values);
  j["allocation"] = eelearn::matrix_to_json(o.allocation.values);
  j["warning"] = o.warning;
  if (!o.note.empty()) j["note"] = o.note;
  j["residual"] = o.residual;
  return j;
}

eelearn::MarketOutcome outcome_from_json(const json& j) {
  eelearn::MarketOutcome o;
  o.prices = eelearn::PriceVector(eelearn::vector_from_json(j.at("prices")));
  o.allocation = eelearn::Allocation(eelearn::matrix_from_json(j.at("allocation")));
  return o;
}

int cmd_solve(const std::string& economy_path, const std::string& out_path,
              const std::string& solver, int iters, double tol, double eps) {
  const eelearn::Economy e = eelearn::load_economy(economy_path);
  eelearn::MarketOutcome outcome;
  if (solver == "pr") {
    eelearn::ProportionalResponseOptions opt;
    if (iters > 0) opt.iters = iters;
    outcome = eelearn::solve_ce_proportional_response(e.utilities, e.endowments, opt);
  } else {
    eelearn::TatonnementOptions opt;
    if (iters > 0) opt.max_iters = iters;
    opt.tol = tol;
    outcome = eelearn::solve_ce_tatonnement(e.utilities, e.endowments, opt);
  }
  const eelearn::CECertificate cert =
      eelearn::certify_ce(outcome, e.utilities, e.endowments, eps);

  json j = outcome_to_json(outcome);
  j["certificate"] = {{"clearing_gap", eelearn::vector_to_json(cert.clearing_gap)},
                      {"demand_gap", eelearn::vector_to_json(cert.demand_gap)},
                      {"eps", cert.eps},
                      {"is_equilibrium", cert.is_equilibrium}};
  std::ofstream out(out_path);
  if (!out) {
    std::cerr << "cannot write " << out_path << "\n";
    return 1;
  }
  out << j.dump(2) << "\n";
  if (log_info())
    std::cerr << "solve: " << solver << " is_equilibrium=" << cert.is_equilibrium
              << " max_clearing_gap=" << cert.max_clearing_gap()
              << " max_demand_gap=" << cert.max_demand_gap() << "\n";
  return 0;
}

int cmd_losses(const std::string& economy_path, const std::string& outcome_path, int mc_budget,
               std::uint64_t seed, bool pe_exact, double grid_step) {
  const eelearn::Economy e = eelearn::load_economy(economy_path);
  std::ifstream in(outcome_path);
  if (!in) {
    std::cerr << "cannot open " << outcome_path << "\n";
    return 1;
  }
  json oj;
  in >> oj;
  const eelearn::MarketOutcome outcome = outcome_from_json(oj);

  const eelearn::MarketOutcome ref_outcome =
      eelearn::solve_ce_proportional_response(e.utilities, e.endowments);
  const eelearn::CertifiedReference ref = eelearn::certify_reference(e, ref_outcome);

  const eelearn::LossReport r =
      eelearn::loss_fd(e, outcome, ref, eelearn::MonteCarloDemand{mc_budget}, seed);
  json j;
  j["l_ce"] = r.l_ce;
  j["l_si"] = r.l_si;
  j["l_pe_upper"] = r.l_pe_upper;
  j["l_fd_upper"] = r.l_fd_upper;
  j["mc_samples_used"] = r.mc_samples_used;
  if (pe_exact) {
    const auto pe = eelearn::loss_pe_exact_small(e, outcome.allocation, grid_step);
    j["l_pe_exact"] = pe.value;
    j["l_pe_exact_grid_step"] = pe.grid_step;
  }
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_run(const std::string& config_path, std::string out_dir) {
  const eelearn::ExperimentConfig config = eelearn::ExperimentConfig::load(config_path);
  if (out_dir.empty()) out_dir = ".";
  std::filesystem::create_directories(out_dir);
  const eelearn::ExperimentResult result = eelearn::run_experiment(config);
  const std::string records_path = out_dir + "/records.csv";
  const std::string summary_path = out_dir + "/summary.csv";
  eelearn::emit_csv(result.all_records(), records_path);
  eelearn::emit_summary(result, summary_path);
  if (log_info()) {
    std::cerr << "run: " << result.runs.size() << " seeds, T=" << config.T << "\n";
    for (const auto& r : result.runs) {
      std::cerr << "  seed " << r.seed << ": cum_l_ce(T)="
                << r.records.back().cum_l_ce;
      if (r.event_rounds > 0)
        std::cerr << " a_freq=" << static_cast<double>(r.a_hold_count) / r.event_rounds
                  << " b_freq=" << static_cast<double>(r.b_hold_count) / r.event_rounds;
      if (r.pe_exact_final) std::cerr << " pe_exact_final=" << *r.pe_exact_final;
      std::cerr << "\n";
    }
  }
  std::cout << records_path << "\n" << summary_path << "\n";
  return 0;
}

int cmd_schedule(int n, int m, long rounds) {
  const long total = eelearn::initialization_rounds(n, m);
  const long upto = rounds > 0 ? std::min(rounds, total) : total;
  std::cout << "initialization rounds: " << total << "\n";
  for (long t = 1; t <= upto; ++t) {
    const eelearn::Allocation x = eelearn::init_schedule(n, m, t);
    std::cout << t << ":";
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j)
        if (x.values(i, j) > 0.5) std::cout << " agent" << i << "->resource" << j;
    std::cout << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exchange-economy equilibrium learning toolkit"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run a seeded learning experiment from a config file");
  std::string config_path, out_dir;
  run->add_option("--config", config_path, "Experiment config JSON")->required();
  run->add_option("--out", out_dir, "Output directory (records.csv, summary.csv)");

  auto* solve = app.add_subcommand("solve", "Compute a competitive equilibrium");
  std::string economy_path, out_path = "outcome.json", solver = "pr";
  int iters = 0;
  double tol = 1e-6, eps = 1e-2;
  solve->add_option("--economy", economy_path, "Economy JSON file")->required();
  solve->add_option("--out", out_path, "Result file");
  solve->add_option("--solver", solver, "pr or tatonnement")
      ->check(CLI::IsMember({"pr", "tatonnement"}));
  solve->add_option("--iters", iters, "Solver iterations (0 keeps defaults)");
  solve->add_option("--tol", tol, "Tatonnement excess-demand tolerance");
  solve->add_option("--eps", eps, "Certification tolerance");

  auto* losses = app.add_subcommand("losses", "Score an allocation/price file");
  std::string l_economy, l_outcome;
  int mc_budget = 50;
  std::uint64_t seed = 0;
  bool pe_exact = false;
  double grid_step = 0.05;
  losses->add_option("--economy", l_economy, "Economy JSON file")->required();
  losses->add_option("--outcome", l_outcome, "Outcome JSON file (prices, allocation)")
      ->required();
  losses->add_option("--mc-budget", mc_budget, "Accepted Monte Carlo samples per agent");
  losses->add_option("--seed", seed, "Monte Carlo seed");
  losses->add_flag("--pe-exact", pe_exact, "Also compute the exact Pareto loss (n*m <= 6)");
  losses->add_option("--grid-step", grid_step, "Grid step for the exact Pareto loss");

  auto* schedule = app.add_subcommand("schedule", "Print the initialization schedule");
  int n = 2, m = 2;
  long rounds = 0;
  schedule->add_option("--n", n, "Agent count")->required();
  schedule->add_option("--m", m, "Resource count")->required();
  schedule->add_option("--rounds", rounds, "Limit printed rounds (0 = all)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, out_dir);
    if (solve->parsed()) return cmd_solve(economy_path, out_path, solver, iters, tol, eps);
    if (losses->parsed())
      return cmd_losses(l_economy, l_outcome, mc_budget, seed, pe_exact, grid_step);
    if (schedule->parsed()) return cmd_schedule(n, m, rounds);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 0;
}
