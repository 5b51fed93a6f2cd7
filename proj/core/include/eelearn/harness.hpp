#pragma once

#include <cstdint>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "eelearn/diagnostics.hpp"
#include "eelearn/economy.hpp"
#include "eelearn/learner.hpp"
#include "eelearn/losses.hpp"

namespace eelearn {

/// Seeded economy generator: shared family across agents, coefficients drawn
/// uniformly from [theta_low, theta_high]^m, endowment columns drawn from a
/// symmetric Dirichlet (so each resource supply sums to 1 exactly).
struct GeneratorSpec {
  std::string family = "ces";  // "linear", "ces", "amdahl"
  int n = 5;
  int m = 3;
  double rho = 0.5;  // CES only
  double f = 0.3;    // Amdahl only; scalar replicated across resources
  double theta_low = 0.1;
  double theta_high = 1.0;
  double theta_min = 0.05;
  double theta_max = 1.2;
  double sigma = 0.1;
};

Economy generate_economy(const GeneratorSpec& spec, std::uint64_t seed);

struct ExperimentConfig {
  std::optional<std::string> economy_file;
  std::optional<GeneratorSpec> generator;
  long T = 2000;
  DeltaSchedule schedule = DeltaSchedule::finite_horizon(2000);
  std::vector<std::uint64_t> seeds;
  int mc_budget = 50;
  std::string ce_solver = "pr";
  int ce_iters = 10;
  bool pe_exact_final = false;  // exact Pareto loss of the last round, n*m <= 6 only
  std::optional<long> force_alpha_zero_after;
  double phi_floor = 1.0;

  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::string& path);
  nlohmann::json to_json() const;

  /// Throws std::invalid_argument on any violated precondition; in
  /// particular a finite-horizon schedule requires T > max(m^3, n m^2).
  void validate() const;
};

struct RoundRecord {
  std::uint64_t run_id = 0;
  long t = 0;
  int phase = 0;  // 0 initialization, 1 learning
  double l_ce = 0.0;
  double l_si = 0.0;
  double l_pe_upper = 0.0;
  double l_fd_upper = 0.0;
  double cum_l_ce = 0.0;
  double cum_l_fd_upper = 0.0;
  int a_holds = 1;  // conjunction over agents; vacuously 1 in initialization
  int b_holds = 1;
  double rho = 0.0;  // max over agents of rho_it at the played bundle
  int ce_warn = 0;
};

inline constexpr const char* kCsvHeader =
    "run_id,t,phase,l_ce,l_si,l_pe_upper,l_fd_upper,cum_l_ce,cum_l_fd_upper,a_holds,b_holds,"
    "rho,ce_warn";

struct RunResult {
  std::uint64_t seed = 0;
  std::vector<RoundRecord> records;
  // per-(agent, round) event tallies over learning rounds with t >= 100
  long event_rounds = 0;
  long a_hold_count = 0;
  long b_hold_count = 0;
  // mean over agents of ||theta_bar - theta*||_2 at t in {500, 1000, 2000}
  std::vector<std::pair<long, double>> theta_error;
  std::optional<double> pe_exact_final;
};

struct ExperimentResult {
  std::vector<RunResult> runs;

  std::vector<RoundRecord> all_records() const;
  /// Mean of cum_l_ce across runs at round t (1-based).
  double mean_cum_ce(long t) const;
};

ExperimentResult run_experiment(const ExperimentConfig& config);

void emit_csv(const std::vector<RoundRecord>& records, const std::string& path);
std::vector<RoundRecord> parse_csv(const std::string& path);

/// Per-round mean and standard error of cum_l_ce across runs:
/// columns t,mean_cum_l_ce,stderr_cum_l_ce,n_runs. With a single run the
/// standard error is 0 by convention and n_runs flags it.
void emit_summary(const ExperimentResult& result, const std::string& path);

}  // namespace eelearn
