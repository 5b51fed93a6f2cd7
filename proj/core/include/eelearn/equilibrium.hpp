#pragma once

#include <optional>
#include <string>
#include <vector>

#include "eelearn/economy.hpp"

namespace eelearn {

struct MarketOutcome {
  Allocation allocation;
  PriceVector prices;
  bool warning = false;    // solver did not meet its convergence target
  std::string note;        // short description when warning is set
  double residual = 0.0;   // final infinity norm of excess demand (tatonnement)
};

/// Per-good clearing gaps and per-agent demand gaps against a tolerance.
struct CECertificate {
  Vector clearing_gap;  // sum_i x_ij - 1, per resource
  Vector demand_gap;    // u_i(d_i(p)) - u_i(x_i), per agent
  double eps = 0.0;
  bool is_equilibrium = false;

  double max_clearing_gap() const { return clearing_gap.maxCoeff(); }
  double max_demand_gap() const { return demand_gap.maxCoeff(); }
};

struct ProportionalResponseOptions {
  int iters = 200;               // the learner passes 10
  double bid_change_tol = 1e-10; // early exit when bids settle
  const MarketOutcome* warm_start = nullptr;
};

/// Bid-based dynamics: budgets are recomputed from current prices each
/// iteration, bids split budgets proportionally to each good's utility
/// contribution, and prices are the per-good bid totals. The returned
/// allocation clears every market exactly.
MarketOutcome solve_ce_proportional_response(const std::vector<ParametricUtility>& utilities,
                                             const Matrix& endowments,
                                             ProportionalResponseOptions opt = {});

struct TatonnementOptions {
  double step = 0.1;  // initial step; halved after `stall_window` non-improving iterations
  int max_iters = 5000;
  double tol = 1e-6;
  int stall_window = 50;
  double min_step = 1e-4;
  ProjectedAscentDemand ascent{};  // demand oracle for the Amdahl family
  std::optional<Vector> initial_prices;
};

/// Price adjustment along excess demand. Stops at tol or max_iters and
/// returns demands at the best visited prices, rescaled per good to restore
/// feasibility. Non-convergence sets the warning flag instead of failing.
MarketOutcome solve_ce_tatonnement(const std::vector<ParametricUtility>& utilities,
                                   const Matrix& endowments, TatonnementOptions opt = {});

struct CertifyOptions {
  ProjectedAscentDemand ascent{1000};
};

CECertificate certify_ce(const MarketOutcome& outcome,
                         const std::vector<ParametricUtility>& utilities,
                         const Matrix& endowments, double eps, CertifyOptions opt = {});

}  // namespace eelearn
