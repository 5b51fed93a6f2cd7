#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "eelearn/economy.hpp"
#include "eelearn/equilibrium.hpp"

namespace eelearn {

struct LossReport {
  double l_ce = 0.0;
  double l_si = 0.0;
  double l_pe_upper = 0.0;
  double l_fd_upper = 0.0;  // max(l_pe_upper, l_si)
  std::optional<double> l_pe_exact;
  int mc_samples_used = -1;  // smallest per-agent accepted count; -1 when not Monte Carlo
};

struct CeLoss {
  double value = 0.0;
  int min_accepted = -1;
};

/// Sum over agents of the positive gap between the best affordable utility at
/// the outcome's prices and the achieved utility. The candidate set for the
/// best affordable utility always contains the agent's endowment and current
/// bundle, so the estimate never falls below either.
CeLoss loss_ce(const Economy& e, const MarketOutcome& outcome, const DemandMethod& method,
               std::uint64_t seed = 0);

/// Sum over agents of the positive gap between endowment utility and achieved
/// utility. Exact.
double loss_si(const Economy& e, const Allocation& x);

/// A market outcome that passed certification against the true utilities;
/// required by the Pareto loss upper bound.
struct CertifiedReference {
  MarketOutcome outcome;
  CECertificate certificate;
};

CertifiedReference certify_reference(const Economy& e, const MarketOutcome& outcome,
                                     double eps = 1e-2);

/// Upper bound on the Pareto loss: positive gaps against the reference
/// equilibrium allocation. Throws if the reference is not certified.
double loss_pe_upper(const Economy& e, const Allocation& x, const CertifiedReference& ref);

struct PeExactResult {
  double value = 0.0;
  double grid_step = 0.0;  // effective resolution used
};

/// Brute-force Pareto loss on a feasibility grid; only for n*m <= 6.
/// Enumerates the full-supply grid (exact for the strictly increasing
/// families here), filters Pareto-efficient points by pairwise domination,
/// and minimizes the positive-gap sum over that set. Converges to the true
/// value from above as grid_step -> 0.
PeExactResult loss_pe_exact_small(const Economy& e, const Allocation& x, double grid_step);

/// Assembles a full per-round report (no exact Pareto term).
LossReport loss_fd(const Economy& e, const MarketOutcome& outcome,
                   const CertifiedReference& ref, const DemandMethod& method,
                   std::uint64_t seed = 0);

struct CumulativeLosses {
  std::vector<double> ce;
  std::vector<double> fd_upper;
};

CumulativeLosses cumulative(const std::vector<LossReport>& records);

}  // namespace eelearn
