#include "eelearn/equilibrium.hpp"

#include <cmath>
#include <stdexcept>

namespace eelearn {

namespace {

constexpr double kPriceFloor = 1e-12;

// Bid weight of agent i for good j under the current allocation:
// theta_ij * x_ij (linear), theta_ij * x_ij^rho (CES),
// theta_ij * phi_ij(x_ij) (Amdahl).
Vector bid_weights(const ParametricUtility& u, const Vector& x) {
  if (std::holds_alternative<LinearFamily>(u.family()))
    return u.theta().cwiseProduct(x);
  return u.theta().cwiseProduct(u.features(x));
}

}  // namespace

MarketOutcome solve_ce_proportional_response(const std::vector<ParametricUtility>& utilities,
                                             const Matrix& endowments,
                                             ProportionalResponseOptions opt) {
  const int n = static_cast<int>(endowments.rows());
  const int m = static_cast<int>(endowments.cols());
  if (static_cast<int>(utilities.size()) != n)
    throw std::invalid_argument("one utility per agent required");
  if (opt.iters < 1) throw std::invalid_argument("iters must be at least 1");

  Vector p = Vector::Constant(m, 1.0 / m);
  Matrix x = endowments;
  if (opt.warm_start != nullptr) {
    p = opt.warm_start->prices.values;
    x = opt.warm_start->allocation.values;
  }

  bool flagged = false;
  Matrix bids(n, m);
  Matrix prev_bids = Matrix::Zero(n, m);
  for (int it = 0; it < opt.iters; ++it) {
    const Vector budgets = endowments * p;
    for (int i = 0; i < n; ++i) {
      Vector w = bid_weights(utilities[i], x.row(i).transpose());
      double total = w.sum();
      if (total <= 0.0) {
        // nothing held yet; spread the budget by raw preference weights
        w = utilities[i].theta();
        total = w.sum();
      }
      bids.row(i) = (budgets[i] / total) * w.transpose();
    }
    Vector pnew = bids.colwise().sum().transpose();
    for (int j = 0; j < m; ++j) {
      if (pnew[j] <= 0.0) {
        // no bids for this good: floor the price and hand it back to holders
        flagged = true;
        pnew[j] = kPriceFloor;
        const double held = endowments.col(j).sum();
        x.col(j) = endowments.col(j) / held;
      } else {
        x.col(j) = bids.col(j) / pnew[j];
      }
    }
    p = pnew / pnew.sum();
    if ((bids - prev_bids).cwiseAbs().maxCoeff() < opt.bid_change_tol) break;
    prev_bids = bids;
  }

  MarketOutcome out{Allocation(x), PriceVector(p)};
  out.warning = flagged;
  if (flagged) out.note = "a good received zero bids; price floored";
  return out;
}

namespace {

DemandResult family_demand(const ParametricUtility& u, const PriceVector& p, double budget,
                           const ProjectedAscentDemand& ascent) {
  if (std::holds_alternative<LinearFamily>(u.family()))
    return demand(u, p, budget, ExactLinearDemand{});
  if (std::holds_alternative<CesFamily>(u.family())) return ces_demand_exact(u, p, budget);
  return demand(u, p, budget, ascent);
}

}  // namespace

MarketOutcome solve_ce_tatonnement(const std::vector<ParametricUtility>& utilities,
                                   const Matrix& endowments, TatonnementOptions opt) {
  const int n = static_cast<int>(endowments.rows());
  const int m = static_cast<int>(endowments.cols());
  if (static_cast<int>(utilities.size()) != n)
    throw std::invalid_argument("one utility per agent required");

  Vector p = opt.initial_prices.value_or(Vector::Constant(m, 1.0 / m));
  p = p.cwiseMax(kPriceFloor);
  p /= p.sum();

  Vector best_p = p;
  double best_res = std::numeric_limits<double>::infinity();
  bool converged = false;

  double step = opt.step;
  int since_improvement = 0;
  Matrix demands(n, m);
  for (int it = 0; it < opt.max_iters; ++it) {
    const Vector budgets = endowments * p;
    for (int i = 0; i < n; ++i)
      demands.row(i) =
          family_demand(utilities[i], PriceVector(p), budgets[i], opt.ascent).x.transpose();
    const Vector z = demands.colwise().sum().transpose() - Vector::Ones(m);
    const double res = z.cwiseAbs().maxCoeff();
    if (res < best_res) {
      best_res = res;
      best_p = p;
      since_improvement = 0;
    } else if (++since_improvement >= opt.stall_window && step > opt.min_step) {
      // oscillating around the clearing point; damp and restart from the best
      step = std::max(0.5 * step, opt.min_step);
      p = best_p;
      since_improvement = 0;
      continue;
    }
    if (res <= opt.tol) {
      converged = true;
      break;
    }
    p = (p + step * z).cwiseMax(kPriceFloor);
    p /= p.sum();
  }

  // demands at the best prices, rescaled per good to restore feasibility
  const Vector budgets = endowments * best_p;
  for (int i = 0; i < n; ++i)
    demands.row(i) =
        family_demand(utilities[i], PriceVector(best_p), budgets[i], opt.ascent).x.transpose();
  for (int j = 0; j < m; ++j) {
    const double total = demands.col(j).sum();
    if (total > 1.0) demands.col(j) /= total;
  }

  MarketOutcome out{Allocation(demands), PriceVector(best_p)};
  out.residual = best_res;
  if (!converged) {
    out.warning = true;
    out.note = "tatonnement did not reach tolerance; returning best iterate";
  }
  return out;
}

CECertificate certify_ce(const MarketOutcome& outcome,
                         const std::vector<ParametricUtility>& utilities,
                         const Matrix& endowments, double eps, CertifyOptions opt) {
  const int n = static_cast<int>(endowments.rows());
  const int m = static_cast<int>(endowments.cols());
  CECertificate cert;
  cert.eps = eps;
  cert.clearing_gap = outcome.allocation.values.colwise().sum().transpose() - Vector::Ones(m);
  cert.demand_gap = Vector(n);
  for (int i = 0; i < n; ++i) {
    const double budget = outcome.prices.values.dot(endowments.row(i).transpose());
    DemandResult d = demand(utilities[i], outcome.prices, budget, opt.ascent);
    // the endowment itself is always affordable; never report less than it
    const double best = std::max(d.utility, utilities[i].utility(endowments.row(i).transpose()));
    cert.demand_gap[i] = best - utilities[i].utility(outcome.allocation.agent(i));
  }
  cert.is_equilibrium =
      cert.max_clearing_gap() <= eps && cert.max_demand_gap() <= eps;
  return cert;
}

}  // namespace eelearn
