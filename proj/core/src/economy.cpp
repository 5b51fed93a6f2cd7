#include "eelearn/economy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace eelearn {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

double checked_coord(double v, const char* what) {
  if (v < -1e-12 || v > 1.0 + 1e-12)
    throw std::domain_error(std::string(what) + " coordinate outside [0,1]: " + std::to_string(v));
  return std::clamp(v, 0.0, 1.0);
}

}  // namespace

Vector ThetaBox::clamp(const Vector& theta) const {
  return theta.cwiseMax(lo).cwiseMin(hi);
}

bool ThetaBox::contains(const Vector& theta, double tol) const {
  return (theta.array() >= lo - tol).all() && (theta.array() <= hi + tol).all();
}

ParametricUtility::ParametricUtility(UtilityFamily family, Vector theta, ThetaBox box)
    : family_(std::move(family)), theta_(std::move(theta)), box_(box) {
  require(theta_.size() > 0, "theta must be non-empty");
  require(box_.lo > 0.0, "theta_box lower bound must be positive");
  require(box_.hi >= box_.lo, "theta_box upper bound below lower bound");
  require(box_.contains(theta_, 1e-12), "theta outside theta_box");
  if (const auto* ces = std::get_if<CesFamily>(&family_)) {
    require(ces->rho > 0.0 && ces->rho <= 1.0, "CES rho must lie in (0,1]");
  } else if (const auto* amd = std::get_if<AmdahlFamily>(&family_)) {
    require(amd->parallel_fraction.size() == theta_.size(),
            "Amdahl parallel fractions must have one entry per resource");
    require((amd->parallel_fraction.array() > 0.0).all() &&
                (amd->parallel_fraction.array() < 1.0).all(),
            "Amdahl parallel fractions must lie in (0,1)");
  }
}

ParametricUtility ParametricUtility::with_theta(Vector theta) const {
  return ParametricUtility(family_, std::move(theta), box_);
}

Vector ParametricUtility::features(const Vector& x) const {
  Vector out(x.size());
  for (int j = 0; j < x.size(); ++j) {
    const double v = checked_coord(x[j], "allocation");
    if (std::holds_alternative<LinearFamily>(family_)) {
      out[j] = v;
    } else if (const auto* ces = std::get_if<CesFamily>(&family_)) {
      out[j] = std::pow(v, ces->rho);
    } else {
      const double f = std::get<AmdahlFamily>(family_).parallel_fraction[j];
      out[j] = v / (f + (1.0 - f) * v);
    }
  }
  return out;
}

Vector ParametricUtility::feature_slopes(const Vector& x) const {
  Vector out(x.size());
  for (int j = 0; j < x.size(); ++j) {
    const double v = checked_coord(x[j], "allocation");
    if (std::holds_alternative<LinearFamily>(family_)) {
      out[j] = 1.0;
    } else if (const auto* ces = std::get_if<CesFamily>(&family_)) {
      // slope blows up at 0 for rho < 1; evaluate at a small floor instead
      out[j] = ces->rho * std::pow(std::max(v, 1e-9), ces->rho - 1.0);
    } else {
      const double f = std::get<AmdahlFamily>(family_).parallel_fraction[j];
      const double d = f + (1.0 - f) * v;
      out[j] = f / (d * d);
    }
  }
  return out;
}

double ParametricUtility::link(double s) const {
  if (const auto* ces = std::get_if<CesFamily>(&family_)) {
    if (ces->rho == 1.0) return s;
    return std::pow(std::max(s, 0.0), 1.0 / ces->rho);
  }
  return s;
}

double ParametricUtility::link_slope(double s) const {
  if (const auto* ces = std::get_if<CesFamily>(&family_)) {
    if (ces->rho == 1.0) return 1.0;
    const double ir = 1.0 / ces->rho;
    return ir * std::pow(std::max(s, 1e-300), ir - 1.0);
  }
  return 1.0;
}

bool ParametricUtility::identity_link() const {
  if (const auto* ces = std::get_if<CesFamily>(&family_)) return ces->rho == 1.0;
  return true;
}

double ParametricUtility::utility(const Vector& x) const {
  return link(theta_.dot(features(x)));
}

double ParametricUtility::utility_from_features(const Vector& phi) const {
  return link(theta_.dot(phi));
}

Allocation::Allocation(Matrix v) : values(std::move(v)) {
  require(values.size() > 0, "allocation must be non-empty");
  require((values.array() >= -kFeasTol).all(), "allocation entries must be nonnegative");
  require((values.array() <= 1.0 + kFeasTol).all(), "allocation entries must not exceed 1");
  for (int j = 0; j < values.cols(); ++j) {
    require(values.col(j).sum() <= 1.0 + kFeasTol,
            "allocation oversupplies resource " + std::to_string(j));
  }
}

PriceVector::PriceVector(Vector v) : values(std::move(v)) {
  require(values.size() > 0, "price vector must be non-empty");
  require((values.array() >= -kFeasTol).all(), "prices must be nonnegative");
  require(std::abs(values.sum() - 1.0) <= kFeasTol, "prices must sum to 1");
}

Economy Economy::make(Matrix endowments, std::vector<ParametricUtility> utilities,
                      double noise_sigma) {
  Economy e;
  e.n = static_cast<int>(endowments.rows());
  e.m = static_cast<int>(endowments.cols());
  require(e.n > 0 && e.m > 0, "economy needs at least one agent and one resource");
  require((endowments.array() >= 0.0).all(), "endowments must be nonnegative");
  for (int j = 0; j < e.m; ++j) {
    require(std::abs(endowments.col(j).sum() - 1.0) <= kFeasTol,
            "endowment column " + std::to_string(j) + " must sum to 1");
  }
  require(static_cast<int>(utilities.size()) == e.n,
          "economy needs exactly one utility per agent");
  for (const auto& u : utilities)
    require(u.resources() == e.m, "utility dimension does not match resource count");
  require(noise_sigma >= 0.0, "noise sigma must be nonnegative");
  e.endowments = std::move(endowments);
  e.utilities = std::move(utilities);
  e.noise_sigma = noise_sigma;
  return e;
}

double Economy::endowment_utility(int i) const {
  return utilities[i].utility(endowment(i));
}

namespace {

// greedy by value per unit price; exact for linear objectives
DemandResult greedy_linear(const Vector& theta, const Vector& prices, double budget) {
  const int m = static_cast<int>(theta.size());
  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);
  // free goods first, then by value per unit price; ties go to the lower index
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const bool fa = prices[a] <= 0.0, fb = prices[b] <= 0.0;
    if (fa != fb) return fa;
    if (fa && fb) return a < b;
    const double ra = theta[a] / prices[a], rb = theta[b] / prices[b];
    if (ra != rb) return ra > rb;
    return a < b;
  });

  DemandResult res;
  res.x = Vector::Zero(m);
  double remaining = budget;
  for (int j : order) {
    if (prices[j] <= 0.0) {
      if (theta[j] > 0.0) res.x[j] = 1.0;
      continue;
    }
    if (remaining <= 0.0) break;
    const double q = std::min(1.0, remaining / prices[j]);
    res.x[j] = q;
    remaining -= q * prices[j];
  }
  return res;
}

DemandResult demand_exact_linear(const ParametricUtility& u, const PriceVector& p,
                                 double budget) {
  if (!std::holds_alternative<LinearFamily>(u.family()))
    throw std::invalid_argument("exact linear demand requires the linear family");
  DemandResult res = greedy_linear(u.theta(), p.values, budget);
  res.utility = u.utility(res.x);
  return res;
}

// Euclidean projection onto {0 <= x <= 1, p.x <= budget}. When the budget
// binds the projection is clamp(y - lambda p) with the multiplier found by
// bisection on the (monotone decreasing) spend.
void project_feasible(Vector& x, const Vector& prices, double budget) {
  x = x.cwiseMax(0.0).cwiseMin(1.0);
  if (prices.dot(x) <= budget + 1e-12) return;
  const Vector y = x;
  auto spend = [&](double lam) {
    return prices.dot((y - lam * prices).cwiseMax(0.0).cwiseMin(1.0));
  };
  double lo = 0.0, hi = 1.0;
  while (spend(hi) > budget && hi < 1e12) hi *= 2.0;
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (spend(mid) > budget)
      lo = mid;
    else
      hi = mid;
  }
  x = (y - hi * prices).cwiseMax(0.0).cwiseMin(1.0);
}

DemandResult demand_projected_ascent(const ParametricUtility& u, const PriceVector& p,
                                     double budget, const ProjectedAscentDemand& opt) {
  const int m = u.resources();
  const Vector& prices = p.values;
  const double total = prices.sum();

  Vector x = Vector::Constant(m, total > 0.0 ? std::min(1.0, budget / total) : 1.0);
  project_feasible(x, prices, budget);

  DemandResult res;
  res.x = x;
  res.utility = u.utility(x);
  int stalled = 0;
  for (int it = 1; it <= opt.iters; ++it) {
    const Vector slopes = u.feature_slopes(x);
    const double s = u.theta().dot(u.features(x));
    const double outer = u.link_slope(s);
    Vector grad = outer * u.theta().cwiseProduct(slopes);
    const double gnorm = grad.norm();
    if (gnorm <= 0.0) break;
    // normalized ascent direction: the step schedule is a travel budget
    x += (opt.step0 / std::sqrt(static_cast<double>(it))) * (grad / gnorm);
    project_feasible(x, prices, budget);
    const double val = u.utility(x);
    if (val > res.utility + opt.improve_tol) {
      res.utility = val;
      res.x = x;
      stalled = 0;
    } else if (++stalled >= opt.stall_limit) {
      break;
    }
  }
  return res;
}

DemandResult demand_monte_carlo(const ParametricUtility& u, const PriceVector& p,
                                double budget, const MonteCarloDemand& opt,
                                std::mt19937_64* rng) {
  if (rng == nullptr)
    throw std::invalid_argument("Monte Carlo demand requires a random generator");
  const int m = u.resources();
  DemandResult res;
  res.x = Vector::Zero(m);
  res.utility = -1.0;
  int proposals = 0;
  while (res.accepted < opt.samples && proposals < opt.max_proposals) {
    ++proposals;
    Vector cand = sample_subsimplex(m, *rng);
    if (p.values.dot(cand) > budget * (1.0 + kFeasTol) + kFeasTol) continue;
    ++res.accepted;
    const double val = u.utility(cand);
    if (val > res.utility) {
      res.utility = val;
      res.x = std::move(cand);
    }
  }
  if (res.accepted == 0) {
    res.degraded = true;
    res.x = Vector::Zero(m);
    res.utility = u.utility(res.x);
  }
  return res;
}

}  // namespace

DemandResult demand(const ParametricUtility& u, const PriceVector& p, double budget,
                    const DemandMethod& method, std::mt19937_64* rng) {
  if (budget < 0.0) throw std::invalid_argument("budget must be nonnegative");
  if (std::holds_alternative<ExactLinearDemand>(method))
    return demand_exact_linear(u, p, budget);
  if (const auto* pa = std::get_if<ProjectedAscentDemand>(&method))
    return demand_projected_ascent(u, p, budget, *pa);
  return demand_monte_carlo(u, p, budget, std::get<MonteCarloDemand>(method), rng);
}

double sample_feedback(const Economy& e, int agent, const Vector& x_i, std::mt19937_64& rng) {
  if (agent < 0 || agent >= e.n) throw std::invalid_argument("agent index out of range");
  const double mean = e.utilities[agent].utility(x_i);
  if (e.noise_sigma == 0.0) return mean;
  std::normal_distribution<double> noise(0.0, e.noise_sigma);
  return mean + noise(rng);
}

DemandResult ces_demand_exact(const ParametricUtility& u, const PriceVector& p, double budget) {
  const auto* ces = std::get_if<CesFamily>(&u.family());
  if (ces == nullptr)
    throw std::invalid_argument("exact CES demand requires the CES family");
  if (budget < 0.0) throw std::invalid_argument("budget must be nonnegative");

  const int m = u.resources();
  const Vector& theta = u.theta();
  const Vector& prices = p.values;

  DemandResult res;
  if (ces->rho == 1.0) {
    res = greedy_linear(theta, prices, budget);
    res.utility = u.utility(res.x);
    return res;
  }

  res.x = Vector::Zero(m);
  double remaining = budget;
  std::vector<int> active;
  for (int j = 0; j < m; ++j) {
    if (prices[j] <= 0.0) {
      res.x[j] = 1.0;  // free and valuable
    } else {
      active.push_back(j);
    }
  }

  // Uncapped spending shares on the active set are proportional to
  // p_j (theta_j / p_j)^sigma with sigma = 1/(1-rho); cap violators at one
  // unit and re-solve on the rest.
  const double sigma = 1.0 / (1.0 - ces->rho);
  while (!active.empty() && remaining > 0.0) {
    // log-domain shares for numerical range
    double max_log = -std::numeric_limits<double>::infinity();
    std::vector<double> logw(active.size());
    for (std::size_t k = 0; k < active.size(); ++k) {
      const int j = active[k];
      logw[k] = sigma * (std::log(theta[j]) - std::log(prices[j])) + std::log(prices[j]);
      max_log = std::max(max_log, logw[k]);
    }
    double wsum = 0.0;
    for (double& w : logw) {
      w = std::exp(w - max_log);
      wsum += w;
    }
    bool capped = false;
    std::vector<int> next;
    for (std::size_t k = 0; k < active.size(); ++k) {
      const int j = active[k];
      const double spend = remaining * logw[k] / wsum;
      if (spend >= prices[j]) {
        res.x[j] = 1.0;
        capped = true;
      } else {
        next.push_back(j);
      }
    }
    if (!capped) {
      for (std::size_t k = 0; k < active.size(); ++k)
        res.x[active[k]] = remaining * logw[k] / wsum / prices[active[k]];
      break;
    }
    remaining = budget;
    for (int j = 0; j < m; ++j)
      if (res.x[j] == 1.0 && prices[j] > 0.0) remaining -= prices[j];
    remaining = std::max(remaining, 0.0);
    active = std::move(next);
  }
  res.utility = u.utility(res.x);
  return res;
}

Vector sample_subsimplex(int m, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Vector g(m + 1);
  double sum = 0.0;
  for (int j = 0; j <= m; ++j) {
    double v = unif(rng);
    while (v <= 0.0) v = unif(rng);
    g[j] = -std::log(v);
    sum += g[j];
  }
  return g.head(m) / sum;
}

}  // namespace eelearn
