#pragma once

#include <Eigen/Dense>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

namespace eelearn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Absolute tolerance used by all feasibility and normalization checks.
inline constexpr double kFeasTol = 1e-9;

// ---------------------------------------------------------------------------
// Utility families
// ---------------------------------------------------------------------------

struct LinearFamily {};

struct CesFamily {
  double rho;  // substitution exponent, in (0, 1]
};

struct AmdahlFamily {
  Vector parallel_fraction;  // f_j in (0, 1), one per resource
};

using UtilityFamily = std::variant<LinearFamily, CesFamily, AmdahlFamily>;

/// Per-coordinate coefficient interval [lo, hi] with lo > 0.
struct ThetaBox {
  double lo = 0.05;
  double hi = 1.2;

  Vector clamp(const Vector& theta) const;
  bool contains(const Vector& theta, double tol = 0.0) const;
};

/// Utility of the form u(x) = mu(theta . phi(x)).
///
/// phi acts coordinatewise: identity (linear), x^rho (CES), or the speedup
/// curve x/(f + (1-f)x) (Amdahl). mu is the identity except for CES, where
/// mu(s) = s^(1/rho). All families satisfy phi(0)=0, phi(1)=1, mu(0)=0.
class ParametricUtility {
 public:
  ParametricUtility(UtilityFamily family, Vector theta, ThetaBox box);

  int resources() const { return static_cast<int>(theta_.size()); }
  const Vector& theta() const { return theta_; }
  const ThetaBox& theta_box() const { return box_; }
  const UtilityFamily& family() const { return family_; }

  /// Same family and box, different coefficients.
  ParametricUtility with_theta(Vector theta) const;

  Vector features(const Vector& x) const;        // phi(x)
  Vector feature_slopes(const Vector& x) const;  // phi'(x), coordinatewise
  double link(double s) const;                   // mu(s)
  double link_slope(double s) const;             // mu'(s)
  bool identity_link() const;

  double utility(const Vector& x) const;
  double utility_from_features(const Vector& phi) const;

 private:
  UtilityFamily family_;
  Vector theta_;
  ThetaBox box_;
};

// ---------------------------------------------------------------------------
// Market primitives
// ---------------------------------------------------------------------------

/// n x m allocation with entries in [0,1] and per-resource sums <= 1.
struct Allocation {
  Matrix values;

  Allocation() = default;
  explicit Allocation(Matrix v);

  int agents() const { return static_cast<int>(values.rows()); }
  int resources() const { return static_cast<int>(values.cols()); }
  Vector agent(int i) const { return values.row(i).transpose(); }
};

/// Nonnegative prices normalized to sum to 1.
struct PriceVector {
  Vector values;

  PriceVector() = default;
  explicit PriceVector(Vector v);

  int resources() const { return static_cast<int>(values.size()); }
};

/// The ground-truth world: endowments, true utilities, feedback noise scale.
struct Economy {
  int n = 0;
  int m = 0;
  Matrix endowments;  // n x m, each column sums to 1
  std::vector<ParametricUtility> utilities;
  double noise_sigma = 0.0;

  static Economy make(Matrix endowments, std::vector<ParametricUtility> utilities,
                      double noise_sigma);

  Vector endowment(int i) const { return endowments.row(i).transpose(); }
  double endowment_utility(int i) const;
};

// ---------------------------------------------------------------------------
// Demand oracle
// ---------------------------------------------------------------------------

struct ExactLinearDemand {};

struct ProjectedAscentDemand {
  int iters = 200;
  double step0 = 0.05;
  double improve_tol = 1e-9;
  int stall_limit = 25;
};

struct MonteCarloDemand {
  int samples = 50;
  int max_proposals = 100000;
};

using DemandMethod = std::variant<ExactLinearDemand, ProjectedAscentDemand, MonteCarloDemand>;

struct DemandResult {
  Vector x;
  double utility = 0.0;
  bool degraded = false;  // Monte Carlo failed to accept any sample
  int accepted = 0;       // accepted Monte Carlo samples
};

/// Budget-constrained approximate utility maximizer over [0,1]^m.
/// ExactLinearDemand is exact and only valid for the linear family; the
/// Monte Carlo variant requires an rng.
DemandResult demand(const ParametricUtility& u, const PriceVector& p, double budget,
                    const DemandMethod& method, std::mt19937_64* rng = nullptr);

/// Exact CES demand: spending shares proportional to (theta_j/p_j)^(1/(1-rho))
/// p_j, with violated unit caps fixed at 1 and the remainder re-solved
/// (finitely many passes). rho = 1 reduces to the greedy linear rule.
DemandResult ces_demand_exact(const ParametricUtility& u, const PriceVector& p, double budget);

/// Stochastic feedback: u_i(x_i) plus Gaussian noise of scale noise_sigma.
double sample_feedback(const Economy& e, int agent, const Vector& x_i, std::mt19937_64& rng);

/// Uniform sample from {x in [0,1]^m : sum_j x_j <= 1} via a Dirichlet draw
/// with one slack coordinate.
Vector sample_subsimplex(int m, std::mt19937_64& rng);

}  // namespace eelearn
