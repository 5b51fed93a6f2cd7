#pragma once

#include <optional>
#include <random>
#include <vector>

#include "eelearn/economy.hpp"
#include "eelearn/equilibrium.hpp"

namespace eelearn {

/// Failure-probability schedule feeding the exploration scale.
struct DeltaSchedule {
  enum class Kind { Anytime, FiniteHorizon };
  Kind kind = Kind::FiniteHorizon;
  double delta = 0.05;  // anytime target failure probability
  long horizon = 0;     // finite-horizon T

  static DeltaSchedule anytime(double delta);
  static DeltaSchedule finite_horizon(long T);

  /// Anytime: 2*delta / (n pi^2 t^2). Finite horizon: 1/T for every t.
  double at(long t, int n) const;
};

/// Exploration standard-deviation multiplier for round t:
/// alpha_t^2 = 4 (kappa^2 sigma^2 / c_mu^2) m log(t) log(m/delta_t),
/// kappa = 3 + 2 log(1 + 2 ||phi(1)||^2).
double exploration_scale(int m, long t, double delta_t, double sigma, double c_mu,
                         double phi_one_norm_sq);
double exploration_kappa(double phi_one_norm_sq);

/// Smallest attainable slope of the outer link over the coefficient box, with
/// the feature argument floored at theta_box.lo * phi_floor. Identity links
/// give 1. phi_floor defaults to phi_j(1) = 1, the smallest positive feature
/// value every agent is guaranteed to visit during initialization.
double link_slope_floor(const ParametricUtility& shape, double phi_floor = 1.0);
/// Largest attainable slope of the outer link, at m * theta_box.hi.
double link_slope_ceiling(const ParametricUtility& shape);

/// Number of rounds in the initialization phase: m^2 * max(n, m).
long initialization_rounds(int n, int m);

/// Deterministic initialization allocation for round t (1-based). Each round
/// matches agents to single resources; over the whole phase every agent
/// receives every full single-resource bundle exactly m^2 times. Unmatched
/// agents receive the zero bundle. Throws if t is out of range.
Allocation init_schedule(int n, int m, long t);

struct QuasiMleOptions {
  int max_iters = 500;
  double grad_tol = 1e-10;
  double ridge = 1e-8;  // fallback regularization for singular design
};

struct QuasiMleResult {
  Vector theta;
  bool ridged = false;
  int iters = 0;
};

/// Box-constrained minimizer of the Q^{-1}-norm of the estimating-equation
/// score sum_s phi_s (mu(theta . phi_s) - y_s). Identity links solve least
/// squares directly; otherwise projected gradient descent with backtracking,
/// warm-started from `warm`.
QuasiMleResult fit_quasi_mle(const std::vector<Vector>& phi_history,
                             const std::vector<double>& y_history, const Matrix& Q,
                             const ParametricUtility& shape, const Vector& warm,
                             const QuasiMleOptions& opt = {});

/// Draw theta_bar + alpha * chol(Q^{-1}) z with z standard normal, then clamp
/// onto the box (the exact Euclidean projection for an axis-aligned box).
/// Cholesky failure falls back to a floored eigendecomposition and sets
/// *fallback_used.
Vector sample_and_project(const Vector& theta_bar, const Matrix& Q, double alpha,
                          const ThetaBox& box, std::mt19937_64& rng,
                          bool* fallback_used = nullptr);

struct AgentLearnerState {
  Matrix Q;                        // sum of phi phi^T over history
  std::vector<Vector> phi_history;
  std::vector<double> y_history;
  Vector theta_bar;
  Vector theta_sampled;
  bool ridged = false;
  bool sampler_fallback = false;
};

struct LearnerOptions {
  DeltaSchedule schedule;
  int ce_iters = 10;
  std::string ce_solver = "pr";  // "pr" or "tatonnement"
  double phi_floor = 1.0;
  std::optional<long> force_alpha_zero_after;  // oracle mode for sanity checks
  bool warm_start_ce = true;
  QuasiMleOptions mle{};
  int rebuild_every = 256;  // full Q rebuild cadence, bounds float drift
};

/// The online mechanism: initialization schedule, per-agent design matrices
/// and quasi-MLE estimates, Gaussian exploration sampling with projection,
/// and an equilibrium solve on the sampled utilities each round.
///
/// The learner sees utility shapes (family, feature map, coefficient box),
/// endowments, and the feedback noise scale. It never sees true coefficients.
class OnlineLearner {
 public:
  OnlineLearner(std::vector<ParametricUtility> shapes, Matrix endowments, double sigma,
                LearnerOptions opt);

  int n() const { return n_; }
  int m() const { return m_; }
  long t() const { return t_; }  // round about to be played (1-based)
  bool in_initialization() const { return t_ <= init_rounds_; }
  long initialization_rounds() const { return init_rounds_; }
  double c_mu() const { return c_mu_; }
  double l_mu() const { return l_mu_; }
  double phi_one_norm_sq() const { return phi_one_norm_sq_; }
  double last_alpha() const { return last_alpha_; }
  double delta_t(long t) const { return opt_.schedule.at(t, n_); }
  const AgentLearnerState& agent(int i) const { return agents_[i]; }
  const ParametricUtility& shape(int i) const { return shapes_[i]; }
  const LearnerOptions& options() const { return opt_; }

  /// Allocation and prices for the current round. Initialization rounds play
  /// the schedule at uniform prices; learning rounds fit, sample, and solve a
  /// CE (10 proportional-response iterations by default, warm-started).
  MarketOutcome step_allocate(std::mt19937_64& rng);

  /// Record one feedback value per agent for the last allocated round.
  void step_observe(const std::vector<double>& feedback);

 private:
  int n_, m_;
  std::vector<ParametricUtility> shapes_;
  Matrix endowments_;
  double sigma_;
  LearnerOptions opt_;
  long init_rounds_;
  double c_mu_, l_mu_, phi_one_norm_sq_;
  long t_ = 1;
  double last_alpha_ = 0.0;
  std::vector<AgentLearnerState> agents_;
  std::optional<MarketOutcome> last_outcome_;
  bool awaiting_feedback_ = false;
};

}  // namespace eelearn
