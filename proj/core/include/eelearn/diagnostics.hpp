#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "eelearn/economy.hpp"
#include "eelearn/learner.hpp"

namespace eelearn {

/// Confidence-set radii for one round. beta2_t has two variants: the
/// proof-consistent scale alpha_t * sqrt(m + gamma2_t) (default) and the
/// literal sqrt(alpha_t (m + gamma2_t)) kept behind a switch.
enum class Beta2Variant { ProofConsistent, Literal };

struct ConfidenceConstants {
  double kappa = 0.0;
  double alpha_t = 0.0;
  double beta1_t = 0.0;
  double beta2_t = 0.0;
  double beta3_t = 0.0;  // l_mu * (beta1_t + beta2_t)
  double gamma2_t = 0.0;
  // inputs echoed
  int m = 0;
  long t = 0;
  double delta_t = 0.0, delta2_t = 0.0, sigma = 0.0, c_mu = 0.0, l_mu = 0.0;
  double phi_one_norm_sq = 0.0;
  Beta2Variant variant = Beta2Variant::ProofConsistent;
};

/// Requires t >= 2 (log t must be positive) and both deltas in (0,1).
ConfidenceConstants compute_constants(int m, long t, double delta_t, double delta2_t,
                                      double sigma, double c_mu, double l_mu,
                                      double phi_one_norm_sq,
                                      Beta2Variant variant = Beta2Variant::ProofConsistent);

/// Chi-square upper-tail bound: P(Z > m + alpha) <= exp(-alpha/8) when
/// alpha > m, else exp(-alpha^2 / (8m)).
double chi_square_tail_bound(int m, double alpha);

/// Standard normal lower tail bound:
/// P(Z > t) >= sqrt(2/pi) exp(-t^2/2) / (t + sqrt(t^2 + 4)).
double normal_tail_lower_bound(double t);

/// Checks x <= (c / log(1+c)) log(1+x) for 0 <= x <= c, c > 0; expected to
/// hold everywhere on that range.
bool log_dominance_check(double x, double c);

/// Self-normalized bound form of kappa: sqrt(3 + 2 log(1 + 2 c_m^2 / lambda0)).
/// Exposed for comparison against the exploration-scale kappa, which drops the
/// square root and the lambda0 scaling.
double self_normalized_kappa(double c_m_sq, double lambda0);

/// Probability floor for the sampled utility exceeding the true one:
/// sqrt(2/pi) / ((sqrt(2) + sqrt(6)) e), roughly 0.076.
inline const double kOptimismLowerBound =
    std::sqrt(2.0 / std::numbers::pi) /
    ((std::sqrt(2.0) + std::sqrt(6.0)) * std::numbers::e);

struct EventRecord {
  bool a_holds = false;  // ||theta* - theta_bar||_Q <= beta1_t
  bool b_holds = false;  // ||theta_bar - theta_sampled||_Q <= beta2_t
  double rho_at_play = 0.0;
  double a_distance = 0.0;
  double b_distance = 0.0;
};

/// Q-norm event distances for one agent at the played allocation.
EventRecord record_event(const Matrix& Q, const Vector& theta_true, const Vector& theta_bar,
                         const Vector& theta_sampled, const Vector& phi_played,
                         const ConfidenceConstants& c);

/// Per-agent events for a full learner round. `played` must be the round's
/// allocation and the learner must not yet have absorbed its feedback, so the
/// design matrices still reflect the history the round was played against.
std::vector<EventRecord> record_events(const OnlineLearner& learner,
                                       const std::vector<Vector>& true_thetas,
                                       const ConfidenceConstants& c, const Allocation& played);

}  // namespace eelearn
