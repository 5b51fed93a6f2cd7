#include "eelearn/diagnostics.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace eelearn {

ConfidenceConstants compute_constants(int m, long t, double delta_t, double delta2_t,
                                      double sigma, double c_mu, double l_mu,
                                      double phi_one_norm_sq, Beta2Variant variant) {
  if (t < 2) throw std::invalid_argument("confidence constants need t >= 2");
  if (delta_t <= 0.0 || delta_t >= 1.0 || delta2_t <= 0.0 || delta2_t >= 1.0)
    throw std::invalid_argument("delta sequences must lie in (0,1)");
  if (c_mu <= 0.0) throw std::invalid_argument("c_mu must be positive");

  ConfidenceConstants c;
  c.m = m;
  c.t = t;
  c.delta_t = delta_t;
  c.delta2_t = delta2_t;
  c.sigma = sigma;
  c.c_mu = c_mu;
  c.l_mu = l_mu;
  c.phi_one_norm_sq = phi_one_norm_sq;
  c.variant = variant;

  const double logt = std::log(static_cast<double>(t));
  c.kappa = exploration_kappa(phi_one_norm_sq);
  c.alpha_t = exploration_scale(m, t, delta_t, sigma, c_mu, phi_one_norm_sq);
  c.beta1_t = (2.0 / c_mu) * c.kappa * sigma * std::sqrt(2.0 * m * logt) *
              std::sqrt(std::log(m / delta_t));
  const double log_inv = std::log(1.0 / delta2_t);
  c.gamma2_t = std::max(8.0 * log_inv, std::sqrt(8.0 * m * log_inv));
  c.beta2_t = variant == Beta2Variant::ProofConsistent
                  ? c.alpha_t * std::sqrt(m + c.gamma2_t)
                  : std::sqrt(c.alpha_t * (m + c.gamma2_t));
  c.beta3_t = l_mu * (c.beta1_t + c.beta2_t);
  return c;
}

double chi_square_tail_bound(int m, double alpha) {
  if (alpha < 0.0) throw std::invalid_argument("alpha must be nonnegative");
  if (alpha > m) return std::exp(-alpha / 8.0);
  return std::exp(-alpha * alpha / (8.0 * m));
}

double normal_tail_lower_bound(double t) {
  if (t < 0.0) throw std::invalid_argument("t must be nonnegative");
  return std::sqrt(2.0 / std::numbers::pi) * std::exp(-t * t / 2.0) /
         (t + std::sqrt(t * t + 4.0));
}

bool log_dominance_check(double x, double c) {
  if (c <= 0.0 || x < 0.0 || x > c)
    throw std::invalid_argument("log dominance check needs 0 <= x <= c, c > 0");
  return x <= (c / std::log1p(c)) * std::log1p(x) + 1e-12;
}

double self_normalized_kappa(double c_m_sq, double lambda0) {
  if (lambda0 <= 0.0) throw std::invalid_argument("lambda0 must be positive");
  return std::sqrt(3.0 + 2.0 * std::log(1.0 + 2.0 * c_m_sq / lambda0));
}

namespace {

double q_norm(const Matrix& Q, const Vector& d) {
  return std::sqrt(std::max(0.0, d.dot(Q * d)));
}

}  // namespace

EventRecord record_event(const Matrix& Q, const Vector& theta_true, const Vector& theta_bar,
                         const Vector& theta_sampled, const Vector& phi_played,
                         const ConfidenceConstants& c) {
  EventRecord r;
  r.a_distance = q_norm(Q, theta_true - theta_bar);
  r.b_distance = q_norm(Q, theta_bar - theta_sampled);
  r.a_holds = r.a_distance <= c.beta1_t;
  r.b_holds = r.b_distance <= c.beta2_t;
  Eigen::LLT<Matrix> llt(Q);
  if (llt.info() == Eigen::Success) {
    r.rho_at_play = std::sqrt(std::max(0.0, phi_played.dot(llt.solve(phi_played))));
  } else {
    Matrix Qr = Q + 1e-12 * Matrix::Identity(Q.rows(), Q.cols());
    r.rho_at_play = std::sqrt(std::max(0.0, phi_played.dot(Qr.llt().solve(phi_played))));
  }
  return r;
}

std::vector<EventRecord> record_events(const OnlineLearner& learner,
                                       const std::vector<Vector>& true_thetas,
                                       const ConfidenceConstants& c, const Allocation& played) {
  const int n = learner.n();
  if (static_cast<int>(true_thetas.size()) != n)
    throw std::invalid_argument("one true coefficient vector per agent required");
  std::vector<EventRecord> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    const AgentLearnerState& a = learner.agent(i);
    const Vector phi = learner.shape(i).features(played.agent(i));
    out.push_back(record_event(a.Q, true_thetas[i], a.theta_bar, a.theta_sampled, phi, c));
  }
  return out;
}

}  // namespace eelearn
