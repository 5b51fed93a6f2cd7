#include "eelearn/learner.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace eelearn {

DeltaSchedule DeltaSchedule::anytime(double delta) {
  if (delta <= 0.0 || delta >= 1.0)
    throw std::invalid_argument("anytime delta must lie in (0,1)");
  return {Kind::Anytime, delta, 0};
}

DeltaSchedule DeltaSchedule::finite_horizon(long T) {
  if (T < 2) throw std::invalid_argument("finite horizon must be at least 2");
  return {Kind::FiniteHorizon, 0.0, T};
}

double DeltaSchedule::at(long t, int n) const {
  if (t < 1) throw std::invalid_argument("round index must be positive");
  if (kind == Kind::FiniteHorizon) return 1.0 / static_cast<double>(horizon);
  const double pi2 = std::numbers::pi * std::numbers::pi;
  return 2.0 * delta / (n * pi2 * static_cast<double>(t) * static_cast<double>(t));
}

double exploration_kappa(double phi_one_norm_sq) {
  return 3.0 + 2.0 * std::log(1.0 + 2.0 * phi_one_norm_sq);
}

double exploration_scale(int m, long t, double delta_t, double sigma, double c_mu,
                         double phi_one_norm_sq) {
  if (t < 1) throw std::invalid_argument("round index must be positive");
  if (delta_t <= 0.0 || delta_t >= 1.0)
    throw std::invalid_argument("delta_t must lie in (0,1)");
  if (c_mu <= 0.0) throw std::invalid_argument("c_mu must be positive");
  const double kappa = exploration_kappa(phi_one_norm_sq);
  const double a2 = 4.0 * (kappa * kappa * sigma * sigma / (c_mu * c_mu)) * m *
                    std::log(static_cast<double>(t)) * std::log(m / delta_t);
  return std::sqrt(std::max(a2, 0.0));
}

double link_slope_floor(const ParametricUtility& shape, double phi_floor) {
  if (shape.identity_link()) return 1.0;
  return shape.link_slope(shape.theta_box().lo * phi_floor);
}

double link_slope_ceiling(const ParametricUtility& shape) {
  if (shape.identity_link()) return 1.0;
  return shape.link_slope(shape.resources() * shape.theta_box().hi);
}

long initialization_rounds(int n, int m) {
  return static_cast<long>(m) * m * std::max(n, m);
}

Allocation init_schedule(int n, int m, long t) {
  if (t < 1 || t > initialization_rounds(n, m))
    throw std::invalid_argument("initialization round index out of range");
  const int cycle = std::max(n, m);
  const int k = static_cast<int>((t - 1) % cycle) + 1;
  Matrix x = Matrix::Zero(n, m);
  for (int h = 1; h <= std::min(n, m); ++h) {
    // matching rotated by k; indices wrap into [n] and [m]
    if (n >= m) {
      x((h + k - 2) % n, h - 1) = 1.0;
    } else {
      x(h - 1, (h + k - 2) % m) = 1.0;
    }
  }
  return Allocation(std::move(x));
}

namespace {

Matrix regularized(const Matrix& Q, double ridge, bool* used) {
  Eigen::LLT<Matrix> llt(Q);
  if (llt.info() == Eigen::Success && Q.diagonal().minCoeff() > 0.0) return Q;
  if (used != nullptr) *used = true;
  return Q + ridge * Matrix::Identity(Q.rows(), Q.cols());
}

}  // namespace

QuasiMleResult fit_quasi_mle(const std::vector<Vector>& phi_history,
                             const std::vector<double>& y_history, const Matrix& Q,
                             const ParametricUtility& shape, const Vector& warm,
                             const QuasiMleOptions& opt) {
  if (phi_history.size() != y_history.size())
    throw std::invalid_argument("history feature and feedback lengths differ");
  const int m = static_cast<int>(Q.rows());
  const ThetaBox& box = shape.theta_box();

  QuasiMleResult res;
  Matrix Qr = regularized(Q, opt.ridge, &res.ridged);
  Eigen::LLT<Matrix> llt(Qr);
  if (llt.info() != Eigen::Success) {
    Qr += opt.ridge * Matrix::Identity(m, m);
    llt.compute(Qr);
    res.ridged = true;
  }

  if (shape.identity_link()) {
    // least squares; exact when the unconstrained solution is inside the box
    Vector b = Vector::Zero(m);
    for (std::size_t s = 0; s < phi_history.size(); ++s) b += phi_history[s] * y_history[s];
    Vector ls = llt.solve(b);
    if (box.contains(ls)) {
      res.theta = ls;
      return res;
    }
    res.theta = box.clamp(ls);
    // fall through to the projected refinement below, warm-started at the clamp
  } else {
    res.theta = box.clamp(warm);
  }

  auto score = [&](const Vector& theta) {
    Vector s = Vector::Zero(m);
    for (std::size_t r = 0; r < phi_history.size(); ++r) {
      const Vector& ph = phi_history[r];
      s += ph * (shape.link(theta.dot(ph)) - y_history[r]);
    }
    return s;
  };
  auto objective = [&](const Vector& theta) {
    const Vector s = score(theta);
    return s.dot(llt.solve(s));
  };

  Vector theta = res.theta;
  double fv = objective(theta);
  double step = 1.0;
  for (int it = 0; it < opt.max_iters; ++it) {
    Vector s = score(theta);
    Matrix J = Matrix::Zero(m, m);
    for (std::size_t r = 0; r < phi_history.size(); ++r) {
      const Vector& ph = phi_history[r];
      J += ph * ph.transpose() * shape.link_slope(theta.dot(ph));
    }
    Vector grad = 2.0 * J.transpose() * llt.solve(s);
    const Vector pg = theta - box.clamp(theta - grad);
    res.iters = it + 1;
    if (pg.norm() <= opt.grad_tol) break;

    bool moved = false;
    double trial = std::min(step * 2.0, 1e6 / (grad.norm() + 1e-12));
    for (int bt = 0; bt < 40; ++bt) {
      Vector cand = box.clamp(theta - trial * grad);
      const double fc = objective(cand);
      if (fc < fv - 1e-18) {
        theta = std::move(cand);
        fv = fc;
        step = trial;
        moved = true;
        break;
      }
      trial *= 0.5;
    }
    if (!moved) break;
  }
  res.theta = theta;
  return res;
}

Vector sample_and_project(const Vector& theta_bar, const Matrix& Q, double alpha,
                          const ThetaBox& box, std::mt19937_64& rng, bool* fallback_used) {
  const int m = static_cast<int>(Q.rows());
  if (alpha < 0.0) throw std::invalid_argument("alpha must be nonnegative");
  if (alpha == 0.0) return box.clamp(theta_bar);

  std::normal_distribution<double> normal(0.0, 1.0);
  Vector z(m);
  for (int j = 0; j < m; ++j) z[j] = normal(rng);

  Eigen::LLT<Matrix> llt(Q);
  Vector dev;
  if (llt.info() == Eigen::Success) {
    // Q = L L^T, so L^{-T} z has covariance Q^{-1}
    dev = llt.matrixU().solve(z);
  } else {
    if (fallback_used != nullptr) *fallback_used = true;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(Q);
    Vector lam = eig.eigenvalues().cwiseMax(1e-12);
    dev = eig.eigenvectors() * lam.cwiseSqrt().cwiseInverse().asDiagonal() *
          (eig.eigenvectors().transpose() * z);
  }
  return box.clamp(theta_bar + alpha * dev);
}

OnlineLearner::OnlineLearner(std::vector<ParametricUtility> shapes, Matrix endowments,
                             double sigma, LearnerOptions opt)
    : n_(static_cast<int>(endowments.rows())),
      m_(static_cast<int>(endowments.cols())),
      shapes_(std::move(shapes)),
      endowments_(std::move(endowments)),
      sigma_(sigma),
      opt_(std::move(opt)),
      init_rounds_(eelearn::initialization_rounds(n_, m_)) {
  if (static_cast<int>(shapes_.size()) != n_)
    throw std::invalid_argument("one utility shape per agent required");
  if (opt_.ce_solver != "pr" && opt_.ce_solver != "tatonnement")
    throw std::invalid_argument("ce_solver must be 'pr' or 'tatonnement'");

  c_mu_ = std::numeric_limits<double>::infinity();
  l_mu_ = 0.0;
  phi_one_norm_sq_ = 0.0;
  const Vector ones = Vector::Ones(m_);
  for (const auto& s : shapes_) {
    c_mu_ = std::min(c_mu_, link_slope_floor(s, opt_.phi_floor));
    l_mu_ = std::max(l_mu_, link_slope_ceiling(s));
  }
  phi_one_norm_sq_ = shapes_[0].features(ones).squaredNorm();

  agents_.resize(n_);
  for (int i = 0; i < n_; ++i) {
    agents_[i].Q = Matrix::Zero(m_, m_);
    const ThetaBox& b = shapes_[i].theta_box();
    agents_[i].theta_bar = Vector::Constant(m_, 0.5 * (b.lo + b.hi));
    agents_[i].theta_sampled = agents_[i].theta_bar;
  }
}

MarketOutcome OnlineLearner::step_allocate(std::mt19937_64& rng) {
  if (awaiting_feedback_)
    throw std::logic_error("feedback for the previous round has not been recorded");

  MarketOutcome outcome;
  if (in_initialization()) {
    outcome.allocation = init_schedule(n_, m_, t_);
    outcome.prices = PriceVector(Vector::Constant(m_, 1.0 / m_));
    last_alpha_ = 0.0;
  } else {
    const double dt = opt_.schedule.at(t_, n_);
    double alpha = exploration_scale(m_, t_, dt, sigma_, c_mu_, phi_one_norm_sq_);
    if (opt_.force_alpha_zero_after && t_ > *opt_.force_alpha_zero_after) alpha = 0.0;
    last_alpha_ = alpha;

    const long learning_round = t_ - init_rounds_;
    std::vector<ParametricUtility> sampled;
    sampled.reserve(n_);
    for (int i = 0; i < n_; ++i) {
      AgentLearnerState& a = agents_[i];
      if (opt_.rebuild_every > 0 && learning_round % opt_.rebuild_every == 0) {
        a.Q.setZero();
        for (const auto& ph : a.phi_history) a.Q += ph * ph.transpose();
      }
      QuasiMleResult fit =
          fit_quasi_mle(a.phi_history, a.y_history, a.Q, shapes_[i], a.theta_bar, opt_.mle);
      a.theta_bar = fit.theta;
      a.ridged = a.ridged || fit.ridged;
      bool fb = false;
      a.theta_sampled =
          sample_and_project(a.theta_bar, a.Q, alpha, shapes_[i].theta_box(), rng, &fb);
      a.sampler_fallback = a.sampler_fallback || fb;
      sampled.push_back(shapes_[i].with_theta(a.theta_sampled));
    }

    if (opt_.ce_solver == "pr") {
      ProportionalResponseOptions pr;
      pr.iters = opt_.ce_iters;
      if (opt_.warm_start_ce && last_outcome_) pr.warm_start = &*last_outcome_;
      outcome = solve_ce_proportional_response(sampled, endowments_, pr);
    } else {
      TatonnementOptions tat;
      tat.max_iters = opt_.ce_iters;
      if (opt_.warm_start_ce && last_outcome_)
        tat.initial_prices = last_outcome_->prices.values;
      outcome = solve_ce_tatonnement(sampled, endowments_, tat);
    }
  }
  last_outcome_ = outcome;
  awaiting_feedback_ = true;
  return outcome;
}

void OnlineLearner::step_observe(const std::vector<double>& feedback) {
  if (!awaiting_feedback_) throw std::logic_error("no allocation awaiting feedback");
  if (static_cast<int>(feedback.size()) != n_)
    throw std::invalid_argument("one feedback value per agent required");
  for (int i = 0; i < n_; ++i) {
    AgentLearnerState& a = agents_[i];
    Vector ph = shapes_[i].features(last_outcome_->allocation.agent(i));
    a.Q += ph * ph.transpose();
    a.phi_history.push_back(std::move(ph));
    a.y_history.push_back(feedback[i]);
  }
  awaiting_feedback_ = false;
  ++t_;
}

}  // namespace eelearn
