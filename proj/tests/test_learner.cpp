#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <map>
#include <numbers>

#include "eelearn/learner.hpp"
#include "eelearn/losses.hpp"
#include "support/fixtures.hpp"

using namespace eelearn;

namespace {

OnlineLearner fixture_learner(const Economy& e, LearnerOptions opt) {
  std::vector<ParametricUtility> shapes;
  for (const auto& u : e.utilities)
    shapes.push_back(u.with_theta(Vector::Constant(e.m, 0.5)));
  return OnlineLearner(shapes, e.endowments, e.noise_sigma, opt);
}

void run_rounds(OnlineLearner& learner, const Economy& e, long rounds, std::uint64_t seed,
                std::vector<MarketOutcome>* outcomes = nullptr) {
  std::mt19937_64 lrng(derive_seed(seed, 1));
  std::mt19937_64 frng(derive_seed(seed, 2));
  for (long t = 0; t < rounds; ++t) {
    MarketOutcome out = learner.step_allocate(lrng);
    std::vector<double> y(e.n);
    for (int i = 0; i < e.n; ++i) y[i] = sample_feedback(e, i, out.allocation.agent(i), frng);
    learner.step_observe(y);
    if (outcomes != nullptr) outcomes->push_back(std::move(out));
  }
}

}  // namespace

TEST_CASE("initialization schedule length and per-bundle counts") {
  for (int n : {1, 2, 3, 5}) {
    for (int m : {1, 2, 3, 4}) {
      const long total = initialization_rounds(n, m);
      CHECK(total == static_cast<long>(m) * m * std::max(n, m));
      // count how often each agent receives each full single-resource bundle
      std::map<std::pair<int, int>, int> counts;
      for (long t = 1; t <= total; ++t) {
        const Allocation x = init_schedule(n, m, t);
        for (int j = 0; j < m; ++j) CHECK(x.values.col(j).sum() <= 1.0 + 1e-12);
        for (int i = 0; i < n; ++i) {
          int held = 0;
          for (int j = 0; j < m; ++j) {
            if (x.values(i, j) == 1.0) {
              ++held;
              counts[{i, j}]++;
            } else {
              CHECK(x.values(i, j) == 0.0);
            }
          }
          CHECK(held <= 1);  // single-resource bundles only
        }
      }
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) CHECK(counts[{i, j}] == m * m);
    }
  }
  CHECK_THROWS_AS((void)init_schedule(2, 2, 0), std::invalid_argument);
  CHECK_THROWS_AS((void)init_schedule(2, 2, 9), std::invalid_argument);
}

TEST_CASE("two agents, two resources: the eight-round schedule") {
  int bundles[2][2] = {{0, 0}, {0, 0}};
  for (long t = 1; t <= 8; ++t) {
    const Allocation x = init_schedule(2, 2, t);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        if (x.values(i, j) == 1.0) bundles[i][j]++;
  }
  CHECK(bundles[0][0] == 4);
  CHECK(bundles[0][1] == 4);
  CHECK(bundles[1][0] == 4);
  CHECK(bundles[1][1] == 4);
}

TEST_CASE("design matrices are well conditioned after initialization") {
  std::mt19937_64 rng(71);
  for (int n : {2, 3, 5}) {
    for (int m : {2, 3}) {
      for (const char* fam : {"linear", "ces", "amdahl"}) {
        const Economy e = eefix::random_economy(rng, n, m, fam, 0.0);
        LearnerOptions opt;
        opt.schedule = DeltaSchedule::finite_horizon(10000);
        OnlineLearner learner = fixture_learner(e, opt);
        run_rounds(learner, e, learner.initialization_rounds(), 5);
        for (int i = 0; i < n; ++i) {
          Eigen::SelfAdjointEigenSolver<Matrix> eig(learner.agent(i).Q);
          CHECK(eig.eigenvalues().minCoeff() >= m * m * (1.0 - 1e-9));
        }
      }
    }
  }
}

TEST_CASE("quasi-MLE solves the orthogonal design exactly") {
  Vector e0(2), e1(2);
  e0 << 1.0, 0.0;
  e1 << 0.0, 1.0;
  std::vector<Vector> phis;
  std::vector<double> ys;
  for (int k = 0; k < 10; ++k) {
    phis.push_back(e0);
    ys.push_back(0.5);
    phis.push_back(e1);
    ys.push_back(0.25);
  }
  Matrix Q = 10.0 * Matrix::Identity(2, 2);
  ParametricUtility shape(LinearFamily{}, Vector::Constant(2, 0.5), ThetaBox{0.01, 1.0});
  const auto fit = fit_quasi_mle(phis, ys, Q, shape, Vector::Constant(2, 0.5));
  CHECK(fit.theta[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(fit.theta[1] == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("noiseless identity-link feedback recovers the true coefficients") {
  std::mt19937_64 rng(73);
  const Economy e = eefix::random_economy(rng, 1, 3, "amdahl", 0.0);
  const auto& truth = e.utilities[0];
  std::vector<Vector> phis;
  std::vector<double> ys;
  Matrix Q = Matrix::Zero(3, 3);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int s = 0; s < 40; ++s) {
    Vector x(3);
    for (int j = 0; j < 3; ++j) x[j] = unif(rng);
    const Vector ph = truth.features(x);
    phis.push_back(ph);
    ys.push_back(truth.utility(x));
    Q += ph * ph.transpose();
  }
  const auto fit = fit_quasi_mle(phis, ys, Q, truth, Vector::Constant(3, 0.5));
  CHECK((fit.theta - truth.theta()).norm() <= 1e-10);
}

TEST_CASE("quasi-MLE stays in the box and beats random probes") {
  std::mt19937_64 rng(79);
  const ThetaBox box{0.1, 0.6};
  Vector theta_out(2);
  theta_out << 0.9, 0.3;  // outside the box on the first coordinate
  std::vector<Vector> phis;
  std::vector<double> ys;
  Matrix Q = Matrix::Zero(2, 2);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int s = 0; s < 60; ++s) {
    Vector x(2);
    x << unif(rng), unif(rng);
    phis.push_back(x);
    ys.push_back(theta_out.dot(x));
    Q += x * x.transpose();
  }
  ParametricUtility shape(LinearFamily{}, Vector::Constant(2, 0.3), box);
  const auto fit = fit_quasi_mle(phis, ys, Q, shape, Vector::Constant(2, 0.3));
  CHECK(box.contains(fit.theta, 1e-12));

  // Q^{-1}-norm of the score at the fit vs at random box points
  Eigen::LLT<Matrix> llt(Q);
  auto score_norm = [&](const Vector& th) {
    Vector s = Vector::Zero(2);
    for (std::size_t k = 0; k < phis.size(); ++k)
      s += phis[k] * (th.dot(phis[k]) - ys[k]);
    return s.dot(llt.solve(s));
  };
  const double at_fit = score_norm(fit.theta);
  std::uniform_real_distribution<double> in_box(box.lo, box.hi);
  for (int probe = 0; probe < 100; ++probe) {
    Vector th(2);
    th << in_box(rng), in_box(rng);
    CHECK(at_fit <= score_norm(th) + 1e-9);
  }
}

TEST_CASE("CES quasi-MLE recovers coefficients from noiseless data") {
  std::mt19937_64 rng(83);
  const Economy e = eefix::random_economy(rng, 1, 2, "ces", 0.0);
  const auto& truth = e.utilities[0];
  std::vector<Vector> phis;
  std::vector<double> ys;
  Matrix Q = Matrix::Zero(2, 2);
  std::uniform_real_distribution<double> unif(0.05, 1.0);
  for (int s = 0; s < 80; ++s) {
    Vector x(2);
    x << unif(rng), unif(rng);
    const Vector ph = truth.features(x);
    phis.push_back(ph);
    ys.push_back(truth.utility(x));
    Q += ph * ph.transpose();
  }
  QuasiMleOptions opt;
  opt.max_iters = 2000;
  const auto fit = fit_quasi_mle(phis, ys, Q, truth, Vector::Constant(2, 0.6), opt);
  CHECK((fit.theta - truth.theta()).norm() <= 1e-4);
}

TEST_CASE("sampling at zero scale returns the estimate unchanged") {
  Matrix Q = 5.0 * Matrix::Identity(2, 2);
  ThetaBox box{0.05, 1.2};
  Vector bar(2);
  bar << 0.4, 0.9;
  std::mt19937_64 rng(5);
  CHECK(sample_and_project(bar, Q, 0.0, box, rng).isApprox(bar, 1e-15));
}

TEST_CASE("sampled coordinates below the floor clamp to the floor exactly") {
  Matrix Q = Matrix::Identity(2, 2);
  ThetaBox box{0.3, 0.6};
  Vector bar(2);
  bar << 0.31, 0.59;
  std::mt19937_64 rng(6);
  int low_hits = 0, high_hits = 0;
  for (int k = 0; k < 200; ++k) {
    const Vector s = sample_and_project(bar, Q, 2.0, box, rng);
    CHECK(box.contains(s));
    if (s[0] == 0.3 || s[1] == 0.3) ++low_hits;
    if (s[0] == 0.6 || s[1] == 0.6) ++high_hits;
  }
  CHECK(low_hits > 0);
  CHECK(high_hits > 0);
}

TEST_CASE("pre-projection sampling covariance matches alpha^2 Q^{-1}") {
  Matrix Q(2, 2);
  Q << 8.0, 2.0, 2.0, 4.0;
  const double alpha = 0.7;
  // wide box so the clamp never binds
  ThetaBox box{1e-6, 1e6};
  Vector bar = Vector::Constant(2, 100.0);
  std::mt19937_64 rng(99);
  const int N = 100000;
  Matrix cov = Matrix::Zero(2, 2);
  Vector mean = Vector::Zero(2);
  std::vector<Vector> draws;
  draws.reserve(N);
  for (int k = 0; k < N; ++k) draws.push_back(sample_and_project(bar, Q, alpha, box, rng));
  for (const auto& d : draws) mean += d;
  mean /= N;
  for (const auto& d : draws) cov += (d - mean) * (d - mean).transpose();
  cov /= N - 1;
  const Matrix target = alpha * alpha * Q.inverse();
  CHECK((cov - target).norm() <= 0.05 * target.norm());
}

TEST_CASE("failure-probability schedules") {
  const auto anytime = DeltaSchedule::anytime(0.05);
  CHECK(anytime.at(1, 5) ==
        doctest::Approx(2.0 * 0.05 / (5.0 * std::numbers::pi * std::numbers::pi))
            .epsilon(1e-12));
  const auto fh = DeltaSchedule::finite_horizon(2000);
  for (long t : {1L, 7L, 2000L}) CHECK(fh.at(t, 5) == doctest::Approx(5e-4).epsilon(1e-15));

  // the anytime schedule sums to delta/(3n) per sequence
  double sum = 0.0;
  for (long t = 1; t <= 1000000; ++t) sum += anytime.at(t, 5);
  const double limit = 0.05 / (3.0 * 5.0);
  CHECK(sum <= limit + 1e-9);
  CHECK(sum >= 0.999 * limit);
}

TEST_CASE("exploration scale grows with the round index under a fixed delta") {
  double prev = 0.0;
  for (long t = 2; t <= 4000; t *= 2) {
    const double a = exploration_scale(3, t, 1.0 / 2000.0, 0.1, 1.0, 3.0);
    CHECK(a >= prev);
    prev = a;
  }
}

TEST_CASE("link slope envelopes per family") {
  ParametricUtility lin(LinearFamily{}, Vector::Constant(2, 0.5), ThetaBox{0.05, 1.2});
  CHECK(link_slope_floor(lin, 1.0) == 1.0);
  CHECK(link_slope_ceiling(lin) == 1.0);

  ParametricUtility ces(CesFamily{0.5}, Vector::Constant(2, 0.5), ThetaBox{0.05, 1.2});
  // mu(y) = y^2: slope 2y evaluated at theta_min * phi_floor and m * theta_max
  CHECK(link_slope_floor(ces, 1.0) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(link_slope_ceiling(ces) == doctest::Approx(2.0 * 2 * 1.2).epsilon(1e-12));
}

TEST_CASE("learner rounds are deterministic and maintain rank-one updates") {
  std::mt19937_64 rng(101);
  const Economy e = eefix::random_economy(rng, 2, 2, "linear", 0.05);
  LearnerOptions opt;
  opt.schedule = DeltaSchedule::finite_horizon(400);
  opt.rebuild_every = 4;

  OnlineLearner a = fixture_learner(e, opt);
  OnlineLearner b = fixture_learner(e, opt);
  std::vector<MarketOutcome> oa, ob;
  run_rounds(a, e, 60, 31, &oa);
  run_rounds(b, e, 60, 31, &ob);
  for (std::size_t k = 0; k < oa.size(); ++k) {
    CHECK(oa[k].allocation.values == ob[k].allocation.values);
    CHECK(oa[k].prices.values == ob[k].prices.values);
  }
  for (int i = 0; i < e.n; ++i) {
    CHECK(a.agent(i).theta_bar == b.agent(i).theta_bar);
    CHECK(a.agent(i).theta_sampled == b.agent(i).theta_sampled);
    // Q recomputable from history
    Matrix rebuilt = Matrix::Zero(e.m, e.m);
    for (const auto& ph : a.agent(i).phi_history) rebuilt += ph * ph.transpose();
    CHECK((a.agent(i).Q - rebuilt).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("oracle learner reaches near-zero equilibrium loss on a linear economy") {
  const Economy e = eefix::three_agent_linear(0.0);  // noiseless
  LearnerOptions opt;
  opt.schedule = DeltaSchedule::finite_horizon(400);
  const long init = initialization_rounds(e.n, e.m);
  opt.force_alpha_zero_after = init + 10;
  OnlineLearner learner = fixture_learner(e, opt);

  std::mt19937_64 lrng(derive_seed(44, 1));
  std::mt19937_64 frng(derive_seed(44, 2));
  double best_lce = std::numeric_limits<double>::infinity();
  const long total = init + 10 + 50;
  for (long t = 1; t <= total; ++t) {
    MarketOutcome out = learner.step_allocate(lrng);
    if (t > init + 10) {
      const double lce = loss_ce(e, out, ExactLinearDemand{}).value;
      best_lce = std::min(best_lce, lce);
    }
    std::vector<double> y(e.n);
    for (int i = 0; i < e.n; ++i) y[i] = sample_feedback(e, i, out.allocation.agent(i), frng);
    learner.step_observe(y);
  }
  CHECK(best_lce < 1e-3);
  // noiseless identity link pins the estimate at the truth
  for (int i = 0; i < e.n; ++i)
    CHECK((learner.agent(i).theta_bar - e.utilities[i].theta()).norm() <= 1e-9);
}
