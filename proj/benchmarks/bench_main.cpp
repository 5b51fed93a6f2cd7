#include <benchmark/benchmark.h>

#include <random>

#include "eelearn/equilibrium.hpp"
#include "eelearn/harness.hpp"
#include "eelearn/learner.hpp"
#include "eelearn/losses.hpp"

using namespace eelearn;

namespace {

Economy bench_economy(int n, int m, const std::string& family) {
  GeneratorSpec g;
  g.family = family;
  g.n = n;
  g.m = m;
  g.rho = 0.5;
  g.f = 0.3;
  g.sigma = 0.001;
  return generate_economy(g, 12345);
}

void BM_ProportionalResponse(benchmark::State& state) {
  const Economy e = bench_economy(5, 3, "ces");
  ProportionalResponseOptions opt;
  opt.iters = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_ce_proportional_response(e.utilities, e.endowments, opt));
  }
}
BENCHMARK(BM_ProportionalResponse)->Arg(10)->Arg(200);

void BM_Tatonnement(benchmark::State& state) {
  const Economy e = bench_economy(4, 2, "linear");
  TatonnementOptions opt;
  opt.max_iters = 500;
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_ce_tatonnement(e.utilities, e.endowments, opt));
  }
}
BENCHMARK(BM_Tatonnement);

void BM_ProjectedAscentDemand(benchmark::State& state) {
  const Economy e = bench_economy(1, 3, "ces");
  Vector p(3);
  p << 0.5, 0.3, 0.2;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        demand(e.utilities[0], PriceVector(p), 0.3, ProjectedAscentDemand{}));
  }
}
BENCHMARK(BM_ProjectedAscentDemand);

void BM_CeLossMonteCarlo(benchmark::State& state) {
  const Economy e = bench_economy(5, 3, "ces");
  const MarketOutcome out = solve_ce_proportional_response(e.utilities, e.endowments);
  std::uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(loss_ce(e, out, MonteCarloDemand{50}, seed++));
  }
}
BENCHMARK(BM_CeLossMonteCarlo);

void BM_LearnerRound(benchmark::State& state) {
  const Economy e = bench_economy(5, 3, "ces");
  std::vector<ParametricUtility> shapes;
  for (const auto& u : e.utilities) shapes.push_back(u.with_theta(Vector::Constant(e.m, 0.5)));
  LearnerOptions opt;
  opt.schedule = DeltaSchedule::finite_horizon(100000);
  OnlineLearner learner(shapes, e.endowments, e.noise_sigma, opt);
  std::mt19937_64 lrng(1), frng(2);
  // initialization plus a burn-in to make the fit cost representative
  for (long t = 0; t < learner.initialization_rounds() + 200; ++t) {
    MarketOutcome out = learner.step_allocate(lrng);
    std::vector<double> y(e.n);
    for (int i = 0; i < e.n; ++i) y[i] = sample_feedback(e, i, out.allocation.agent(i), frng);
    learner.step_observe(y);
  }
  for (auto _ : state) {
    MarketOutcome out = learner.step_allocate(lrng);
    std::vector<double> y(e.n);
    for (int i = 0; i < e.n; ++i) y[i] = sample_feedback(e, i, out.allocation.agent(i), frng);
    learner.step_observe(y);
  }
}
BENCHMARK(BM_LearnerRound);

void BM_PeExactCoarse(benchmark::State& state) {
  const Economy e = bench_economy(3, 2, "linear");
  std::mt19937_64 rng(9);
  std::exponential_distribution<double> exp1(1.0);
  Matrix x(3, 2);
  for (int j = 0; j < 2; ++j) {
    double sum = 0.0;
    for (int i = 0; i < 3; ++i) {
      x(i, j) = exp1(rng);
      sum += x(i, j);
    }
    x.col(j) /= sum;
  }
  const Allocation alloc(x);
  for (auto _ : state) {
    benchmark::DoNotOptimize(loss_pe_exact_small(e, alloc, 0.05));
  }
}
BENCHMARK(BM_PeExactCoarse);

}  // namespace

BENCHMARK_MAIN();
