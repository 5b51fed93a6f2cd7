#pragma once

#include <random>
#include <vector>

#include "eelearn/economy.hpp"
#include "eelearn/rng.hpp"

namespace eefix {

using eelearn::Allocation;
using eelearn::Economy;
using eelearn::Matrix;
using eelearn::ParametricUtility;
using eelearn::ThetaBox;
using eelearn::Vector;

inline ThetaBox wide_box() { return {0.05, 1.2}; }

// Three linear agents, two goods. Unique equilibrium prices (1/2, 1/2);
// equilibrium bundles (0,0.5), (0,0.5), (1,0) with utilities 0.5, 0.5, 1.0;
// endowment utilities 0.095, 0.14, 0.19.
inline Economy three_agent_linear(double sigma = 0.0) {
  Matrix endow(3, 2);
  endow << 0.45, 0.05, 0.45, 0.05, 0.1, 0.9;
  std::vector<ParametricUtility> utils;
  Vector t1(2), t2(2), t3(2);
  t1 << 0.1, 1.0;
  t2 << 0.2, 1.0;
  t3 << 1.0, 0.1;
  utils.emplace_back(eelearn::LinearFamily{}, t1, wide_box());
  utils.emplace_back(eelearn::LinearFamily{}, t2, wide_box());
  utils.emplace_back(eelearn::LinearFamily{}, t3, wide_box());
  return Economy::make(endow, utils, sigma);
}

inline Allocation three_agent_equilibrium_allocation() {
  Matrix x(3, 2);
  x << 0.0, 0.5, 0.0, 0.5, 1.0, 0.0;
  return Allocation(x);
}

// The near-efficient comparison allocation: utilities 0.525, 0.56, 0.3002.
inline Allocation three_agent_alternative_allocation() {
  Matrix x(3, 2);
  x << 0.35, 0.49, 0.35, 0.49, 0.3, 0.02;
  return Allocation(x);
}

inline eelearn::PriceVector half_half() {
  Vector p(2);
  p << 0.5, 0.5;
  return eelearn::PriceVector(p);
}

// Random economy with a shared family; endowment columns Dirichlet-normalized.
inline Economy random_economy(std::mt19937_64& rng, int n, int m, const std::string& family,
                              double sigma = 0.0) {
  std::uniform_real_distribution<double> theta_draw(0.1, 1.0);
  std::uniform_real_distribution<double> rho_draw(0.4, 0.9);
  std::uniform_real_distribution<double> f_draw(0.15, 0.6);
  std::exponential_distribution<double> exp1(1.0);

  Matrix endow(n, m);
  for (int j = 0; j < m; ++j) {
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      endow(i, j) = exp1(rng);
      sum += endow(i, j);
    }
    endow.col(j) /= sum;
  }
  std::vector<ParametricUtility> utils;
  for (int i = 0; i < n; ++i) {
    Vector theta(m);
    for (int j = 0; j < m; ++j) theta[j] = theta_draw(rng);
    if (family == "linear") {
      utils.emplace_back(eelearn::LinearFamily{}, theta, wide_box());
    } else if (family == "ces") {
      utils.emplace_back(eelearn::CesFamily{rho_draw(rng)}, theta, wide_box());
    } else {
      utils.emplace_back(eelearn::AmdahlFamily{Vector::Constant(m, f_draw(rng))}, theta,
                         wide_box());
    }
  }
  return Economy::make(endow, utils, sigma);
}

// Random feasible allocation: each column split by a Dirichlet draw scaled by
// a random utilization factor.
inline Allocation random_allocation(std::mt19937_64& rng, int n, int m) {
  std::exponential_distribution<double> exp1(1.0);
  std::uniform_real_distribution<double> use(0.3, 1.0);
  Matrix x(n, m);
  for (int j = 0; j < m; ++j) {
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      x(i, j) = exp1(rng);
      sum += x(i, j);
    }
    x.col(j) *= use(rng) / sum;
  }
  return Allocation(x);
}

inline eelearn::PriceVector random_prices(std::mt19937_64& rng, int m) {
  std::exponential_distribution<double> exp1(1.0);
  Vector p(m);
  double sum = 0.0;
  for (int j = 0; j < m; ++j) {
    p[j] = exp1(rng) + 1e-3;
    sum += p[j];
  }
  return eelearn::PriceVector(p / sum);
}

}  // namespace eefix
