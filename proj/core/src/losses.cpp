#include "eelearn/losses.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <queue>
#include <stdexcept>

#include "eelearn/rng.hpp"

namespace eelearn {

namespace {

constexpr std::uint64_t kCeLossStream = 0xCE10;
constexpr double kDomTol = 1e-12;  // strict tolerance for Pareto domination

double positive_part(double v) { return v > 0.0 ? v : 0.0; }

}  // namespace

CeLoss loss_ce(const Economy& e, const MarketOutcome& outcome, const DemandMethod& method,
               std::uint64_t seed) {
  CeLoss out;
  const bool mc = std::holds_alternative<MonteCarloDemand>(method);
  out.min_accepted = mc ? std::numeric_limits<int>::max() : -1;
  for (int i = 0; i < e.n; ++i) {
    const double budget = outcome.prices.values.dot(e.endowment(i));
    std::mt19937_64 rng(derive_seed(seed, kCeLossStream, static_cast<std::uint64_t>(i)));
    DemandResult d = demand(e.utilities[i], outcome.prices, budget, method, mc ? &rng : nullptr);
    const double achieved = e.utilities[i].utility(outcome.allocation.agent(i));
    double best = std::max(d.utility, e.endowment_utility(i));
    best = std::max(best, achieved);
    out.value += positive_part(best - achieved);
    if (mc) out.min_accepted = std::min(out.min_accepted, d.accepted);
  }
  return out;
}

double loss_si(const Economy& e, const Allocation& x) {
  double total = 0.0;
  for (int i = 0; i < e.n; ++i)
    total += positive_part(e.endowment_utility(i) - e.utilities[i].utility(x.agent(i)));
  return total;
}

CertifiedReference certify_reference(const Economy& e, const MarketOutcome& outcome,
                                     double eps) {
  CertifiedReference ref{outcome, certify_ce(outcome, e.utilities, e.endowments, eps)};
  return ref;
}

double loss_pe_upper(const Economy& e, const Allocation& x, const CertifiedReference& ref) {
  if (!ref.certificate.is_equilibrium)
    throw std::invalid_argument(
        "reference outcome is not a certified equilibrium of this economy");
  double total = 0.0;
  for (int i = 0; i < e.n; ++i) {
    const double ref_u = e.utilities[i].utility(ref.outcome.allocation.agent(i));
    total += positive_part(ref_u - e.utilities[i].utility(x.agent(i)));
  }
  return total;
}

// ---------------------------------------------------------------------------
// Exact Pareto loss on a grid
// ---------------------------------------------------------------------------

namespace {

// Per good: all ways to split `steps` grid units among n agents (full supply),
// plus each agent's score contribution theta_ij * phi_j(share) per split.
struct GoodGrid {
  int n = 0;
  std::vector<double> scores;  // [split * n + agent]
  int splits() const { return static_cast<int>(scores.size()) / n; }
};

void enumerate_splits(int n, int steps, std::vector<std::array<int, 6>>& out) {
  std::array<int, 6> cur{};
  // lexicographic recursion over agents
  auto rec = [&](auto&& self, int agent, int remaining) -> void {
    if (agent == n - 1) {
      cur[agent] = remaining;
      out.push_back(cur);
      return;
    }
    for (int c = 0; c <= remaining; ++c) {
      cur[agent] = c;
      self(self, agent + 1, remaining - c);
    }
  };
  rec(rec, 0, steps);
}

GoodGrid build_good_grid(const Economy& e, int good, int steps) {
  GoodGrid g;
  g.n = e.n;
  std::vector<std::array<int, 6>> splits;
  enumerate_splits(e.n, steps, splits);
  g.scores.resize(splits.size() * e.n);
  const double h = 1.0 / steps;
  // phi table per agent per count; phi depends on the agent's family
  for (std::size_t s = 0; s < splits.size(); ++s) {
    for (int i = 0; i < e.n; ++i) {
      Vector x = Vector::Zero(e.m);
      x[good] = std::min(1.0, splits[s][i] * h);
      g.scores[s * e.n + i] = e.utilities[i].theta().dot(e.utilities[i].features(x));
    }
  }
  return g;
}

// Walks the product of per-good splits, accumulating per-agent scores, and
// calls visit(scores, split_indices) for every full-supply grid allocation.
template <typename Visit>
void for_each_combo(const std::vector<GoodGrid>& goods, Visit&& visit) {
  const int m = static_cast<int>(goods.size());
  const int n = goods[0].n;
  std::array<int, 6> idx{};
  std::array<double, 6> acc{};
  auto rec = [&](auto&& self, int good) -> bool {
    const GoodGrid& g = goods[good];
    const int K = g.splits();
    if (good == m - 1) {
      for (int k = 0; k < K; ++k) {
        idx[good] = k;
        std::array<double, 6> s = acc;
        const double* row = g.scores.data() + static_cast<std::size_t>(k) * n;
        for (int i = 0; i < n; ++i) s[i] += row[i];
        if (!visit(s, idx)) return false;
      }
      return true;
    }
    for (int k = 0; k < K; ++k) {
      idx[good] = k;
      std::array<double, 6> saved = acc;
      const double* row = g.scores.data() + static_cast<std::size_t>(k) * n;
      for (int i = 0; i < n; ++i) acc[i] += row[i];
      const bool cont = self(self, good + 1);
      acc = saved;
      if (!cont) return false;
    }
    return true;
  };
  rec(rec, 0);
}

std::array<double, 6> combo_scores(const std::vector<GoodGrid>& goods,
                                   const std::array<int, 6>& idx) {
  const int n = goods[0].n;
  std::array<double, 6> s{};
  for (std::size_t j = 0; j < goods.size(); ++j) {
    const double* row = goods[j].scores.data() + static_cast<std::size_t>(idx[j]) * n;
    for (int i = 0; i < n; ++i) s[i] += row[i];
  }
  return s;
}

// Upper staircase over (key, value) pairs: keys ascending, values decreasing.
// query(k) returns the largest value among entries with key >= k.
struct Staircase {
  std::map<double, double> entries;

  double query(double key) const {
    auto it = entries.lower_bound(key);
    return it == entries.end() ? -std::numeric_limits<double>::infinity() : it->second;
  }
  void insert(double key, double value) {
    if (query(key) >= value) return;  // an entry at least as good exists
    auto it = entries.insert_or_assign(key, value).first;
    while (it != entries.begin()) {
      auto prev = std::prev(it);
      if (prev->second <= value)
        entries.erase(prev);
      else
        break;
    }
  }
};

// Minimum of `objective` over the Pareto-undominated full-supply grid points,
// specialized by agent count. Domination runs in per-agent score space, which
// orders utilities identically because every outer link is increasing.
template <typename Objective>
double pe_exact_front_min(const std::vector<GoodGrid>& goods, int n, Objective&& objective) {
  double best = std::numeric_limits<double>::infinity();

  if (goods.size() == 1 || n == 1) {
    // One good: full supply pins the score total, so no split dominates
    // another and the whole grid is the front. One agent: a single point.
    for_each_combo(goods, [&](const std::array<double, 6>& s, const std::array<int, 6>&) {
      best = std::min(best, objective(s));
      return true;
    });
    return best;
  }

  if (n == 2) {
    std::vector<std::pair<double, double>> pts;
    for_each_combo(goods, [&](const std::array<double, 6>& s, const std::array<int, 6>&) {
      pts.emplace_back(s[0], s[1]);
      return true;
    });
    std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second > b.second;
    });
    double prev_max1 = -std::numeric_limits<double>::infinity();
    std::size_t i = 0;
    while (i < pts.size()) {
      std::size_t j = i;
      double run_max1 = -std::numeric_limits<double>::infinity();
      while (j < pts.size() && pts[i].first - pts[j].first <= kDomTol) {
        run_max1 = std::max(run_max1, pts[j].second);
        ++j;
      }
      for (std::size_t k = i; k < j; ++k) {
        const double s1 = pts[k].second;
        const bool dominated =
            prev_max1 >= s1 - kDomTol || run_max1 > s1 + kDomTol;
        if (!dominated) best = std::min(best, objective({pts[k].first, s1}));
      }
      prev_max1 = std::max(prev_max1, run_max1);
      i = j;
    }
    return best;
  }

  // n == 3 with exactly two goods. Enumerate (split, split) pairs in
  // decreasing order of agent 0's score with a heap merge of the two sorted
  // per-good score lists, and keep a staircase of the (s1, s2) projections of
  // everything already seen (all of which beat the current point on s0).
  const GoodGrid& A = goods[0];
  const GoodGrid& B = goods[1];
  const int KA = A.splits(), KB = B.splits();
  std::vector<int> ia(KA), ib(KB);
  for (int k = 0; k < KA; ++k) ia[k] = k;
  for (int k = 0; k < KB; ++k) ib[k] = k;
  std::sort(ia.begin(), ia.end(),
            [&](int a, int b) { return A.scores[a * 3] > A.scores[b * 3]; });
  std::sort(ib.begin(), ib.end(),
            [&](int a, int b) { return B.scores[a * 3] > B.scores[b * 3]; });

  struct HeapItem {
    double key;
    int pa, pb;  // positions in the sorted index arrays
    bool operator<(const HeapItem& o) const { return key < o.key; }
  };
  std::priority_queue<HeapItem> heap;
  for (int p = 0; p < KA; ++p)
    heap.push({A.scores[ia[p] * 3] + B.scores[ib[0] * 3], p, 0});

  Staircase stair;
  struct RunPoint {
    double s0, s1, s2;
  };
  std::vector<RunPoint> run;
  while (!heap.empty()) {
    run.clear();
    const double head = heap.top().key;
    while (!heap.empty() && head - heap.top().key <= kDomTol) {
      const HeapItem it = heap.top();
      heap.pop();
      const double* ra = A.scores.data() + static_cast<std::size_t>(ia[it.pa]) * 3;
      const double* rb = B.scores.data() + static_cast<std::size_t>(ib[it.pb]) * 3;
      run.push_back({it.key, ra[1] + rb[1], ra[2] + rb[2]});
      if (it.pb + 1 < KB)
        heap.push({ra[0] + B.scores[ib[it.pb + 1] * 3], it.pa, it.pb + 1});
    }
    std::sort(run.begin(), run.end(), [](const RunPoint& a, const RunPoint& b) {
      if (a.s1 != b.s1) return a.s1 > b.s1;
      return a.s2 > b.s2;
    });
    double strict_max2 = -std::numeric_limits<double>::infinity();
    std::size_t i = 0;
    while (i < run.size()) {
      std::size_t j = i;
      double group_max2 = -std::numeric_limits<double>::infinity();
      while (j < run.size() && run[i].s1 - run[j].s1 <= kDomTol) {
        group_max2 = std::max(group_max2, run[j].s2);
        ++j;
      }
      for (std::size_t k = i; k < j; ++k) {
        const RunPoint& p = run[k];
        const bool dominated = stair.query(p.s1 - kDomTol) >= p.s2 - kDomTol ||
                               strict_max2 >= p.s2 - kDomTol ||
                               group_max2 > p.s2 + kDomTol;
        if (!dominated) best = std::min(best, objective({p.s0, p.s1, p.s2}));
      }
      strict_max2 = std::max(strict_max2, group_max2);
      i = j;
    }
    for (const RunPoint& p : run) stair.insert(p.s1, p.s2);
  }
  return best;
}

// true if some grid point dominates q: >= everywhere, > somewhere (tolerance
// kDomTol on both sides)
bool is_dominated(const std::vector<GoodGrid>& goods, const std::array<double, 6>& q, int n) {
  bool dominated = false;
  for_each_combo(goods, [&](const std::array<double, 6>& s, const std::array<int, 6>&) {
    bool geq = true, strict = false;
    for (int i = 0; i < n; ++i) {
      if (s[i] < q[i] - kDomTol) {
        geq = false;
        break;
      }
      if (s[i] > q[i] + kDomTol) strict = true;
    }
    if (geq && strict) {
      dominated = true;
      return false;  // stop the walk
    }
    return true;
  });
  return dominated;
}

}  // namespace

PeExactResult loss_pe_exact_small(const Economy& e, const Allocation& x, double grid_step) {
  if (e.n * e.m > 6)
    throw std::invalid_argument(
        "exact Pareto loss is limited to n*m <= 6; use loss_pe_upper instead");
  if (grid_step <= 0.0 || grid_step > 1.0)
    throw std::invalid_argument("grid_step must lie in (0,1]");
  const int steps = std::max(1, static_cast<int>(std::lround(1.0 / grid_step)));

  std::vector<GoodGrid> goods;
  goods.reserve(e.m);
  double combos = 1.0;
  for (int j = 0; j < e.m; ++j) {
    goods.push_back(build_good_grid(e, j, steps));
    combos *= goods.back().splits();
  }
  constexpr double kScanMax = 4.5e7;
  if (combos > kScanMax)
    throw std::invalid_argument(
        "grid too fine for the exact Pareto oracle at this size; coarsen grid_step or use "
        "loss_pe_upper");

  const int n = e.n;
  std::array<double, 6> target_s{};
  std::array<double, 6> target_u{};
  for (int i = 0; i < n; ++i) {
    target_s[i] = e.utilities[i].theta().dot(e.utilities[i].features(x.agent(i)));
    target_u[i] = e.utilities[i].utility(x.agent(i));
  }

  PeExactResult result;
  result.grid_step = 1.0 / steps;

  auto objective = [&](const std::array<double, 6>& s) {
    double obj = 0.0;
    for (int i = 0; i < n; ++i)
      obj += positive_part(e.utilities[i].link(s[i]) - target_u[i]);
    return obj;
  };

  // Zero-objective shortcut: a grid point that is pointwise no better than x
  // and undominated pins the minimum at zero, since the objective is
  // nonnegative. The best such candidate by total utility is tried first.
  struct Candidate {
    double usum;
    std::array<int, 6> idx;
  };
  std::vector<Candidate> zero_candidates;
  for_each_combo(goods, [&](const std::array<double, 6>& s, const std::array<int, 6>& idx) {
    for (int i = 0; i < n; ++i)
      if (s[i] > target_s[i] + kDomTol) return true;
    double usum = 0.0;
    for (int i = 0; i < n; ++i) usum += e.utilities[i].link(s[i]);
    zero_candidates.push_back({usum, idx});
    return true;
  });
  std::sort(zero_candidates.begin(), zero_candidates.end(),
            [](const Candidate& a, const Candidate& b) { return a.usum > b.usum; });
  const int tries = std::min<std::size_t>(zero_candidates.size(), 8);
  for (int c = 0; c < tries; ++c) {
    const auto s = combo_scores(goods, zero_candidates[c].idx);
    if (!is_dominated(goods, s, n)) {
      result.value = objective(s);
      return result;
    }
  }

  result.value = pe_exact_front_min(goods, n, objective);
  return result;
}

LossReport loss_fd(const Economy& e, const MarketOutcome& outcome,
                   const CertifiedReference& ref, const DemandMethod& method,
                   std::uint64_t seed) {
  LossReport r;
  const CeLoss ce = loss_ce(e, outcome, method, seed);
  r.l_ce = ce.value;
  r.mc_samples_used = ce.min_accepted;
  r.l_si = loss_si(e, outcome.allocation);
  r.l_pe_upper = loss_pe_upper(e, outcome.allocation, ref);
  r.l_fd_upper = std::max(r.l_pe_upper, r.l_si);
  return r;
}

CumulativeLosses cumulative(const std::vector<LossReport>& records) {
  CumulativeLosses out;
  out.ce.reserve(records.size());
  out.fd_upper.reserve(records.size());
  double ce = 0.0, fd = 0.0;
  for (const auto& r : records) {
    ce += r.l_ce;
    fd += r.l_fd_upper;
    out.ce.push_back(ce);
    out.fd_upper.push_back(fd);
  }
  return out;
}

}  // namespace eelearn
