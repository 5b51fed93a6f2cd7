#include "eelearn/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "eelearn/economy_io.hpp"
#include "eelearn/rng.hpp"

namespace eelearn {

using nlohmann::json;

namespace {

constexpr std::uint64_t kEconomyStream = 0xEC0;
constexpr std::uint64_t kLearnerStream = 0x7E5;
constexpr std::uint64_t kFeedbackStream = 0xFEED;
constexpr std::uint64_t kCeSeedStream = 0xCE5EED;

// shortest round-trip decimal representation, deterministic across runs
std::string format_double(double v) {
  char buf[40];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) return "nan";
  return std::string(buf, ptr);
}

}  // namespace

Economy generate_economy(const GeneratorSpec& spec, std::uint64_t seed) {
  if (spec.n < 1 || spec.m < 1)
    throw std::invalid_argument("generator needs n >= 1 and m >= 1");
  std::mt19937_64 rng(derive_seed(seed, kEconomyStream));
  std::uniform_real_distribution<double> theta_draw(spec.theta_low, spec.theta_high);
  std::exponential_distribution<double> exp1(1.0);

  Matrix endow(spec.n, spec.m);
  for (int j = 0; j < spec.m; ++j) {
    double sum = 0.0;
    for (int i = 0; i < spec.n; ++i) {
      endow(i, j) = exp1(rng);
      sum += endow(i, j);
    }
    endow.col(j) /= sum;
  }

  ThetaBox box{spec.theta_min, spec.theta_max};
  std::vector<ParametricUtility> utilities;
  utilities.reserve(spec.n);
  for (int i = 0; i < spec.n; ++i) {
    Vector theta(spec.m);
    for (int j = 0; j < spec.m; ++j) theta[j] = theta_draw(rng);
    if (spec.family == "linear") {
      utilities.emplace_back(LinearFamily{}, std::move(theta), box);
    } else if (spec.family == "ces") {
      utilities.emplace_back(CesFamily{spec.rho}, std::move(theta), box);
    } else if (spec.family == "amdahl") {
      utilities.emplace_back(AmdahlFamily{Vector::Constant(spec.m, spec.f)}, std::move(theta),
                             box);
    } else {
      throw std::invalid_argument("unknown generator family: " + spec.family);
    }
  }
  return Economy::make(std::move(endow), std::move(utilities), spec.sigma);
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig c;
  const json& econ = j.at("economy");
  if (econ.contains("file")) {
    c.economy_file = econ.at("file").get<std::string>();
  } else if (econ.contains("generator")) {
    const json& g = econ.at("generator");
    GeneratorSpec s;
    s.family = g.value("family", s.family);
    s.n = g.value("n", s.n);
    s.m = g.value("m", s.m);
    s.rho = g.value("rho", s.rho);
    s.f = g.value("f", s.f);
    s.theta_low = g.value("theta_low", s.theta_low);
    s.theta_high = g.value("theta_high", s.theta_high);
    s.theta_min = g.value("theta_min", s.theta_min);
    s.theta_max = g.value("theta_max", s.theta_max);
    s.sigma = g.value("sigma", s.sigma);
    c.generator = s;
  } else {
    throw std::invalid_argument("economy must specify 'file' or 'generator'");
  }
  c.T = j.at("T").get<long>();
  const json& sch = j.at("schedule");
  const std::string kind = sch.at("kind").get<std::string>();
  if (kind == "finite_horizon") {
    c.schedule = DeltaSchedule::finite_horizon(c.T);
  } else if (kind == "anytime") {
    c.schedule = DeltaSchedule::anytime(sch.at("delta").get<double>());
  } else {
    throw std::invalid_argument("schedule kind must be 'finite_horizon' or 'anytime'");
  }
  c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  c.mc_budget = j.value("mc_budget", c.mc_budget);
  c.ce_solver = j.value("ce_solver", c.ce_solver);
  c.ce_iters = j.value("ce_iters", c.ce_iters);
  c.pe_exact_final = j.value("pe_exact_final", c.pe_exact_final);
  c.phi_floor = j.value("phi_floor", c.phi_floor);
  if (j.contains("force_alpha_zero_after") && !j.at("force_alpha_zero_after").is_null())
    c.force_alpha_zero_after = j.at("force_alpha_zero_after").get<long>();
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  json j;
  in >> j;
  return from_json(j);
}

json ExperimentConfig::to_json() const {
  json j;
  if (economy_file) {
    j["economy"] = {{"file", *economy_file}};
  } else if (generator) {
    const GeneratorSpec& g = *generator;
    j["economy"] = {{"generator",
                     {{"family", g.family},
                      {"n", g.n},
                      {"m", g.m},
                      {"rho", g.rho},
                      {"f", g.f},
                      {"theta_low", g.theta_low},
                      {"theta_high", g.theta_high},
                      {"theta_min", g.theta_min},
                      {"theta_max", g.theta_max},
                      {"sigma", g.sigma}}}};
  }
  j["T"] = T;
  if (schedule.kind == DeltaSchedule::Kind::FiniteHorizon) {
    j["schedule"] = {{"kind", "finite_horizon"}};
  } else {
    j["schedule"] = {{"kind", "anytime"}, {"delta", schedule.delta}};
  }
  j["seeds"] = seeds;
  j["mc_budget"] = mc_budget;
  j["ce_solver"] = ce_solver;
  j["ce_iters"] = ce_iters;
  j["pe_exact_final"] = pe_exact_final;
  j["phi_floor"] = phi_floor;
  if (force_alpha_zero_after) j["force_alpha_zero_after"] = *force_alpha_zero_after;
  return j;
}

void ExperimentConfig::validate() const {
  if (!economy_file && !generator)
    throw std::invalid_argument("config needs an economy file or generator");
  if (T < 1) throw std::invalid_argument("T must be positive");
  if (seeds.empty()) throw std::invalid_argument("seeds must be nonempty");
  std::set<std::uint64_t> uniq(seeds.begin(), seeds.end());
  if (uniq.size() != seeds.size()) throw std::invalid_argument("seeds must be distinct");
  if (mc_budget < 1) throw std::invalid_argument("mc_budget must be positive");
  if (ce_solver != "pr" && ce_solver != "tatonnement")
    throw std::invalid_argument("ce_solver must be 'pr' or 'tatonnement'");
  int n = 0, m = 0;
  if (generator) {
    n = generator->n;
    m = generator->m;
  } else {
    const Economy e = load_economy(*economy_file);
    n = e.n;
    m = e.m;
  }
  if (schedule.kind == DeltaSchedule::Kind::FiniteHorizon) {
    const long init = initialization_rounds(n, m);
    if (T <= init)
      throw std::invalid_argument(
          "finite-horizon schedule requires T > max(m^3, n m^2) = " + std::to_string(init));
  }
}

namespace {

RunResult run_one_seed(const ExperimentConfig& config, const Economy& econ,
                       std::uint64_t seed) {
  RunResult run;
  run.seed = seed;

  // reference equilibrium of the true economy, computed once
  MarketOutcome ref_outcome = solve_ce_proportional_response(econ.utilities, econ.endowments);
  CertifiedReference ref = certify_reference(econ, ref_outcome, 1e-2);
  if (!ref.certificate.is_equilibrium)
    throw std::runtime_error("true-utility reference failed equilibrium certification");

  std::vector<ParametricUtility> shapes;
  shapes.reserve(econ.n);
  for (const auto& u : econ.utilities)
    shapes.push_back(u.with_theta(u.theta_box().clamp(
        Vector::Constant(econ.m, 0.5 * (u.theta_box().lo + u.theta_box().hi)))));

  LearnerOptions lopt;
  lopt.schedule = config.schedule;
  lopt.ce_iters = config.ce_iters;
  lopt.ce_solver = config.ce_solver;
  lopt.phi_floor = config.phi_floor;
  lopt.force_alpha_zero_after = config.force_alpha_zero_after;
  OnlineLearner learner(shapes, econ.endowments, econ.noise_sigma, lopt);

  std::vector<Vector> true_thetas;
  true_thetas.reserve(econ.n);
  for (const auto& u : econ.utilities) true_thetas.push_back(u.theta());

  std::mt19937_64 learner_rng(derive_seed(seed, kLearnerStream));
  std::mt19937_64 feedback_rng(derive_seed(seed, kFeedbackStream));

  run.records.reserve(config.T);
  double cum_ce = 0.0, cum_fd = 0.0;
  MarketOutcome outcome;
  for (long t = 1; t <= config.T; ++t) {
    const bool init_phase = learner.in_initialization();
    outcome = learner.step_allocate(learner_rng);

    RoundRecord rec;
    rec.run_id = seed;
    rec.t = t;
    rec.phase = init_phase ? 0 : 1;
    rec.ce_warn = outcome.warning ? 1 : 0;

    if (!init_phase) {
      const ConfidenceConstants cc = compute_constants(
          econ.m, t, learner.delta_t(t), learner.delta_t(t), econ.noise_sigma,
          learner.c_mu(), learner.l_mu(), learner.phi_one_norm_sq());
      const auto events = record_events(learner, true_thetas, cc, outcome.allocation);
      bool all_a = true, all_b = true;
      double max_rho = 0.0;
      for (const auto& ev : events) {
        all_a = all_a && ev.a_holds;
        all_b = all_b && ev.b_holds;
        max_rho = std::max(max_rho, ev.rho_at_play);
        if (t >= 100) {
          ++run.event_rounds;
          run.a_hold_count += ev.a_holds ? 1 : 0;
          run.b_hold_count += ev.b_holds ? 1 : 0;
        }
      }
      rec.a_holds = all_a ? 1 : 0;
      rec.b_holds = all_b ? 1 : 0;
      rec.rho = max_rho;
      if (t == 500 || t == 1000 || t == 2000) {
        double err = 0.0;
        for (int i = 0; i < econ.n; ++i)
          err += (learner.agent(i).theta_bar - true_thetas[i]).norm();
        run.theta_error.emplace_back(t, err / econ.n);
      }
    }

    const CeLoss ce = loss_ce(econ, outcome, MonteCarloDemand{config.mc_budget},
                              derive_seed(seed, kCeSeedStream, static_cast<std::uint64_t>(t)));
    rec.l_ce = ce.value;
    rec.l_si = loss_si(econ, outcome.allocation);
    rec.l_pe_upper = loss_pe_upper(econ, outcome.allocation, ref);
    rec.l_fd_upper = std::max(rec.l_pe_upper, rec.l_si);
    cum_ce += rec.l_ce;
    cum_fd += rec.l_fd_upper;
    rec.cum_l_ce = cum_ce;
    rec.cum_l_fd_upper = cum_fd;
    run.records.push_back(rec);

    std::vector<double> feedback(econ.n);
    for (int i = 0; i < econ.n; ++i)
      feedback[i] = sample_feedback(econ, i, outcome.allocation.agent(i), feedback_rng);
    learner.step_observe(feedback);
  }

  if (config.pe_exact_final && econ.n * econ.m <= 6)
    run.pe_exact_final = loss_pe_exact_small(econ, outcome.allocation, 0.05).value;
  return run;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  ExperimentResult result;
  std::optional<Economy> shared;
  if (config.economy_file) shared = load_economy(*config.economy_file);
  result.runs.reserve(config.seeds.size());
  for (std::uint64_t seed : config.seeds) {
    const Economy econ = shared ? *shared : generate_economy(*config.generator, seed);
    result.runs.push_back(run_one_seed(config, econ, seed));
  }
  return result;
}

std::vector<RoundRecord> ExperimentResult::all_records() const {
  std::vector<RoundRecord> out;
  for (const auto& r : runs) out.insert(out.end(), r.records.begin(), r.records.end());
  return out;
}

double ExperimentResult::mean_cum_ce(long t) const {
  double sum = 0.0;
  for (const auto& r : runs) sum += r.records.at(static_cast<std::size_t>(t - 1)).cum_l_ce;
  return sum / static_cast<double>(runs.size());
}

void emit_csv(const std::vector<RoundRecord>& records, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write CSV file: " + path);
  out << kCsvHeader << "\n";
  for (const auto& r : records) {
    out << r.run_id << ',' << r.t << ',' << r.phase << ',' << format_double(r.l_ce) << ','
        << format_double(r.l_si) << ',' << format_double(r.l_pe_upper) << ','
        << format_double(r.l_fd_upper) << ',' << format_double(r.cum_l_ce) << ','
        << format_double(r.cum_l_fd_upper) << ',' << r.a_holds << ',' << r.b_holds << ','
        << format_double(r.rho) << ',' << r.ce_warn << "\n";
  }
  if (!out) throw std::runtime_error("write failed for CSV file: " + path);
}

std::vector<RoundRecord> parse_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open CSV file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty CSV file: " + path);
  if (line != kCsvHeader) throw std::runtime_error("unexpected CSV header in " + path);
  std::vector<RoundRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string tok;
    RoundRecord r;
    auto next = [&]() {
      if (!std::getline(ss, tok, ',')) throw std::runtime_error("short CSV row in " + path);
      return tok;
    };
    r.run_id = std::stoull(next());
    r.t = std::stol(next());
    r.phase = std::stoi(next());
    r.l_ce = std::stod(next());
    r.l_si = std::stod(next());
    r.l_pe_upper = std::stod(next());
    r.l_fd_upper = std::stod(next());
    r.cum_l_ce = std::stod(next());
    r.cum_l_fd_upper = std::stod(next());
    r.a_holds = std::stoi(next());
    r.b_holds = std::stoi(next());
    r.rho = std::stod(next());
    r.ce_warn = std::stoi(next());
    out.push_back(r);
  }
  return out;
}

void emit_summary(const ExperimentResult& result, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write summary file: " + path);
  out << "t,mean_cum_l_ce,stderr_cum_l_ce,n_runs\n";
  if (result.runs.empty()) return;
  const std::size_t T = result.runs.front().records.size();
  const double R = static_cast<double>(result.runs.size());
  for (std::size_t k = 0; k < T; ++k) {
    double mean = 0.0;
    for (const auto& r : result.runs) mean += r.records[k].cum_l_ce;
    mean /= R;
    double var = 0.0;
    for (const auto& r : result.runs) {
      const double d = r.records[k].cum_l_ce - mean;
      var += d * d;
    }
    const double stderr_v = result.runs.size() > 1 ? std::sqrt(var / (R - 1.0) / R) : 0.0;
    out << result.runs.front().records[k].t << ',' << format_double(mean) << ','
        << format_double(stderr_v) << ',' << result.runs.size() << "\n";
  }
  if (!out) throw std::runtime_error("write failed for summary file: " + path);
}

}  // namespace eelearn
