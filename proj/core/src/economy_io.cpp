#include "eelearn/economy_io.hpp"

#include <fstream>
#include <stdexcept>

namespace eelearn {

using nlohmann::json;

json vector_to_json(const Vector& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vector vector_from_json(const json& j) {
  if (!j.is_array()) throw std::invalid_argument("expected a JSON array of numbers");
  Vector v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<int>(i)] = j[i].get<double>();
  return v;
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) rows.push_back(vector_to_json(m.row(i).transpose()));
  return rows;
}

Matrix matrix_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw std::invalid_argument("expected a JSON array of rows");
  const auto cols = j[0].size();
  Matrix m(j.size(), cols);
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (j[i].size() != cols) throw std::invalid_argument("ragged matrix rows");
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<int>(i), static_cast<int>(c)) = j[i][c].get<double>();
  }
  return m;
}

namespace {

ParametricUtility agent_from_json(const json& a, int m) {
  const std::string family = a.at("family").get<std::string>();
  Vector theta = vector_from_json(a.at("theta"));
  if (theta.size() != m)
    throw std::invalid_argument("agent theta must have one entry per resource");
  ThetaBox box;
  box.lo = a.value("theta_min", box.lo);
  box.hi = a.value("theta_max", box.hi);
  if (family == "linear") {
    return ParametricUtility(LinearFamily{}, std::move(theta), box);
  }
  if (family == "ces") {
    return ParametricUtility(CesFamily{a.at("rho").get<double>()}, std::move(theta), box);
  }
  if (family == "amdahl") {
    const json& f = a.at("f");
    Vector fv = f.is_number() ? Vector::Constant(m, f.get<double>()) : vector_from_json(f);
    if (fv.size() != m)
      throw std::invalid_argument("amdahl f must be a scalar or have one entry per resource");
    return ParametricUtility(AmdahlFamily{std::move(fv)}, std::move(theta), box);
  }
  throw std::invalid_argument("unknown utility family: " + family);
}

json agent_to_json(const ParametricUtility& u) {
  json a;
  a["theta"] = vector_to_json(u.theta());
  a["theta_min"] = u.theta_box().lo;
  a["theta_max"] = u.theta_box().hi;
  if (std::holds_alternative<LinearFamily>(u.family())) {
    a["family"] = "linear";
  } else if (const auto* ces = std::get_if<CesFamily>(&u.family())) {
    a["family"] = "ces";
    a["rho"] = ces->rho;
  } else {
    a["family"] = "amdahl";
    a["f"] = vector_to_json(std::get<AmdahlFamily>(u.family()).parallel_fraction);
  }
  return a;
}

}  // namespace

Economy economy_from_json(const json& j) {
  const int n = j.at("n").get<int>();
  const int m = j.at("m").get<int>();
  Matrix endow = matrix_from_json(j.at("endowments"));
  if (endow.rows() != n || endow.cols() != m)
    throw std::invalid_argument("endowments shape does not match n x m");
  const json& agents = j.at("agents");
  if (static_cast<int>(agents.size()) != n)
    throw std::invalid_argument("agents array must have n entries");
  std::vector<ParametricUtility> utilities;
  utilities.reserve(n);
  for (const auto& a : agents) utilities.push_back(agent_from_json(a, m));
  return Economy::make(std::move(endow), std::move(utilities), j.value("sigma", 0.0));
}

json economy_to_json(const Economy& e) {
  json j;
  j["n"] = e.n;
  j["m"] = e.m;
  j["sigma"] = e.noise_sigma;
  j["endowments"] = matrix_to_json(e.endowments);
  json agents = json::array();
  for (const auto& u : e.utilities) agents.push_back(agent_to_json(u));
  j["agents"] = agents;
  return j;
}

Economy load_economy(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open economy file: " + path);
  json j;
  in >> j;
  return economy_from_json(j);
}

void save_economy(const Economy& e, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write economy file: " + path);
  out << economy_to_json(e).dump(2) << "\n";
}

}  // namespace eelearn
