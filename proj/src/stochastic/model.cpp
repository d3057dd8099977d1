#include <Eigen/Eigenvalues>
#include <cmath>
#include <fstream>
#include <map>
#include "json.hpp"
#include <set>
#include <sstream>

#include "vaopf/stochastic.hpp"

namespace vaopf {

using nlohmann::json;

int StochasticModel::source_index(int bus) const {
  for (int k = 0; k < num_sources(); ++k)
    if (sources[k] == bus) return k;
  return -1;
}

int StochasticModel::participant_index(int bus) const {
  for (int k = 0; k < num_participants(); ++k)
    if (participants[k] == bus) return k;
  return -1;
}

Eigen::VectorXd StochasticModel::mean_injection(int num_buses) const {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(num_buses);
  for (int k = 0; k < num_sources(); ++k) v[sources[k]] += mu[k];
  return v;
}

CovarianceCheck check_covariance(const Eigen::MatrixXd& omega) {
  CovarianceCheck c;
  if (omega.rows() != omega.cols()) {
    c.ok = false;
    c.message = "covariance is not square";
    return c;
  }
  if (omega.size() == 0) return c;
  const double norm = omega.cwiseAbs().maxCoeff();
  const double tol = 1e-10 * std::max(norm, 1e-300);
  if ((omega - omega.transpose()).cwiseAbs().maxCoeff() > tol) {
    c.ok = false;
    c.message = "covariance is not symmetric";
    return c;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(omega);
  c.min_eigenvalue = es.eigenvalues().minCoeff();
  if (c.min_eigenvalue < -tol) {
    c.ok = false;
    c.message = "covariance has eigenvalue " + std::to_string(c.min_eigenvalue);
  } else if (c.min_eigenvalue < 0.0) {
    c.clipped = true;
    c.message = "clipped small negative eigenvalue";
  }
  return c;
}

Eigen::MatrixXd covariance_factor(const Eigen::MatrixXd& omega) {
  const int s = static_cast<int>(omega.rows());
  if (s == 0) return Eigen::MatrixXd(0, 0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (omega + omega.transpose()));
  const Eigen::VectorXd& ev = es.eigenvalues();
  const double cutoff = 1e-12 * std::max(ev.cwiseAbs().maxCoeff(), 0.0);
  std::vector<int> keep;
  for (int k = 0; k < s; ++k)
    if (ev[k] > cutoff) keep.push_back(k);
  Eigen::MatrixXd L(s, static_cast<int>(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c)
    L.col(static_cast<int>(c)) = es.eigenvectors().col(keep[c]) * std::sqrt(ev[keep[c]]);
  return L;
}

void check_model(const StochasticModel& model, const Grid& grid) {
  const int n = grid.num_buses();
  const int s = model.num_sources();
  if (model.mu.size() != s) throw std::invalid_argument("mean vector size does not match the source count");
  if (model.omega.rows() != s || model.omega.cols() != s)
    throw std::invalid_argument("covariance size does not match the source count");
  std::set<int> seen;
  for (int b : model.sources) {
    if (b < 0 || b >= n) throw std::invalid_argument("source bus out of range");
    if (!seen.insert(b).second) throw std::invalid_argument("duplicate source bus");
  }
  seen.clear();
  for (int b : model.participants) {
    if (b < 0 || b >= n) throw std::invalid_argument("participant bus out of range");
    if (!seen.insert(b).second) throw std::invalid_argument("duplicate participant bus");
    if (grid.generator_at(b) < 0)
      throw std::invalid_argument("participant bus " + std::to_string(grid.buses[b].label) + " has no generator");
  }
  const CovarianceCheck c = check_covariance(model.omega);
  if (!c.ok) throw std::invalid_argument(c.message);
}

void apply_means(Grid& grid, const StochasticModel& model) {
  for (auto& b : grid.buses) b.stochastic_mean = 0.0;
  for (int k = 0; k < model.num_sources(); ++k) grid.buses[model.sources[k]].stochastic_mean = model.mu[k];
}

namespace {

int bus_by_label(const Grid& grid, long label) {
  for (const auto& b : grid.buses)
    if (b.label == label) return b.id;
  throw ParseError("stochastic model references unknown bus " + std::to_string(label));
}

}  // namespace

StochasticModel parse_stochastic_json(const std::string& text, const Grid& grid) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& ex) {
    throw ParseError(std::string("stochastic model is not valid JSON: ") + ex.what());
  }
  try {
    StochasticModel m;
    const auto& src = doc.at("sources");
    const int s = static_cast<int>(src.size());
    m.mu.resize(s);
    Eigen::VectorXd stdev(s);
    for (int k = 0; k < s; ++k) {
      m.sources.push_back(bus_by_label(grid, src[k].at("bus").get<long>()));
      m.mu[k] = src[k].value("mean", 0.0);
      stdev[k] = src[k].at("std").get<double>();
      if (stdev[k] < 0.0) throw ParseError("negative standard deviation");
    }
    Eigen::MatrixXd corr = Eigen::MatrixXd::Identity(s, s);
    if (doc.contains("correlation") && !(doc["correlation"].is_string() && doc["correlation"] == "identity")) {
      const auto& c = doc["correlation"];
      if (!c.is_array() || static_cast<int>(c.size()) != s) throw ParseError("correlation must be identity or an |S| x |S| matrix");
      for (int i = 0; i < s; ++i) {
        if (static_cast<int>(c[i].size()) != s) throw ParseError("correlation row has wrong length");
        for (int j = 0; j < s; ++j) corr(i, j) = c[i][j].get<double>();
      }
    }
    m.omega = stdev.asDiagonal() * corr * stdev.asDiagonal();
    if (doc.contains("participants"))
      for (const auto& p : doc["participants"]) m.participants.push_back(bus_by_label(grid, p.get<long>()));
    else
      for (const auto& g : grid.generators)
        if (g.participating) m.participants.push_back(g.bus);
    try {
      check_model(m, grid);
    } catch (const std::invalid_argument& ex) {
      throw ParseError(ex.what());
    }
    return m;
  } catch (const json::exception& ex) {
    throw ParseError(std::string("malformed stochastic model: ") + ex.what());
  }
}

StochasticModel load_stochastic(const std::string& path, const Grid& grid) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open stochastic model " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_stochastic_json(buf.str(), grid);
}

std::string stochastic_to_json(const StochasticModel& model, const Grid& grid) {
  const int s = model.num_sources();
  json doc;
  doc["sources"] = json::array();
  Eigen::VectorXd sd(s);
  for (int k = 0; k < s; ++k) {
    sd[k] = std::sqrt(std::max(model.omega(k, k), 0.0));
    doc["sources"].push_back({{"bus", grid.buses[model.sources[k]].label}, {"mean", model.mu[k]}, {"std", sd[k]}});
  }
  bool diagonal = true;
  for (int i = 0; i < s; ++i)
    for (int j = 0; j < s; ++j)
      if (i != j && model.omega(i, j) != 0.0) diagonal = false;
  if (diagonal) {
    doc["correlation"] = "identity";
  } else {
    json rows = json::array();
    for (int i = 0; i < s; ++i) {
      json row = json::array();
      for (int j = 0; j < s; ++j)
        row.push_back(i == j ? 1.0 : (sd[i] > 0 && sd[j] > 0 ? model.omega(i, j) / (sd[i] * sd[j]) : 0.0));
      rows.push_back(row);
    }
    doc["correlation"] = rows;
  }
  doc["participants"] = json::array();
  for (int b : model.participants) doc["participants"].push_back(grid.buses[b].label);
  return doc.dump(2) + "\n";
}

}  // namespace vaopf
