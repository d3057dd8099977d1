#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "vaopf/metric.hpp"

namespace vaopf {

// solver-level slack still counts as tight
constexpr double kTightTol = 1e-7;

namespace {

std::vector<int> top_n(const Eigen::VectorXd& key, int N) {
  std::vector<int> idx(key.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&key](int a, int b) { return key[a] > key[b]; });
  idx.resize(std::min<std::size_t>(idx.size(), static_cast<std::size_t>(std::max(N, 0))));
  return idx;
}

}  // namespace

MetricSpec parse_metric(const std::string& text) {
  MetricSpec spec;
  std::string head = text, rest;
  if (const auto colon = text.find(':'); colon != std::string::npos) {
    head = text.substr(0, colon);
    rest = text.substr(colon + 1);
  } else if (const auto comma = text.find(','); comma != std::string::npos) {
    head = text.substr(0, comma);
    rest = text.substr(comma + 1);
  }
  if (head == "I") spec.model = MetricModel::kSum;
  else if (head == "II.1") spec.model = MetricModel::kTopFlow;
  else if (head == "II.2") spec.model = MetricModel::kTopVariance;
  else if (head == "III") spec.model = MetricModel::kLogBarrier;
  else if (head == "composite") spec.model = MetricModel::kComposite;
  else throw std::invalid_argument("unknown metric model '" + head + "'");

  std::stringstream ss(rest);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("metric option '" + item + "' needs key=value");
    const std::string key = item.substr(0, eq), value = item.substr(eq + 1);
    if (key == "N") {
      spec.N = std::stoi(value);
      if (spec.N < 0) throw std::invalid_argument("N must be nonnegative");
    } else if (key == "weights") {
      if (value == "unit") spec.weights = WeightPreset::kUnit;
      else if (value == "inverse_limit_squared") spec.weights = WeightPreset::kInverseLimitSquared;
      else throw std::invalid_argument("unknown weight preset '" + value + "'");
    } else if (key == "tau") {
      spec.tau = std::stod(value);
    } else {
      throw std::invalid_argument("unknown metric option '" + key + "'");
    }
  }
  return spec;
}

std::string to_string(const MetricSpec& spec) {
  std::ostringstream out;
  switch (spec.model) {
    case MetricModel::kSum: out << "I"; break;
    case MetricModel::kTopFlow: out << "II.1:N=" << spec.N; break;
    case MetricModel::kTopVariance: out << "II.2:N=" << spec.N; break;
    case MetricModel::kLogBarrier: out << "III"; break;
    case MetricModel::kComposite: out << "composite:N=" << spec.N; break;
  }
  const char sep = spec.model == MetricModel::kSum || spec.model == MetricModel::kLogBarrier ? ':' : ',';
  if (spec.weights == WeightPreset::kInverseLimitSquared) out << sep << "weights=inverse_limit_squared";
  return out.str();
}

bool shift_supported(const MetricSpec& spec) {
  return spec.model == MetricModel::kSum || spec.model == MetricModel::kTopFlow || spec.model == MetricModel::kComposite;
}

std::vector<double> metric_weights(const MetricSpec& spec, const Grid& grid) {
  const int m = grid.num_lines();
  switch (spec.weights) {
    case WeightPreset::kUnit: return std::vector<double>(m, 1.0);
    case WeightPreset::kInverseLimitSquared: {
      std::vector<double> w(m);
      for (int l = 0; l < m; ++l) w[l] = 1.0 / (grid.lines[l].limit * grid.lines[l].limit);
      return w;
    }
    case WeightPreset::kCustom:
      if (static_cast<int>(spec.psi.size()) != m) throw std::invalid_argument("custom weights need one entry per line");
      return spec.psi;
  }
  return {};
}

std::vector<int> tight_lines(const Grid& grid, const Eigen::VectorXd& f_bar, const Eigen::VectorXd& s2, double tau) {
  std::vector<int> out;
  for (int l = 0; l < grid.num_lines(); ++l) {
    const auto& ln = grid.lines[l];
    const double used = std::abs(f_bar[l]) + ln.safety_param * std::sqrt(std::max(s2[l], 0.0));
    if (used > 0.0 && used >= (1.0 - tau - kTightTol) * ln.limit)
      out.push_back(l);
  }
  return out;
}

std::vector<int> select_F(const MetricSpec& spec, const Grid& grid, const Eigen::VectorXd& f_bar, const Eigen::VectorXd& s2) {
  const int m = grid.num_lines();
  switch (spec.model) {
    case MetricModel::kSum:
    case MetricModel::kLogBarrier: {
      std::vector<int> all(m);
      std::iota(all.begin(), all.end(), 0);
      return all;
    }
    case MetricModel::kTopFlow: return top_n(f_bar.cwiseAbs(), spec.N);
    case MetricModel::kTopVariance: return top_n(s2, spec.N);
    case MetricModel::kComposite: {
      std::vector<int> F = top_n(f_bar.cwiseAbs(), spec.N);
      std::set<int> have(F.begin(), F.end());
      for (int l : tight_lines(grid, f_bar, s2, spec.tau))
        if (have.insert(l).second) F.push_back(l);
      return F;
    }
  }
  return {};
}

double metric_eval(const MetricSpec& spec, const Grid& grid, const Eigen::VectorXd& f_bar, const Eigen::VectorXd& s2,
                   const Eigen::VectorXd* floor) {
  const std::vector<int> F = select_F(spec, grid, f_bar, s2);
  if (spec.model == MetricModel::kLogBarrier) {
    if (!floor) return std::numeric_limits<double>::infinity();
    double total = 0.0;
    for (int l : F) {
      const double gap = s2[l] - (*floor)[l];
      if (!(gap > 0.0)) return std::numeric_limits<double>::infinity();
      const double rho = spec.rho.empty() ? 1.0 : spec.rho.at(l);
      total -= rho * std::log(gap);
    }
    return total;
  }
  const std::vector<double> psi = metric_weights(spec, grid);
  double total = 0.0;
  for (int l : F) total += psi[l] * s2[l];
  return total;
}

}  // namespace vaopf
