#include <cmath>
#include <limits>
#include <queue>
#include <sstream>

#include "json.hpp"
#include "vaopf/opf.hpp"

namespace vaopf {

CompatibilityReport check_compatible(const Eigen::VectorXd& f_bar, const ParticipationMatrix& A, const Grid& grid,
                                     const SusceptanceSystem& sys, const StochasticModel& stoch,
                                     const PatternK& pattern, double tol) {
  const int n = grid.num_buses();
  const int m = grid.num_lines();
  if (f_bar.size() != m) throw std::invalid_argument("flow vector has wrong size");
  CompatibilityReport rep;

  // theta by integrating along a spanning tree rooted at the slack
  std::vector<std::vector<int>> incident(n);
  for (int l = 0; l < m; ++l) {
    incident[grid.lines[l].from_bus].push_back(l);
    incident[grid.lines[l].to_bus].push_back(l);
  }
  rep.theta_bar = Eigen::VectorXd::Zero(n);
  std::vector<char> seen(n, 0), tree(m, 0);
  std::queue<int> todo;
  todo.push(grid.slack_bus);
  seen[grid.slack_bus] = 1;
  while (!todo.empty()) {
    const int k = todo.front();
    todo.pop();
    for (int l : incident[k]) {
      const auto& ln = grid.lines[l];
      const int other = ln.from_bus == k ? ln.to_bus : ln.from_bus;
      if (seen[other]) continue;
      seen[other] = 1;
      tree[l] = 1;
      const double drop = f_bar[l] / ln.susceptance();  // theta_from - theta_to
      rep.theta_bar[other] = other == ln.to_bus ? rep.theta_bar[k] - drop : rep.theta_bar[k] + drop;
      todo.push(other);
    }
  }
  for (int i = 0; i < n; ++i)
    if (!seen[i]) throw CycleInconsistentError("grid is disconnected; flows cannot define angles");
  double angle_scale = 1.0;
  for (int l = 0; l < m; ++l) angle_scale = std::max(angle_scale, std::abs(f_bar[l] / grid.lines[l].susceptance()));
  for (int l = 0; l < m; ++l) {
    if (tree[l]) continue;
    const auto& ln = grid.lines[l];
    const double gap = rep.theta_bar[ln.from_bus] - rep.theta_bar[ln.to_bus] - f_bar[l] / ln.susceptance();
    if (std::abs(gap) > 1e-7 * angle_scale) {
      std::ostringstream msg;
      msg << "flows are not cycle-consistent at line " << l << " (angle gap " << gap << ")";
      throw CycleInconsistentError(msg.str());
    }
  }

  const Eigen::VectorXd mu = stoch.mean_injection(n);
  rep.p_bar = sys.B() * rep.theta_bar;
  for (int i = 0; i < n; ++i) rep.p_bar[i] += grid.buses[i].load - mu[i];

  auto issue = [&rep](std::string code, int index, double margin) {
    rep.issues.push_back({std::move(code), index, margin});
  };
  const double load_scale = 1.0 + grid.total_load();
  for (int i = 0; i < n; ++i)
    if (grid.generator_at(i) < 0 && std::abs(rep.p_bar[i]) > tol * load_scale)
      issue("injection", i, -std::abs(rep.p_bar[i]));

  const ParticipationReport pr = validate_participation(A, pattern, std::max(tol, 1e-9));
  if (!pr.ok) issue("participation", -1, -1.0);

  const Eigen::VectorXd s2 = line_variances(sys, A, stoch.omega);
  rep.min_line_margin = std::numeric_limits<double>::infinity();
  for (int l = 0; l < m; ++l) {
    const auto& ln = grid.lines[l];
    const double margin = (ln.limit - std::abs(f_bar[l]) - ln.safety_param * std::sqrt(s2[l])) / (1.0 + ln.limit);
    if (margin < rep.min_line_margin) {
      rep.min_line_margin = margin;
      rep.tightest_line = l;
    }
    if (margin < -tol) issue("line_safety", l, margin);
  }
  for (std::size_t g = 0; g < grid.generators.size(); ++g) {
    const auto& gen = grid.generators[g];
    const double sd = std::sqrt(generation_stats(A.row_for_bus(gen.bus), stoch.omega, gen, 0.0).variance);
    const double p = rep.p_bar[gen.bus];
    const double lo = (p - gen.p_min - gen.safety_param * sd) / (1.0 + std::abs(gen.p_min));
    const double hi = (gen.p_max - gen.safety_param * sd - p) / (1.0 + std::abs(gen.p_max));
    if (std::min(lo, hi) < -tol) issue("generator_margin", static_cast<int>(g), std::min(lo, hi));
  }
  rep.compatible = rep.issues.empty();
  return rep;
}

namespace {

using ojson = nlohmann::ordered_json;

std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd from_vec(const ojson& j, std::size_t expected, const char* name) {
  const auto v = j.at(name).get<std::vector<double>>();
  if (v.size() != expected) throw ParseError(std::string("solution field ") + name + " has wrong length");
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<int>(v.size()));
}

}  // namespace

std::string solution_to_json(const DispatchSolution& sol, const Grid& grid) {
  ojson doc;
  doc["status"] = conic::to_string(sol.status);
  doc["expected_cost"] = sol.expected_cost;
  doc["p_bar"] = to_vec(sol.p_bar);
  doc["theta_bar"] = to_vec(sol.theta_bar);
  doc["f_bar"] = to_vec(sol.f_bar);
  doc["s2"] = to_vec(sol.s2);
  ojson a = ojson::array();
  if (sol.A)
    for (std::size_t r = 0; r < sol.A->participants.size(); ++r)
      for (std::size_t k = 0; k < sol.A->sources.size(); ++k)
        a.push_back(ojson::array({grid.buses[sol.A->participants[r]].label, grid.buses[sol.A->sources[k]].label,
                                  sol.A->alpha(static_cast<int>(r), static_cast<int>(k))}));
  doc["A"] = a;
  return doc.dump(2) + "\n";
}

DispatchSolution solution_from_json(const std::string& text, const Grid& grid, const StochasticModel& stoch) {
  try {
    const ojson doc = ojson::parse(text);
    DispatchSolution sol;
    const std::string status = doc.at("status").get<std::string>();
    sol.status = status == "optimal" ? conic::SolveStatus::kOptimal : conic::SolveStatus::kNumericFailure;
    sol.expected_cost = doc.at("expected_cost").get<double>();
    const std::size_t n = grid.buses.size(), m = grid.lines.size();
    sol.p_bar = from_vec(doc, n, "p_bar");
    sol.theta_bar = from_vec(doc, n, "theta_bar");
    sol.f_bar = from_vec(doc, m, "f_bar");
    sol.s2 = from_vec(doc, m, "s2");
    const auto& a = doc.at("A");
    if (!a.empty()) {
      ParticipationMatrix A = ParticipationMatrix::zeros(stoch);
      for (const auto& t : a) {
        const long pl = t.at(0).get<long>(), sl = t.at(1).get<long>();
        int r = -1, k = -1;
        for (int i = 0; i < stoch.num_participants(); ++i)
          if (grid.buses[stoch.participants[i]].label == pl) r = i;
        for (int i = 0; i < stoch.num_sources(); ++i)
          if (grid.buses[stoch.sources[i]].label == sl) k = i;
        if (r < 0 || k < 0) throw ParseError("participation triplet outside the R x S pattern");
        A.alpha(r, k) = t.at(2).get<double>();
      }
      sol.A = A;
    }
    return sol;
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(std::string("malformed solution file: ") + ex.what());
  }
}

}  // namespace vaopf
