#include "vaopf/grid.hpp"

#include <cmath>
#include <numeric>
#include <queue>
#include <sstream>

namespace vaopf {

int Grid::generator_at(int bus) const {
  for (std::size_t g = 0; g < generators.size(); ++g)
    if (generators[g].bus == bus) return static_cast<int>(g);
  return -1;
}

std::vector<double> Grid::loads() const {
  std::vector<double> d(buses.size());
  for (std::size_t k = 0; k < buses.size(); ++k) d[k] = buses[k].load;
  return d;
}

double Grid::total_load() const {
  return std::accumulate(buses.begin(), buses.end(), 0.0, [](double acc, const Bus& b) { return acc + b.load; });
}

bool ValidationReport::has(const std::string& code) const {
  for (const auto& v : violations)
    if (v.code == code) return true;
  return false;
}

bool is_connected(const Grid& grid) {
  const int n = grid.num_buses();
  if (n == 0) return false;
  std::vector<std::vector<int>> adj(n);
  for (const auto& l : grid.lines) {
    if (l.from_bus < 0 || l.to_bus < 0 || l.from_bus >= n || l.to_bus >= n) continue;
    adj[l.from_bus].push_back(l.to_bus);
    adj[l.to_bus].push_back(l.from_bus);
  }
  std::vector<char> seen(n, 0);
  std::queue<int> todo;
  todo.push(0);
  seen[0] = 1;
  int count = 1;
  while (!todo.empty()) {
    const int k = todo.front();
    todo.pop();
    for (int j : adj[k])
      if (!seen[j]) {
        seen[j] = 1;
        ++count;
        todo.push(j);
      }
  }
  return count == n;
}

ValidationReport validate(const Grid& grid, std::optional<std::span<const double>> dispatch, double balance_tol) {
  ValidationReport rep;
  auto flag = [&rep](std::string code, std::string msg) { rep.violations.push_back({std::move(code), std::move(msg)}); };
  const int n = grid.num_buses();
  if (n == 0) flag("empty", "grid has no buses");
  for (int k = 0; k < n; ++k) {
    if (grid.buses[k].id != k) flag("bus_index", "bus " + std::to_string(k) + " carries id " + std::to_string(grid.buses[k].id));
    if (grid.buses[k].load < 0.0) flag("negative_load", "bus " + std::to_string(grid.buses[k].label) + " has negative load");
  }
  if (grid.slack_bus < 0 || grid.slack_bus >= n) flag("slack", "slack bus index out of range");
  for (std::size_t l = 0; l < grid.lines.size(); ++l) {
    const auto& ln = grid.lines[l];
    const std::string id = "line " + std::to_string(l);
    if (ln.from_bus < 0 || ln.from_bus >= n || ln.to_bus < 0 || ln.to_bus >= n)
      flag("unknown_bus", id + " references a missing bus");
    else if (ln.from_bus == ln.to_bus)
      flag("bad_line", id + " is a self-loop");
    if (!(ln.reactance > 0.0)) flag("bad_line", id + " has non-positive susceptance");
    if (!(ln.limit > 0.0)) flag("bad_line", id + " has non-positive limit");
    if (ln.safety_param < 0.0) flag("bad_line", id + " has negative safety parameter");
  }
  std::vector<int> gens_at(n > 0 ? n : 0, 0);
  for (std::size_t g = 0; g < grid.generators.size(); ++g) {
    const auto& gen = grid.generators[g];
    const std::string id = "generator " + std::to_string(g);
    if (gen.bus < 0 || gen.bus >= n) {
      flag("unknown_bus", id + " references a missing bus");
      continue;
    }
    if (++gens_at[gen.bus] == 2) flag("duplicate_generator", "more than one generator at bus " + std::to_string(gen.bus));
    if (gen.p_min > gen.p_max) flag("bad_generator", id + " has p_min > p_max");
    if (gen.cost_c0 < 0.0) flag("bad_generator", id + " has a non-convex cost");
    if (gen.safety_param < 0.0) flag("bad_generator", id + " has negative safety parameter");
  }
  if (n > 0 && !is_connected(grid)) flag("disconnected", "line graph is not connected");

  if (dispatch) {
    if (static_cast<int>(dispatch->size()) != n) {
      flag("dispatch_size", "dispatch has " + std::to_string(dispatch->size()) + " entries for " + std::to_string(n) + " buses");
    } else {
      double res = 0.0;
      for (int k = 0; k < n; ++k) res += (*dispatch)[k] - grid.buses[k].load + grid.buses[k].stochastic_mean;
      rep.balance_residual = res;
      if (std::abs(res) > balance_tol) {
        std::ostringstream msg;
        msg << "dispatch is unbalanced by " << res << " MW";
        flag("unbalanced", msg.str());
      }
    }
  }
  rep.ok = rep.violations.empty();
  return rep;
}

}  // namespace vaopf
