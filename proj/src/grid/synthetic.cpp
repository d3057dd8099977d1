#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "vaopf/synthetic.hpp"

namespace vaopf {

StochasticModel synthetic_sources(const Grid& grid, const SyntheticOptions& options) {
  std::vector<int> candidates;
  for (int i = 0; i < grid.num_buses(); ++i)
    if (grid.buses[i].load > 0.0) candidates.push_back(i);
  if (options.sources <= 0 || options.sources > static_cast<int>(candidates.size()))
    throw std::invalid_argument("not enough load buses for the requested source count");
  std::mt19937_64 rng(options.seed);
  std::shuffle(candidates.begin(), candidates.end(), rng);
  candidates.resize(options.sources);
  std::sort(candidates.begin(), candidates.end());

  std::uniform_real_distribution<double> spread(0.5, 1.5);
  Eigen::VectorXd w(options.sources);
  for (int k = 0; k < options.sources; ++k) w[k] = spread(rng);
  const double total = options.penetration * grid.total_load();

  StochasticModel model;
  model.sources = candidates;
  model.mu = w * (total / w.sum());
  model.omega = (options.cv * model.mu).cwiseAbs2().asDiagonal();
  for (const auto& gen : grid.generators)
    if (gen.participating) model.participants.push_back(gen.bus);
  std::sort(model.participants.begin(), model.participants.end());
  return model;
}

DispatchSolution synthetic_limits(Grid& grid, const StochasticModel& stoch, const SyntheticOptions& options,
                                  const OpfOptions& opf) {
  const double open = unlimited_line_limit(grid.total_load());
  for (auto& ln : grid.lines) ln.limit = open;
  const SusceptanceSystem sys(grid);
  DispatchSolution sol = solve_safety_opf(grid, sys, stoch, opf);
  if (!sol.optimal()) throw std::runtime_error("unlimited safety OPF failed: " + sol.message);

  std::mt19937_64 rng(options.seed ^ 0x5bd1e995ULL);
  std::uniform_real_distribution<double> scale(options.scale_lo, options.scale_hi);
  const double floor = options.floor_fraction * sol.f_bar.cwiseAbs().maxCoeff();
  for (int l = 0; l < grid.num_lines(); ++l) {
    auto& ln = grid.lines[l];
    const double need = std::abs(sol.f_bar[l]) + ln.safety_param * std::sqrt(sol.s2[l]);
    ln.limit = std::max(scale(rng) * need, floor);
  }
  return sol;
}

}  // namespace vaopf
