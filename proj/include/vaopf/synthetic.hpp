#pragma once

#include <cstdint>

#include "vaopf/opf.hpp"

namespace vaopf {

struct SyntheticOptions {
  std::uint64_t seed = 1;
  int sources = 22;
  /// Sum of source means as a fraction of total load.
  double penetration = 0.185;
  /// Standard deviation over mean at every source.
  double cv = 0.3;
  /// Per-line limit = U(scale_lo, scale_hi) * (|f| + nu s) of the
  /// unlimited safety-OPF solution, at least floor_fraction * max |f|.
  double scale_lo = 1.05;
  double scale_hi = 2.5;
  double floor_fraction = 0.05;
};

/// Seeded sources on distinct load buses, independent fluctuations,
/// participants = participating generators.
StochasticModel synthetic_sources(const Grid& grid, const SyntheticOptions& options);

/// Replaces every line limit using the unlimited safety-OPF solution.
/// Returns that solution; throws std::runtime_error if it fails.
DispatchSolution synthetic_limits(Grid& grid, const StochasticModel& stoch, const SyntheticOptions& options,
                                  const OpfOptions& opf = {});

}  // namespace vaopf
