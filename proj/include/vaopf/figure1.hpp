#pragma once

#include <vector>

#include "vaopf/grid.hpp"
#include "vaopf/stochastic.hpp"

namespace vaopf {

enum class Figure1Variant { kUnlimited, kLimited };

struct Figure1Params {
  int k = 10;
  int D = 10;
  double L = 800.0;
  double mu = 200.0;
  double sigma = 100.0;
  double c0 = 1.0;
  double c_mid = 2.0;
  double c_top = 3.0;
  /// Quadratic cost coefficient of the participating generators.
  double c_quad = 0.0;
  double nu = 3.0;
  Figure1Variant variant = Figure1Variant::kUnlimited;
};

/// Bus layout: 0 is the cheap non-participating unit, 1..k the mid-cost
/// units, k+1 the expensive unit, then D path buses, hub a and load bus b
/// (the slack). Lines: 0a, ia (i = 1..k), ab, then the path k+1 -> b.
struct Figure1Case {
  Grid grid;
  StochasticModel stoch;
  int bus_a = 0;
  int bus_b = 0;
  int line_0a = 0;
  int line_ab = 0;
  std::vector<int> spur_lines;  // ia for i = 1..k
  std::vector<int> path_lines;  // D + 1 lines from k+1 to b
};

Figure1Case make_figure1_case(const Figure1Params& params);

/// The candidate dispatch: p0 = L - mu - nu sigma, p_i = nu sigma / k,
/// alpha_i = 1/k for i = 1..k, nothing on k+1.
struct Figure1Candidate {
  Eigen::VectorXd p_bar;
  ParticipationMatrix A;
};

Figure1Candidate figure1_candidate(const Figure1Case& fc, const Figure1Params& params);

}  // namespace vaopf
