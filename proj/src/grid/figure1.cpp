#include "vaopf/figure1.hpp"

namespace vaopf {

Figure1Case make_figure1_case(const Figure1Params& p) {
  if (p.k < 1) throw std::invalid_argument("k must be at least 1");
  if (p.D < 1) throw std::invalid_argument("D must be at least 1");
  if (!(p.mu < p.L)) throw std::invalid_argument("mu must be below L");
  if (!(p.c0 < p.c_mid && p.c_mid < p.c_top)) throw std::invalid_argument("costs must satisfy c0 < c_mid < c_top");
  if (!(p.sigma >= 0.0) || !(p.L > 0.0)) throw std::invalid_argument("L must be positive and sigma nonnegative");

  Figure1Case fc;
  Grid& g = fc.grid;
  const int top = p.k + 1;
  fc.bus_a = p.k + p.D + 2;
  fc.bus_b = p.k + p.D + 3;
  const int n = fc.bus_b + 1;
  for (int i = 0; i < n; ++i) g.buses.push_back({i, i + 1, 0.0, 0.0});
  g.buses[fc.bus_b].load = p.L;
  g.buses[fc.bus_b].stochastic_mean = p.mu;
  g.slack_bus = fc.bus_b;

  const bool limited = p.variant == Figure1Variant::kLimited;
  const double big = unlimited_line_limit(p.L);
  auto add_line = [&](int from, int to, double limit) {
    g.lines.push_back({from, to, 1.0, limited ? limit : big, p.nu});
    return g.num_lines() - 1;
  };
  fc.line_0a = add_line(0, fc.bus_a, 9.0 * p.L / 8.0);
  for (int i = 1; i <= p.k; ++i) fc.spur_lines.push_back(add_line(i, fc.bus_a, 2.0 * p.sigma));
  fc.line_ab = add_line(fc.bus_a, fc.bus_b, 9.0 * p.L / 8.0);
  int prev = top;
  for (int d = 0; d < p.D; ++d) {
    const int path_bus = top + 1 + d;
    fc.path_lines.push_back(add_line(prev, path_bus, 2.0 * p.sigma));
    prev = path_bus;
  }
  fc.path_lines.push_back(add_line(prev, fc.bus_b, 2.0 * p.sigma));

  const double cap = 2.0 * p.L;
  g.generators.push_back({0, 0.0, cap, 0.0, p.c0, 0.0, false, p.nu});
  for (int i = 1; i <= p.k; ++i) g.generators.push_back({i, 0.0, cap, p.c_quad, p.c_mid, 0.0, true, p.nu});
  g.generators.push_back({top, 0.0, cap, p.c_quad, p.c_top, 0.0, true, p.nu});

  fc.stoch.sources = {fc.bus_b};
  fc.stoch.mu = Eigen::VectorXd::Constant(1, p.mu);
  fc.stoch.omega = Eigen::MatrixXd::Constant(1, 1, p.sigma * p.sigma);
  for (int i = 1; i <= top; ++i) fc.stoch.participants.push_back(i);
  return fc;
}

Figure1Candidate figure1_candidate(const Figure1Case& fc, const Figure1Params& p) {
  Figure1Candidate c;
  c.p_bar = Eigen::VectorXd::Zero(fc.grid.num_buses());
  c.p_bar[0] = p.L - p.mu - p.nu * p.sigma;
  for (int i = 1; i <= p.k; ++i) c.p_bar[i] = p.nu * p.sigma / p.k;
  c.A = ParticipationMatrix::zeros(fc.stoch);
  for (int i = 0; i < p.k; ++i) c.A.alpha(i, 0) = 1.0 / p.k;
  return c;
}

}  // namespace vaopf
