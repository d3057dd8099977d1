#include <cmath>
#include <set>

#include "common.hpp"

namespace vaopf {

using conic::LinearExpr;
using conic::Sense;

double expected_cost(const Grid& grid, const StochasticModel& stoch, const Eigen::VectorXd& p_bar,
                     const ParticipationMatrix* A) {
  double total = 0.0;
  for (const auto& gen : grid.generators) {
    const Eigen::VectorXd row = A ? A->row_for_bus(gen.bus) : Eigen::VectorXd::Zero(stoch.num_sources());
    total += generation_stats(row, stoch.omega, gen, p_bar[gen.bus]).expected_cost;
  }
  return total;
}

DispatchSolution solve_dcopf(const Grid& grid, const SusceptanceSystem& sys, const StochasticModel* stoch,
                             const conic::SolveOptions& options) {
  conic::ConicProgram prog;
  const Eigen::VectorXd mu = stoch ? stoch->mean_injection(grid.num_buses()) : Eigen::VectorXd::Zero(grid.num_buses());
  const auto v = detail::add_network(prog, grid, sys, mu);
  for (std::size_t g = 0; g < grid.generators.size(); ++g)
    prog.set_bounds(v.p[static_cast<int>(g)], grid.generators[g].p_min, grid.generators[g].p_max);
  for (int l = 0; l < grid.num_lines(); ++l) {
    prog.add_linear(LinearExpr::var(v.f[l]), Sense::kLessEqual, grid.lines[l].limit, "limit");
    prog.add_linear(LinearExpr::var(v.f[l]), Sense::kGreaterEqual, -grid.lines[l].limit, "limit");
  }
  detail::add_generation_cost(prog, grid, v.p);
  const conic::SolveResult r = conic::solve(prog, options);
  DispatchSolution sol;
  detail::copy_diagnostics(r, sol);
  if (r.optimal()) {
    detail::read_network(r.values, v, grid, sol);
    sol.expected_cost = r.objective;
  }
  return sol;
}

SafetyProgram build_safety_opf(const Grid& grid, const SusceptanceSystem& sys, const StochasticModel& stoch,
                               const PatternK& pattern) {
  check_model(stoch, grid);
  SafetyProgram sp;
  sp.n = grid.num_buses();
  sp.m = grid.num_lines();
  sp.R = stoch.num_participants();
  sp.S = stoch.num_sources();
  auto& prog = sp.program;
  const auto net = detail::add_network(prog, grid, sys, stoch.mean_injection(sp.n));
  sp.p = net.p;
  sp.theta = net.theta;
  sp.f = net.f;
  sp.s = prog.add_variables("s", sp.m, 0.0);
  const Eigen::MatrixXd L = covariance_factor(stoch.omega);
  const auto pv = detail::add_participation(prog, grid, sys, stoch, pattern, sp.s, L);
  sp.alpha = pv.alpha;
  sp.D = pv.D;
  sp.gamma = pv.gamma;
  sp.sigma = prog.add_variables("sigma", sp.R, 0.0);

  for (int l = 0; l < sp.m; ++l) {
    const auto& ln = grid.lines[l];
    prog.add_linear(LinearExpr::var(sp.f[l]) + LinearExpr::var(sp.s[l], ln.safety_param), Sense::kLessEqual, ln.limit,
                    "safety");
    prog.add_linear(LinearExpr::var(sp.f[l], -1.0) + LinearExpr::var(sp.s[l], ln.safety_param), Sense::kLessEqual,
                    ln.limit, "safety");
  }

  const int rank = static_cast<int>(L.cols());
  for (std::size_t g = 0; g < grid.generators.size(); ++g) {
    const auto& gen = grid.generators[g];
    const int pg = sp.p[static_cast<int>(g)];
    const int r = stoch.participant_index(gen.bus);
    if (r < 0) {
      prog.set_bounds(pg, gen.p_min, gen.p_max);
      continue;
    }
    std::vector<LinearExpr> y(rank);
    for (int q = 0; q < rank; ++q)
      for (int k = 0; k < sp.S; ++k) y[q].add(sp.alpha[r * sp.S + k], L(k, q));
    prog.add_soc(LinearExpr::var(sp.sigma[r]), std::move(y), "gen_cone");
    prog.add_linear(LinearExpr::var(pg) - LinearExpr::var(sp.sigma[r], gen.safety_param), Sense::kGreaterEqual,
                    gen.p_min, "gen_margin");
    prog.add_linear(LinearExpr::var(pg) + LinearExpr::var(sp.sigma[r], gen.safety_param), Sense::kLessEqual, gen.p_max,
                    "gen_margin");
  }

  detail::add_generation_cost(prog, grid, sp.p);
  for (int r = 0; r < sp.R; ++r) {
    const double c0 = grid.generators[grid.generator_at(stoch.participants[r])].cost_c0;
    if (c0 == 0.0) continue;
    for (int j = 0; j < sp.S; ++j)
      for (int k = 0; k < sp.S; ++k)
        if (stoch.omega(j, k) != 0.0) prog.add_quadratic(sp.alpha[r * sp.S + j], sp.alpha[r * sp.S + k], c0 * stoch.omega(j, k));
  }
  return sp;
}

DispatchSolution solve_safety_program(const SafetyProgram& sp, const Grid& grid, const SusceptanceSystem& sys,
                                      const StochasticModel& stoch, const OpfOptions& options) {
  const conic::SolveResult r = detail::run_solver(sp.program, options);
  DispatchSolution sol;
  detail::copy_diagnostics(r, sol);
  if (r.optimal()) {
    detail::read_network(r.values, {sp.p, sp.theta, sp.f}, grid, sol);
    sol.A = detail::read_alpha(r.values, sp.alpha, stoch);
    sol.s2 = line_variances(sys, *sol.A, stoch.omega);
    sol.expected_cost = expected_cost(grid, stoch, sol.p_bar, &*sol.A);
  }
  return sol;
}

DispatchSolution solve_safety_opf(const Grid& grid, const SusceptanceSystem& sys, const StochasticModel& stoch,
                                  const OpfOptions& options) {
  return solve_safety_program(build_safety_opf(grid, sys, stoch, options.pattern), grid, sys, stoch, options);
}

FormulationStats formulation_stats(const SafetyProgram& sp) {
  FormulationStats st;
  st.n_A_vars = sp.alpha.size;
  st.n_D_vars = sp.D.size;
  st.n_gamma_vars = sp.gamma.size;
  st.n_other_vars = sp.program.num_variables() - st.n_A_vars - st.n_D_vars - st.n_gamma_vars;
  auto in = [](const conic::VarBlock& b, int v) { return v >= b.offset && v < b.offset + b.size; };
  for (const auto& row : sp.program.linear_constraints())
    if (row.group == "D_def") st.nnz_D_rows_built += static_cast<long>(row.expr.terms().size());
  // dense D = B-breve A: every D entry of a column depends on every alpha of it,
  // including a participant at the slack whose B-breve column is zero
  const long d_per_source = sp.S > 0 ? sp.D.size / sp.S : 0;
  const long a_per_source = sp.S > 0 ? sp.alpha.size / sp.S : 0;
  st.nnz_D_constraints = d_per_source * a_per_source * sp.S;
  for (const auto& cone : sp.program.soc_constraints()) {
    if (cone.group != "line_cone") continue;
    std::set<int> g;
    for (const auto& y : cone.y)
      for (const auto& t : y.terms())
        if (in(sp.gamma, t.var)) g.insert(t.var);
    st.nnz_conic_constraints += static_cast<long>(g.size());
  }
  return st;
}

RerouteProgram build_reroute(const Grid& grid, const SusceptanceSystem& sys, const StochasticModel& stoch,
                             const ParticipationMatrix& A_hat, double tau) {
  RerouteProgram rp;
  auto& prog = rp.program;
  const auto net = detail::add_network(prog, grid, sys, stoch.mean_injection(grid.num_buses()));
  rp.p = net.p;
  rp.theta = net.theta;
  rp.f = net.f;
  const Eigen::VectorXd s2 = line_variances(sys, A_hat, stoch.omega);
  for (int l = 0; l < grid.num_lines(); ++l) {
    const auto& ln = grid.lines[l];
    const double rhs = (1.0 - tau) * ln.limit - ln.safety_param * std::sqrt(s2[l]);
    prog.add_linear(LinearExpr::var(rp.f[l]), Sense::kLessEqual, rhs, "safety");
    prog.add_linear(LinearExpr::var(rp.f[l]), Sense::kGreaterEqual, -rhs, "safety");
  }
  for (std::size_t g = 0; g < grid.generators.size(); ++g) {
    const auto& gen = grid.generators[g];
    const Eigen::VectorXd row = A_hat.row_for_bus(gen.bus);
    const GenerationStats st = generation_stats(row, stoch.omega, gen, 0.0);
    const double margin = gen.safety_param * std::sqrt(st.variance);
    const int pg = rp.p[static_cast<int>(g)];
    prog.add_linear(LinearExpr::var(pg), Sense::kGreaterEqual, gen.p_min + margin, "gen_margin");
    prog.add_linear(LinearExpr::var(pg), Sense::kLessEqual, gen.p_max - margin, "gen_margin");
    prog.add_objective_constant(gen.cost_c0 * st.variance);
  }
  detail::add_generation_cost(prog, grid, rp.p);
  return rp;
}

DispatchSolution solve_reroute(const Grid& grid, const SusceptanceSystem& sys, const StochasticModel& stoch,
                               const ParticipationMatrix& A_hat, double tau, const OpfOptions& options) {
  const RerouteProgram rp = build_reroute(grid, sys, stoch, A_hat, tau);
  OpfOptions direct = options;
  direct.cutting_plane = false;  // no cones here
  const conic::SolveResult r = detail::run_solver(rp.program, direct);
  DispatchSolution sol;
  detail::copy_diagnostics(r, sol);
  if (r.optimal()) {
    detail::read_network(r.values, {rp.p, rp.theta, rp.f}, grid, sol);
    sol.A = A_hat;
    sol.s2 = line_variances(sys, A_hat, stoch.omega);
    sol.expected_cost = expected_cost(grid, stoch, sol.p_bar, &A_hat);
  }
  return sol;
}

std::vector<int> tight_set(const Eigen::VectorXd& f_bar, const ParticipationMatrix& A, const Grid& grid,
                           const SusceptanceSystem& sys, const StochasticModel& stoch, double tau) {
  return tight_lines(grid, f_bar, line_variances(sys, A, stoch.omega), tau);
}

VShiftProgram build_vshift(const Grid& grid, const SusceptanceSystem& sys, const StochasticModel& stoch,
                           const Eigen::VectorXd& f_prime, const ParticipationMatrix& A_prime, double tau,
                           const MetricSpec& metric, const VShiftOptions& vopts) {
  if (!shift_supported(metric)) throw std::invalid_argument("metric model " + to_string(metric) + " cannot drive VShift");
  VShiftProgram vp;
  vp.S = stoch.num_sources();
  auto& prog = vp.program;
  const int m = grid.num_lines();
  const Eigen::VectorXd s2_prime = line_variances(sys, A_prime, stoch.omega);
  vp.T = vopts.tight_override ? *vopts.tight_override : tight_lines(grid, f_prime, s2_prime, tau);
  vp.F = select_F(metric, grid, f_prime, s2_prime);

  vp.s = prog.add_variables("s", m, 0.0);
  for (const auto& [line, cap] : vopts.variance_caps) prog.set_bounds(vp.s[line], 0.0, std::sqrt(cap));
  const Eigen::MatrixXd L = covariance_factor(stoch.omega);
  const auto pv = detail::add_participation(prog, grid, sys, stoch, vopts.pattern, vp.s, L);
  vp.alpha = pv.alpha;
  vp.D = pv.D;
  vp.gamma = pv.gamma;

  for (int l : vp.T) {
    const auto& ln = grid.lines[l];
    prog.add_linear(LinearExpr::var(vp.s[l], ln.safety_param), Sense::kLessEqual, ln.limit - std::abs(f_prime[l]),
                    "safety");
  }
  if (vopts.generator_dispatch) {
    const Eigen::VectorXd& p = *vopts.generator_dispatch;
    for (int r = 0; r < stoch.num_participants(); ++r) {
      const auto& gen = grid.generators[grid.generator_at(stoch.participants[r])];
      if (gen.safety_param <= 0.0) continue;
      const double slack = std::min(p[gen.bus] - gen.p_min, gen.p_max - p[gen.bus]);
      const double cap = std::max(slack, 0.0) / gen.safety_param;
      if (cap <= 1e-9 * (1.0 + std::abs(gen.p_max))) {
        for (int k = 0; k < vp.S; ++k)
          prog.add_linear(LinearExpr::var(vp.alpha[r * vp.S + k]), Sense::kEqual, A_prime.alpha(r, k), "gen_fixed");
        continue;
      }
      const int sigma = prog.add_variables("gen_sigma", 1, 0.0, cap)[0];
      std::vector<LinearExpr> y(L.cols());
      for (int q = 0; q < L.cols(); ++q)
        for (int k = 0; k < vp.S; ++k) y[q].add(vp.alpha[r * vp.S + k], L(k, q));
      prog.add_soc(LinearExpr::var(sigma), std::move(y), "gen_cone");
    }
  }
  const std::vector<double> psi = metric_weights(metric, grid);
  for (int l : vp.F)
    if (psi[l] != 0.0) prog.add_quadratic(vp.s[l], vp.s[l], psi[l]);
  return vp;
}

VShiftResult solve_vshift(const Grid& grid, const SusceptanceSystem& sys, const StochasticModel& stoch,
                          const Eigen::VectorXd& f_prime, const ParticipationMatrix& A_prime, double tau,
                          const MetricSpec& metric, const VShiftOptions& vopts, const OpfOptions& options) {
  const VShiftProgram vp = build_vshift(grid, sys, stoch, f_prime, A_prime, tau, metric, vopts);
  const conic::SolveResult r = detail::run_solver(vp.program, options);
  VShiftResult out;
  out.status = r.status;
  out.message = r.message;
  out.F = vp.F;
  out.T = vp.T;
  if (r.optimal()) {
    out.A_hat = detail::read_alpha(r.values, vp.alpha, stoch);
    out.s2_hat = line_variances(sys, out.A_hat, stoch.omega);
    out.objective = r.objective;
  }
  return out;
}

}  // namespace vaopf
