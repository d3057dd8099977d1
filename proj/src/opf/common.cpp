#include "common.hpp"

namespace vaopf::detail {

using conic::LinearExpr;
using conic::Sense;

NetworkVars add_network(conic::ConicProgram& prog, const Grid& grid, const SusceptanceSystem& sys,
                        const Eigen::VectorXd& mean_injection) {
  const int n = grid.num_buses();
  const int m = grid.num_lines();
  NetworkVars v;
  v.p = prog.add_variables("p", static_cast<int>(grid.generators.size()));
  v.theta = prog.add_variables("theta", n);
  prog.set_bounds(v.theta[grid.slack_bus], 0.0, 0.0);
  v.f = prog.add_variables("f", m);

  std::vector<LinearExpr> rows(n);
  const auto& B = sys.B();
  for (int c = 0; c < B.outerSize(); ++c)
    for (Eigen::SparseMatrix<double>::InnerIterator it(B, c); it; ++it)
      rows[it.row()].add(v.theta[static_cast<int>(it.col())], it.value());
  for (std::size_t g = 0; g < grid.generators.size(); ++g)
    rows[grid.generators[g].bus].add(v.p[static_cast<int>(g)], -1.0);
  for (int i = 0; i < n; ++i)
    prog.add_linear(rows[i].compacted(), Sense::kEqual, mean_injection[i] - grid.buses[i].load, "balance");

  for (int l = 0; l < m; ++l) {
    const auto& ln = grid.lines[l];
    LinearExpr e = LinearExpr::var(v.f[l]);
    e.add(v.theta[ln.from_bus], -ln.susceptance());
    e.add(v.theta[ln.to_bus], ln.susceptance());
    prog.add_linear(e, Sense::kEqual, 0.0, "flow");
  }
  return v;
}

void add_generation_cost(conic::ConicProgram& prog, const Grid& grid, const conic::VarBlock& p) {
  for (std::size_t g = 0; g < grid.generators.size(); ++g) {
    const auto& gen = grid.generators[g];
    const int var = p[static_cast<int>(g)];
    if (gen.cost_c0 != 0.0) prog.add_quadratic(var, var, gen.cost_c0);
    prog.add_linear_objective(var, gen.cost_c1);
    prog.add_objective_constant(gen.cost_c2);
  }
}

ParticipationVars add_participation(conic::ConicProgram& prog, const Grid& grid, const SusceptanceSystem& sys,
                                    const StochasticModel& stoch, const PatternK& pattern, const conic::VarBlock& s,
                                    const Eigen::MatrixXd& L) {
  const int n = grid.num_buses();
  const int m = grid.num_lines();
  const int R = stoch.num_participants();
  const int S = stoch.num_sources();
  ParticipationVars v;
  double lo = -conic::kInf, hi = conic::kInf;
  if (pattern.nonnegative) lo = 0.0;
  if (pattern.lower) lo = std::max(lo, *pattern.lower);
  if (pattern.upper) hi = *pattern.upper;
  v.alpha = prog.add_variables("alpha", R * S, lo, hi);
  v.D = prog.add_variables("D", n * S);
  v.gamma = prog.add_variables("gamma", m * S);
  auto alpha = [&](int r, int k) { return v.alpha[r * S + k]; };
  auto D = [&](int i, int k) { return v.D[k * n + i]; };
  auto gamma = [&](int l, int k) { return v.gamma[l * S + k]; };

  // B-hat D_k = A_k on the non-slack rows, D_slack,k = 0.
  const auto& B = sys.B();
  const int slack = grid.slack_bus;
  for (int k = 0; k < S; ++k) {
    std::vector<LinearExpr> rows(n);
    for (int c = 0; c < B.outerSize(); ++c)
      for (Eigen::SparseMatrix<double>::InnerIterator it(B, c); it; ++it)
        if (it.row() != slack && it.col() != slack) rows[it.row()].add(D(static_cast<int>(it.col()), k), it.value());
    for (int r = 0; r < R; ++r)
      if (stoch.participants[r] != slack) rows[stoch.participants[r]].add(alpha(r, k), -1.0);
    for (int i = 0; i < n; ++i) {
      if (i == slack) prog.add_linear(LinearExpr::var(D(i, k)), Sense::kEqual, 0.0, "D_def");
      else prog.add_linear(rows[i].compacted(), Sense::kEqual, 0.0, "D_def");
    }
  }

  for (int k = 0; k < S; ++k) {
    const Eigen::VectorXd breve_src = sys.breve_row(stoch.sources[k]);
    for (int l = 0; l < m; ++l) {
      const auto& ln = grid.lines[l];
      LinearExpr e = LinearExpr::var(gamma(l, k));
      e.add(D(ln.from_bus, k), 1.0);
      e.add(D(ln.to_bus, k), -1.0);
      prog.add_linear(e, Sense::kEqual, breve_src[ln.from_bus] - breve_src[ln.to_bus], "gamma_def");
    }
  }

  for (int k = 0; k < S; ++k) {
    LinearExpr e;
    for (int r = 0; r < R; ++r) e.add(alpha(r, k), 1.0);
    prog.add_linear(e, Sense::kEqual, 1.0, "balancing");
  }
  if (pattern.policy == ParticipationPolicy::kGlobal)
    for (int r = 0; r < R; ++r)
      for (int k = 1; k < S; ++k)
        prog.add_linear(LinearExpr::var(alpha(r, k)) - LinearExpr::var(alpha(r, 0)), Sense::kEqual, 0.0, "global");

  const int rank = static_cast<int>(L.cols());
  for (int l = 0; l < m; ++l) {
    const double b = grid.lines[l].susceptance();
    std::vector<LinearExpr> y(rank);
    for (int q = 0; q < rank; ++q)
      for (int k = 0; k < S; ++k) y[q].add(gamma(l, k), b * L(k, q));
    prog.add_soc(LinearExpr::var(s[l]), std::move(y), "line_cone");
  }
  return v;
}

ParticipationMatrix read_alpha(const std::vector<double>& x, const conic::VarBlock& alpha, const StochasticModel& stoch) {
  ParticipationMatrix A = ParticipationMatrix::zeros(stoch);
  const int S = stoch.num_sources();
  for (int r = 0; r < stoch.num_participants(); ++r)
    for (int k = 0; k < S; ++k) A.alpha(r, k) = x[alpha[r * S + k]];
  return A;
}

void read_network(const std::vector<double>& x, const NetworkVars& v, const Grid& grid, DispatchSolution& sol) {
  const int n = grid.num_buses();
  const int m = grid.num_lines();
  sol.p_bar = Eigen::VectorXd::Zero(n);
  for (std::size_t g = 0; g < grid.generators.size(); ++g)
    sol.p_bar[grid.generators[g].bus] = x[v.p[static_cast<int>(g)]];
  sol.theta_bar.resize(n);
  for (int i = 0; i < n; ++i) sol.theta_bar[i] = x[v.theta[i]];
  sol.f_bar.resize(m);
  for (int l = 0; l < m; ++l) sol.f_bar[l] = x[v.f[l]];
  sol.s2 = Eigen::VectorXd::Zero(m);
}

conic::SolveResult run_solver(const conic::ConicProgram& prog, const OpfOptions& options) {
  if (options.cutting_plane) {
    conic::CuttingPlaneOptions cp = options.cutting;
    cp.inner = options.solver;
    return conic::cutting_plane_solve(prog, cp);
  }
  return conic::solve(prog, options.solver);
}

void copy_diagnostics(const conic::SolveResult& r, DispatchSolution& sol) {
  sol.status = r.status;
  sol.message = r.message;
  sol.iterations = r.iterations;
  sol.rounds = r.rounds;
  sol.wall_time = r.wall_time;
}

}  // namespace vaopf::detail
