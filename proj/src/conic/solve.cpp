#include <chrono>
#include <cmath>
#include <deque>

#include "ipm.hpp"
#include "vaopf/conic.hpp"

namespace vaopf::conic {

namespace {

using detail::StandardForm;

/// Phase I: minimize t subject to Ax = b, Gx - t e + s = h, s in K, t >= -1.
/// A positive optimum certifies infeasibility of the original cone constraints.
StandardForm phase_one(const StandardForm& f) {
  StandardForm g;
  const int n = f.n;
  g.n = n + 1;
  g.P.resize(n + 1, n + 1);
  g.q = Eigen::VectorXd::Zero(n + 1);
  g.q[n] = 1.0;
  g.A = f.A;
  g.A.conservativeResize(f.A.rows(), n + 1);
  g.b = f.b;

  std::vector<Eigen::Triplet<double>> trip;
  const int lp = f.cones.lp_dim;
  for (int c = 0; c < f.G.outerSize(); ++c)
    for (detail::SpMat::InnerIterator it(f.G, c); it; ++it) {
      const int row = static_cast<int>(it.row()) < lp ? static_cast<int>(it.row()) : static_cast<int>(it.row()) + 1;
      trip.emplace_back(row, it.col(), it.value());
    }
  for (int i = 0; i < lp; ++i) trip.emplace_back(i, n, -1.0);
  trip.emplace_back(lp, n, -1.0);  // -t + s = 1
  int o = lp + 1;
  for (int d : f.cones.soc_dims) {
    trip.emplace_back(o, n, -1.0);
    o += d;
  }
  const int m = static_cast<int>(f.G.rows()) + 1;
  g.G.resize(m, n + 1);
  g.G.setFromTriplets(trip.begin(), trip.end());
  g.h.resize(m);
  g.h.head(lp) = f.h.head(lp);
  g.h[lp] = 1.0;
  g.h.tail(m - lp - 1) = f.h.tail(m - lp - 1);
  g.cones.lp_dim = lp + 1;
  g.cones.soc_dims = f.cones.soc_dims;
  return g;
}

/// Recession check: minimize q'd subject to Ad = 0, Pd = 0, Gd in -K and
/// |d| <= 1. A negative optimum is a direction of unbounded descent.
StandardForm recession(const StandardForm& f) {
  StandardForm g;
  const int n = f.n;
  g.n = n;
  g.P.resize(n, n);
  g.q = f.q;
  std::vector<Eigen::Triplet<double>> trip;
  for (int c = 0; c < f.A.outerSize(); ++c)
    for (detail::SpMat::InnerIterator it(f.A, c); it; ++it) trip.emplace_back(it.row(), it.col(), it.value());
  const int pa = static_cast<int>(f.A.rows());
  for (int c = 0; c < f.P.outerSize(); ++c)
    for (detail::SpMat::InnerIterator it(f.P, c); it; ++it) trip.emplace_back(pa + it.row(), it.col(), it.value());
  g.A.resize(pa + n, n);
  g.A.setFromTriplets(trip.begin(), trip.end());
  g.b = Eigen::VectorXd::Zero(pa + n);

  trip.clear();
  for (int j = 0; j < n; ++j) {
    trip.emplace_back(j, j, 1.0);
    trip.emplace_back(n + j, j, -1.0);
  }
  for (int c = 0; c < f.G.outerSize(); ++c)
    for (detail::SpMat::InnerIterator it(f.G, c); it; ++it) trip.emplace_back(2 * n + it.row(), it.col(), it.value());
  const int m = 2 * n + static_cast<int>(f.G.rows());
  g.G.resize(m, n);
  g.G.setFromTriplets(trip.begin(), trip.end());
  g.h = Eigen::VectorXd::Zero(m);
  g.h.head(2 * n).setOnes();
  g.cones.lp_dim = 2 * n + f.cones.lp_dim;
  g.cones.soc_dims = f.cones.soc_dims;
  return g;
}

double scaled_violation(const ConicProgram& program, const std::vector<double>& x) {
  double worst = 0.0;
  for (int k = 0; k < program.num_variables(); ++k) {
    const double lo = program.lower()[k], hi = program.upper()[k];
    if (std::isfinite(lo)) worst = std::max(worst, (lo - x[k]) / (1.0 + std::abs(lo)));
    if (std::isfinite(hi)) worst = std::max(worst, (x[k] - hi) / (1.0 + std::abs(hi)));
  }
  for (const auto& row : program.linear_constraints()) {
    const double lhs = row.expr.evaluate(x);
    double v = 0.0;
    switch (row.sense) {
      case Sense::kLessEqual: v = lhs - row.rhs; break;
      case Sense::kGreaterEqual: v = row.rhs - lhs; break;
      case Sense::kEqual: v = std::abs(lhs - row.rhs); break;
    }
    worst = std::max(worst, v / (1.0 + std::abs(row.rhs)));
  }
  for (const auto& cone : program.soc_constraints()) {
    double sq = 0.0;
    for (const auto& e : cone.y) sq += std::pow(e.evaluate(x), 2);
    const double t = cone.t.evaluate(x);
    worst = std::max(worst, (std::sqrt(sq) - t) / (1.0 + std::abs(t)));
  }
  return worst;
}

}  // namespace

SolveResult solve(const ConicProgram& program, const SolveOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  SolveResult result;
  try {
    const StandardForm form = detail::lower_program(program);
    const detail::IpmResult ipm = detail::solve_standard(form, options);
    result.iterations = ipm.iterations;
    result.values.assign(ipm.x.data(), ipm.x.data() + ipm.x.size());
    result.objective = program.objective_value(result.values);
    result.message = ipm.message;
    result.status = ipm.status;

    if (ipm.status == SolveStatus::kOptimal) {
      result.duals.resize(program.linear_constraints().size());
      for (std::size_t k = 0; k < form.linear_rows.size(); ++k) {
        const auto& ref = form.linear_rows[k];
        result.duals[k] = ref.sign * (ref.equality ? ipm.y[ref.row] : ipm.z[ref.row]);
      }
      result.max_violation = program.max_violation(result.values);
      if (scaled_violation(program, result.values) > options.recheck_tol) {
        result.status = SolveStatus::kNumericFailure;
        result.message = "optimal answer failed the independent feasibility re-check";
      }
    } else {
      SolveOptions p1_opts = options;
      p1_opts.max_iterations = std::max(options.max_iterations, 80);
      const detail::IpmResult p1 = detail::solve_standard(phase_one(form), p1_opts);
      const double scale = 1.0 + (form.h.size() ? form.h.lpNorm<Eigen::Infinity>() : 0.0);
      if (p1.status == SolveStatus::kOptimal) {
        const double t = p1.x[form.n];
        if (t > 1e-7 * scale) {
          result.status = SolveStatus::kInfeasible;
          result.message = "phase-one optimum " + std::to_string(t) + " > 0";
        } else {
          const detail::IpmResult ray = detail::solve_standard(recession(form), p1_opts);
          const double qn = 1.0 + (form.q.size() ? form.q.lpNorm<Eigen::Infinity>() : 0.0);
          if (ray.status == SolveStatus::kOptimal && form.q.dot(ray.x) < -1e-7 * qn) {
            result.status = SolveStatus::kUnbounded;
            result.message = "feasible with a direction of unbounded descent";
          }
        }
      } else if (p1.primal_residual > 1e-6) {
        result.status = SolveStatus::kInfeasible;
        result.message = "equality constraints are inconsistent";
      }
      result.max_violation = program.max_violation(result.values);
    }
  } catch (const std::exception& ex) {
    result.status = SolveStatus::kNumericFailure;
    result.message = std::string("solver adapter error: ") + ex.what();
  }
  result.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

SolveResult cutting_plane_solve(const ConicProgram& program, const CuttingPlaneOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  ConicProgram base = program.without_cones();
  const auto& cones = program.soc_constraints();
  for (const auto& cone : cones) base.add_linear(cone.t, Sense::kGreaterEqual, 0.0, "cone_nonneg");

  std::vector<std::deque<LinearExpr>> cuts(cones.size());
  SolveResult result;
  int total_iterations = 0;
  for (int round = 1; round <= options.max_rounds; ++round) {
    ConicProgram relaxed = base;
    for (const auto& per_cone : cuts)
      for (const auto& cut : per_cone) relaxed.add_linear(cut, Sense::kGreaterEqual, 0.0, "cut");
    SolveResult inner = solve(relaxed, options.inner);
    total_iterations += inner.iterations;
    result.round_objectives.push_back(inner.objective);
    result.status = inner.status;
    result.values = inner.values;
    result.objective = inner.objective;
    result.rounds = round;
    result.message = inner.message;
    if (!inner.optimal()) break;

    bool violated = false;
    for (std::size_t k = 0; k < cones.size(); ++k) {
      const auto& cone = cones[k];
      Eigen::VectorXd y(static_cast<int>(cone.y.size()));
      for (std::size_t j = 0; j < cone.y.size(); ++j) y[static_cast<int>(j)] = cone.y[j].evaluate(inner.values);
      const double norm = y.norm();
      if (norm - cone.t.evaluate(inner.values) <= options.soc_tolerance || norm == 0.0) continue;
      violated = true;
      // t - g'y >= 0 with g = y*/||y*||
      LinearExpr cut = cone.t;
      for (std::size_t j = 0; j < cone.y.size(); ++j) cut -= (y[static_cast<int>(j)] / norm) * cone.y[j];
      cuts[k].push_back(cut.compacted());
      if (options.max_cuts_per_cone > 0 && static_cast<int>(cuts[k].size()) > options.max_cuts_per_cone)
        cuts[k].pop_front();
    }
    if (!violated) {
      result.status = SolveStatus::kOptimal;
      break;
    }
    if (round == options.max_rounds) {
      result.status = SolveStatus::kIterationLimit;
      result.message = "cone violations remain after the round limit";
    }
  }
  result.iterations = total_iterations;
  result.max_violation = result.values.empty() ? 0.0 : program.max_violation(result.values);
  result.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace vaopf::conic
