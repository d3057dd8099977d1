#include <algorithm>
#include <cmath>
#include <map>

#include "json.hpp"
#include "vaopf/shift.hpp"

namespace vaopf {

Quadratic interpolate(double q0, double q_half, double q1) {
  Quadratic q;
  q.c = q0;
  q.a = 2.0 * (q1 - 2.0 * q_half + q0);
  q.b = q1 - q0 - q.a;
  return q;
}

std::vector<Quadratic> line_variance_quadratics(const SusceptanceSystem& sys, const StochasticModel& stoch,
                                                const ParticipationMatrix& A0, const ParticipationMatrix& A1) {
  const Eigen::VectorXd v0 = line_variances(sys, A0, stoch.omega);
  const Eigen::VectorXd vh = line_variances(sys, blend(A0, A1, 0.5), stoch.omega);
  const Eigen::VectorXd v1 = line_variances(sys, A1, stoch.omega);
  std::vector<Quadratic> out(v0.size());
  for (int l = 0; l < v0.size(); ++l) out[l] = interpolate(v0[l], vh[l], v1[l]);
  return out;
}

namespace {

// Largest t in [0, 1] with q(s) <= rhs on [0, t], for convex q with q(0) <= rhs.
double admissible_until(Quadratic q, double rhs) {
  const double q1 = q(1.0);
  if (q.a < 0.0) {  // roundoff on a convex function; use the chord
    q.a = 0.0;
    q.b = q1 - q.c;
  }
  if (q1 <= rhs) return 1.0;
  const double g0 = std::min(q.c - rhs, 0.0);
  const double disc = q.b * q.b - 4.0 * q.a * g0;
  const double sq = std::sqrt(std::max(disc, 0.0));
  double r;
  if (q.b >= 0.0) r = q.b + sq > 0.0 ? -2.0 * g0 / (q.b + sq) : 0.0;
  else r = (-q.b + sq) / (2.0 * q.a);
  return std::clamp(r, 0.0, 1.0);
}

double row_variance(const Eigen::VectorXd& row, const Eigen::MatrixXd& omega) { return row.dot(omega * row); }

}  // namespace

StepResult max_step(const Grid& grid, const SusceptanceSystem& sys, const StochasticModel& stoch,
                    const Eigen::VectorXd& f_bar, const Eigen::VectorXd& p_bar, const ParticipationMatrix& A_prev,
                    const ParticipationMatrix& A_hat) {
  StepResult out;
  auto consider = [&out](const Quadratic& q, double slack, double nu, double scale, int line, int gen) {
    if (slack < -1e-9 * scale) {
      out.zero_step = true;
      out.lambda = 0.0;
      out.binding_line = line;
      out.binding_generator = gen;
      return;
    }
    if (nu <= 0.0) return;
    const double rhs = std::pow(std::max(slack, 0.0) / nu, 2);
    if (q.c > rhs * (1.0 + 1e-9) + 1e-12 * scale * scale) {
      out.zero_step = true;
      out.lambda = 0.0;
      out.binding_line = line;
      out.binding_generator = gen;
      return;
    }
    const double t = admissible_until(q, rhs);
    if (t < out.lambda) {
      out.lambda = t;
      out.binding_line = line;
      out.binding_generator = gen;
    }
  };

  const auto lines = line_variance_quadratics(sys, stoch, A_prev, A_hat);
  for (int l = 0; l < grid.num_lines() && !out.zero_step; ++l) {
    const auto& ln = grid.lines[l];
    consider(lines[l], ln.limit - std::abs(f_bar[l]), ln.safety_param, 1.0 + ln.limit, l, -1);
  }
  const ParticipationMatrix A_half = blend(A_prev, A_hat, 0.5);
  for (std::size_t g = 0; g < grid.generators.size() && !out.zero_step; ++g) {
    const auto& gen = grid.generators[g];
    const int r = stoch.participant_index(gen.bus);
    if (r < 0) continue;
    const Quadratic q = interpolate(row_variance(A_prev.alpha.row(r).transpose(), stoch.omega),
                                    row_variance(A_half.alpha.row(r).transpose(), stoch.omega),
                                    row_variance(A_hat.alpha.row(r).transpose(), stoch.omega));
    const double p = p_bar[gen.bus];
    const double slack = std::min(p - gen.p_min, gen.p_max - p);
    consider(q, slack, gen.safety_param, 1.0 + std::max(std::abs(gen.p_min), std::abs(gen.p_max)), -1,
             static_cast<int>(g));
  }
  if (!out.zero_step && out.lambda <= 1e-12) {
    out.zero_step = true;
    out.lambda = 0.0;
  }
  return out;
}

namespace {

DispatchSolution with_participation(DispatchSolution sol, const ParticipationMatrix& A, const Grid& grid,
                                    const SusceptanceSystem& sys, const StochasticModel& stoch) {
  sol.s2 = line_variances(sys, A, stoch.omega);
  sol.expected_cost = expected_cost(grid, stoch, sol.p_bar, &A);
  sol.A = A;
  return sol;
}

}  // namespace

ShiftTrace run_procedure(const Grid& grid, const SusceptanceSystem& sys, const StochasticModel& stoch,
                         const DispatchSolution& start, const ProcedureOptions& options) {
  if (!start.A) throw std::invalid_argument("start solution has no participation matrix");
  if (!(options.tau > 0.0 && options.tau < 1.0)) throw std::invalid_argument("tau must lie in (0, 1)");
  if (options.K < 0) throw std::invalid_argument("K must be nonnegative");
  const MetricSpec& spec = options.metric;
  const PatternK& pattern = options.vshift.pattern;

  ShiftTrace trace;
  trace.metric = spec;
  DispatchSolution cur = with_participation(start, *start.A, grid, sys, stoch);
  double delta_prev = metric_eval(spec, grid, cur.f_bar, cur.s2);
  double tau = options.tau;

  ShiftRecord first;
  first.k = 0;
  first.cost = cur.expected_cost;
  first.delta = delta_prev;
  first.tight_count = static_cast<int>(tight_lines(grid, cur.f_bar, cur.s2, tau).size());
  first.tau = tau;
  first.compatible = check_compatible(cur.f_bar, *cur.A, grid, sys, stoch, pattern).compatible;
  trace.records.push_back(first);
  trace.iterates.push_back(cur);
  trace.stop_reason = "k_exhausted";

  for (int k = 1; k <= options.K; ++k) {
    ShiftRecord rec;
    rec.k = k;
    const ParticipationMatrix& A_prev = *cur.A;

    DispatchSolution rr;
    for (int retry = 0;; ++retry) {
      rr = solve_reroute(grid, sys, stoch, A_prev, tau, options.opf);
      if (rr.optimal() || rr.status != conic::SolveStatus::kInfeasible || retry >= options.max_tau_retries) break;
      tau *= 0.5;
    }
    rec.tau = tau;
    if (!rr.optimal()) {
      rec.stop_reason = rr.status == conic::SolveStatus::kInfeasible ? "step1_infeasible" : "solver_failure";
      rec.cost = cur.expected_cost;
      rec.delta = delta_prev;
      trace.records.push_back(rec);
      trace.stop_reason = rec.stop_reason;
      break;
    }

    VShiftOptions vopts = options.vshift;
    if (options.generator_margins_in_vshift) vopts.generator_dispatch = rr.p_bar;
    const VShiftResult vs = solve_vshift(grid, sys, stoch, rr.f_bar, A_prev, tau, spec, vopts, options.opf);
    rec.tight_count = static_cast<int>(vs.T.size());
    if (!vs.optimal()) {
      rec.stop_reason = "solver_failure";
      rec.cost = rr.expected_cost;
      rec.delta = metric_eval(spec, grid, rr.f_bar, rr.s2);
      trace.records.push_back(rec);
      trace.stop_reason = rec.stop_reason;
      break;
    }
    rec.delta_hat = metric_eval(spec, grid, rr.f_bar, vs.s2_hat);

    const StepResult step = max_step(grid, sys, stoch, rr.f_bar, rr.p_bar, A_prev, vs.A_hat);
    rec.lambda = step.lambda;
    if (step.zero_step) {
      rec.stop_reason = "zero_step";
      rec.cost = rr.expected_cost;
      rec.delta = metric_eval(spec, grid, rr.f_bar, rr.s2);
      trace.records.push_back(rec);
      trace.stop_reason = rec.stop_reason;
      break;
    }

    const DispatchSolution next = with_participation(rr, blend(A_prev, vs.A_hat, step.lambda), grid, sys, stoch);
    rec.cost = next.expected_cost;
    rec.delta = metric_eval(spec, grid, next.f_bar, next.s2);
    rec.compatible = check_compatible(next.f_bar, *next.A, grid, sys, stoch, pattern).compatible;

    if (rec.delta >= delta_prev - options.stop_tol * (1.0 + std::abs(delta_prev))) {
      rec.stop_reason = "step5";
      trace.records.push_back(rec);
      trace.step5_delta_new = rec.delta;
      trace.witness = vs.A_hat;
      trace.stop_reason = "step5";
      if (options.retry_after_stop && k < options.K) {
        tau *= 0.5;
        continue;
      }
      break;
    }
    trace.records.push_back(rec);
    cur = next;
    delta_prev = rec.delta;
    trace.iterates.push_back(cur);
    trace.stop_reason = "k_exhausted";
    trace.step5_delta_new.reset();
    trace.witness.reset();
  }
  trace.final = cur;
  return trace;
}

std::string trace_to_jsonl(const ShiftTrace& trace) {
  std::string out;
  for (const auto& r : trace.records) {
    nlohmann::ordered_json j;
    j["k"] = r.k;
    j["cost"] = r.cost;
    j["delta"] = r.delta;
    j["lambda"] = r.lambda ? nlohmann::ordered_json(*r.lambda) : nlohmann::ordered_json(nullptr);
    j["tight_count"] = r.tight_count;
    j["tau"] = r.tau;
    j["stop_reason"] = r.stop_reason.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(r.stop_reason);
    j["compatible"] = r.compatible;
    j["delta_hat"] = r.delta_hat ? nlohmann::ordered_json(*r.delta_hat) : nlohmann::ordered_json(nullptr);
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::optional<StopCertificate> certify_stop(const ShiftTrace& trace) {
  if (trace.metric.model != MetricModel::kSum || trace.stop_reason != "step5" || !trace.witness ||
      !trace.step5_delta_new || trace.records.empty())
    return std::nullopt;
  StopCertificate cert;
  cert.k = trace.records.back().k;
  cert.delta_stop = trace.records[0].delta;
  for (const auto& r : trace.records)
    if (r.stop_reason.empty()) cert.delta_stop = r.delta;
  cert.delta_rejected = *trace.step5_delta_new;
  cert.witness = *trace.witness;
  return cert;
}

namespace {

// All ways to write `units` as an ordered sum of `parts` nonnegative integers.
void compositions(int units, int parts, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
  if (parts == 1) {
    cur.push_back(units);
    out.push_back(cur);
    cur.pop_back();
    return;
  }
  for (int u = 0; u <= units; ++u) {
    cur.push_back(u);
    compositions(units - u, parts - 1, cur, out);
    cur.pop_back();
  }
}

}  // namespace

BruteForceResult brute_force_delta_star(const Grid& grid, const SusceptanceSystem& sys, const StochasticModel& stoch,
                                        const MetricSpec& metric, double step, const OpfOptions& options) {
  if (metric.model != MetricModel::kSum) throw std::invalid_argument("brute force needs a model-I metric");
  const int units = static_cast<int>(std::lround(1.0 / step));
  if (units <= 0 || std::abs(units * step - 1.0) > 1e-9) throw std::invalid_argument("step must divide 1");
  const int R = stoch.num_participants();
  const int S = stoch.num_sources();
  std::vector<std::vector<int>> cols;
  std::vector<int> scratch;
  compositions(units, R, scratch, cols);
  const long per_col = static_cast<long>(cols.size());

  BruteForceResult out;
  out.delta_star = std::numeric_limits<double>::infinity();
  std::map<std::vector<int>, double> seen;  // column choice per source -> Delta
  std::vector<int> idx(S, 0);
  for (;;) {
    ParticipationMatrix A = ParticipationMatrix::zeros(stoch);
    for (int k = 0; k < S; ++k)
      for (int r = 0; r < R; ++r) A.alpha(r, k) = cols[idx[k]][r] * step;
    ++out.total_points;
    const DispatchSolution rr = solve_reroute(grid, sys, stoch, A, 0.0, options);
    if (rr.optimal()) {
      ++out.compatible_points;
      const double d = metric_eval(metric, grid, rr.f_bar, line_variances(sys, A, stoch.omega));
      seen[idx] = d;
      if (d < out.delta_star) {
        out.delta_star = d;
        out.best = A;
      }
    }
    int k = 0;
    while (k < S && ++idx[k] == per_col) idx[k++] = 0;
    if (k == S) break;
  }

  // neighbours: one unit moved between two participants in one column
  std::map<std::vector<int>, int> col_index;
  for (long c = 0; c < per_col; ++c) col_index[cols[c]] = static_cast<int>(c);
  for (const auto& [key, d] : seen)
    for (int k = 0; k < S; ++k)
      for (int from = 0; from < R; ++from) {
        if (cols[key[k]][from] == 0) continue;
        for (int to = 0; to < R; ++to) {
          if (to == from) continue;
          std::vector<int> moved = cols[key[k]];
          --moved[from];
          ++moved[to];
          std::vector<int> nkey = key;
          nkey[k] = col_index.at(moved);
          const auto it = seen.find(nkey);
          if (it != seen.end()) out.resolution_bound = std::max(out.resolution_bound, std::abs(it->second - d));
        }
      }
  return out;
}

}  // namespace vaopf
