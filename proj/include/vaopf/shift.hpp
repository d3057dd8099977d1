#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "vaopf/metric.hpp"
#include "vaopf/opf.hpp"

namespace vaopf {

/// s^2(t) = a t^2 + b t + c along a participation segment.
struct Quadratic {
  double a = 0.0, b = 0.0, c = 0.0;
  double operator()(double t) const { return (a * t + b) * t + c; }
};

/// Exact coefficients from the values at t = 0, 1/2, 1.
Quadratic interpolate(double q0, double q_half, double q1);

/// Per-line variance quadratics along (1-t) A0 + t A1.
std::vector<Quadratic> line_variance_quadratics(const SusceptanceSystem& sys, const StochasticModel& stoch,
                                                const ParticipationMatrix& A0, const ParticipationMatrix& A1);

struct StepResult {
  double lambda = 1.0;
  /// Set when the start pair already violates a constraint or the step is
  /// numerically zero; the caller stops.
  bool zero_step = false;
  int binding_line = -1;
  int binding_generator = -1;
};

/// Largest lambda in [0, 1] such that (f_bar, (1-lambda) A_prev + lambda A_hat)
/// keeps every line safety row and generator margin (with dispatch p_bar).
StepResult max_step(const Grid& grid, const SusceptanceSystem& sys, const StochasticModel& stoch,
                    const Eigen::VectorXd& f_bar, const Eigen::VectorXd& p_bar, const ParticipationMatrix& A_prev,
                    const ParticipationMatrix& A_hat);

struct ProcedureOptions {
  MetricSpec metric;
  double tau = 0.1;
  int K = 2;
  /// After a Step-5 stop halve tau and keep going while iterations remain.
  bool retry_after_stop = false;
  int max_tau_retries = 8;
  OpfOptions opf;
  VShiftOptions vshift;
  double stop_tol = 1e-9;
  /// Adds the participating generators' margins at the Reroute dispatch to VShift.
  bool generator_margins_in_vshift = true;
};

struct ShiftRecord {
  int k = 0;
  double cost = 0.0;
  double delta = 0.0;
  std::optional<double> lambda;
  int tight_count = 0;
  double tau = 0.0;
  std::string stop_reason;  // empty when the iteration was accepted
  bool compatible = true;
  /// Delta of the VShift optimum A_hat (before the step).
  std::optional<double> delta_hat;
};

struct ShiftTrace {
  std::vector<ShiftRecord> records;
  /// Accepted iterates; front() is the start point.
  std::vector<DispatchSolution> iterates;
  DispatchSolution final;
  std::string stop_reason;  // k_exhausted, step5, step1_infeasible, zero_step, solver_failure
  /// Set when the last stop came from Step 5.
  std::optional<double> step5_delta_new;
  /// VShift witness at the Step-5 stop.
  std::optional<ParticipationMatrix> witness;
  MetricSpec metric;
};

/// Variance-shifting loop from a feasible safety-OPF solution (start.A must be set).
ShiftTrace run_procedure(const Grid& grid, const SusceptanceSystem& sys, const StochasticModel& stoch,
                         const DispatchSolution& start, const ProcedureOptions& options);

/// One JSON object per record: k, cost, delta, lambda, tight_count, tau,
/// stop_reason, compatible.
std::string trace_to_jsonl(const ShiftTrace& trace);

struct StopCertificate {
  int k = 0;
  double delta_stop = 0.0;  // Delta of the last accepted iterate, claimed = Delta*
  double delta_rejected = 0.0;
  ParticipationMatrix witness;
};

/// Only for model-I traces that stopped at Step 5.
std::optional<StopCertificate> certify_stop(const ShiftTrace& trace);

struct BruteForceResult {
  double delta_star = 0.0;
  /// Largest change of Delta between neighbouring compatible grid points.
  double resolution_bound = 0.0;
  int compatible_points = 0;
  int total_points = 0;
  ParticipationMatrix best;
};

/// Grid search of Delta* over nonnegative participation matrices with
/// column sums one, alpha on multiples of step. A point counts when
/// Reroute(A, 0) is feasible. Model-I metrics only.
BruteForceResult brute_force_delta_star(const Grid& grid, const SusceptanceSystem& sys, const StochasticModel& stoch,
                                        const MetricSpec& metric, double step, const OpfOptions& options = {});

}  // namespace vaopf
