#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vaopf/conic.hpp"
#include "vaopf/grid.hpp"
#include "vaopf/linalg.hpp"
#include "vaopf/metric.hpp"
#include "vaopf/stochastic.hpp"

namespace vaopf {

struct DispatchSolution {
  Eigen::VectorXd p_bar;      // n, MW at each bus
  Eigen::VectorXd theta_bar;  // n
  Eigen::VectorXd f_bar;      // m
  Eigen::VectorXd s2;         // m, V(A)
  std::optional<ParticipationMatrix> A;
  double expected_cost = 0.0;
  conic::SolveStatus status = conic::SolveStatus::kNumericFailure;
  std::string message;
  int iterations = 0;
  int rounds = 1;
  double wall_time = 0.0;

  bool optimal() const { return status == conic::SolveStatus::kOptimal; }
};

/// Deterministic field order; A as (participant_bus, source_bus, alpha)
/// triplets with MATPOWER labels.
std::string solution_to_json(const DispatchSolution& sol, const Grid& grid);
DispatchSolution solution_from_json(const std::string& text, const Grid& grid, const StochasticModel& stoch);

struct OpfOptions {
  conic::SolveOptions solver;
  bool cutting_plane = false;
  conic::CuttingPlaneOptions cutting;
  PatternK pattern;
};

/// Deterministic DC-OPF; with a stochastic model its means are added to
/// the injections.
DispatchSolution solve_dcopf(const Grid& grid, const SusceptanceSystem& sys, const StochasticModel* stoch = nullptr,
                             const conic::SolveOptions& options = {});

/// Variable blocks of the sparse safety-constrained program. alpha is
/// |R| x |S| (index r*|S| + k), D is n x |S| (index k*n + i), gamma is
/// m x |S| (index l*|S| + k).
struct SafetyProgram {
  conic::ConicProgram program;
  conic::VarBlock p, theta, f, s, alpha, D, gamma, sigma;
  int n = 0, m = 0, R = 0, S = 0;
};

SafetyProgram build_safety_opf(const Grid& grid, const SusceptanceSystem& sys, const StochasticModel& stoch,
                               const PatternK& pattern = {});

/// Solves a (possibly modified) safety program and maps it back.
DispatchSolution solve_safety_program(const SafetyProgram& sp, const Grid& grid, const SusceptanceSystem& sys,
                                      const StochasticModel& stoch, const OpfOptions& options = {});

DispatchSolution solve_safety_opf(const Grid& grid, const SusceptanceSystem& sys, const StochasticModel& stoch,
                                  const OpfOptions& options = {});

struct FormulationStats {
  long n_A_vars = 0;
  long n_D_vars = 0;
  long n_gamma_vars = 0;
  long n_other_vars = 0;
  /// Couplings of D = B-breve A: per source, D variables times A variables.
  long nnz_D_constraints = 0;
  /// Distinct gamma variables referenced by the line cones.
  long nnz_conic_constraints = 0;
  /// Actual nonzeros of the sparse B-hat D = A rows as built.
  long nnz_D_rows_built = 0;
};

FormulationStats formulation_stats(const SafetyProgram& sp);

/// Sum of expected generation costs for p_bar with participation A.
double expected_cost(const Grid& grid, const StochasticModel& stoch, const Eigen::VectorXd& p_bar,
                     const ParticipationMatrix* A);

struct RerouteProgram {
  conic::ConicProgram program;
  conic::VarBlock p, theta, f;
};

RerouteProgram build_reroute(const Grid& grid, const SusceptanceSystem& sys, const StochasticModel& stoch,
                             const ParticipationMatrix& A_hat, double tau);

DispatchSolution solve_reroute(const Grid& grid, const SusceptanceSystem& sys, const StochasticModel& stoch,
                               const ParticipationMatrix& A_hat, double tau, const OpfOptions& options = {});

struct VShiftOptions {
  PatternK pattern;
  /// Upper bounds on selected line variances (line -> max s^2).
  std::map<int, double> variance_caps;
  /// Lines subject to the safety rows; computed from (f', A', tau) when unset.
  std::optional<std::vector<int>> tight_override;
  /// When set (bus-indexed p-bar), participating generators keep
  /// nu_i sqrt(alpha_i' Omega alpha_i) within their margins at this dispatch.
  std::optional<Eigen::VectorXd> generator_dispatch;
};

struct VShiftProgram {
  conic::ConicProgram program;
  conic::VarBlock s, alpha, D, gamma;
  std::vector<int> F;
  std::vector<int> T;
  int S = 0;
};

VShiftProgram build_vshift(const Grid& grid, const SusceptanceSystem& sys, const StochasticModel& stoch,
                           const Eigen::VectorXd& f_prime, const ParticipationMatrix& A_prime, double tau,
                           const MetricSpec& metric, const VShiftOptions& vopts = {});

struct VShiftResult {
  conic::SolveStatus status = conic::SolveStatus::kNumericFailure;
  std::string message;
  ParticipationMatrix A_hat;
  Eigen::VectorXd s2_hat;  // V(A_hat)
  double objective = 0.0;
  std::vector<int> F;
  std::vector<int> T;

  bool optimal() const { return status == conic::SolveStatus::kOptimal; }
};

VShiftResult solve_vshift(const Grid& grid, const SusceptanceSystem& sys, const StochasticModel& stoch,
                          const Eigen::VectorXd& f_prime, const ParticipationMatrix& A_prime, double tau,
                          const MetricSpec& metric, const VShiftOptions& vopts = {}, const OpfOptions& options = {});

/// T(f, A, tau) with s = sqrt(V(A)).
std::vector<int> tight_set(const Eigen::VectorXd& f_bar, const ParticipationMatrix& A, const Grid& grid,
                           const SusceptanceSystem& sys, const StochasticModel& stoch, double tau);

class CycleInconsistentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CompatibilityIssue {
  std::string code;  // line_safety, generator_margin, injection, participation
  int index = -1;
  double margin = 0.0;  // negative when violated
};

struct CompatibilityReport {
  bool compatible = true;
  Eigen::VectorXd theta_bar;
  Eigen::VectorXd p_bar;
  std::vector<CompatibilityIssue> issues;
  /// Smallest scaled slack over the line safety rows.
  double min_line_margin = 0.0;
  int tightest_line = -1;
};

/// Rebuilds theta (slack = 0) and p from f, then checks every constraint of
/// the safety program at tolerance tol (scaled by 1 + |rhs|).
CompatibilityReport check_compatible(const Eigen::VectorXd& f_bar, const ParticipationMatrix& A, const Grid& grid,
                                     const SusceptanceSystem& sys, const StochasticModel& stoch,
                                     const PatternK& pattern = {}, double tol = 1e-6);

}  // namespace vaopf
