#pragma once

#include "vaopf/opf.hpp"

namespace vaopf::detail {

struct NetworkVars {
  conic::VarBlock p, theta, f;
};

/// p (one per generator), theta (slack fixed at 0) and f with the rows
/// B theta = p + mu - d and f = b (theta_i - theta_j).
NetworkVars add_network(conic::ConicProgram& prog, const Grid& grid, const SusceptanceSystem& sys,
                        const Eigen::VectorXd& mean_injection);

/// sum c0 p^2 + c1 p + c2.
void add_generation_cost(conic::ConicProgram& prog, const Grid& grid, const conic::VarBlock& p);

struct ParticipationVars {
  conic::VarBlock alpha, D, gamma;
};

/// alpha, D and gamma with the rows B-hat D_k = A_k, D_slack = 0,
/// gamma = pi_S - D_i + D_j, the pattern rows, and the line cones
/// s_ij >= b_ij ||L^T gamma_ij||.
ParticipationVars add_participation(conic::ConicProgram& prog, const Grid& grid, const SusceptanceSystem& sys,
                                    const StochasticModel& stoch, const PatternK& pattern, const conic::VarBlock& s,
                                    const Eigen::MatrixXd& L);

ParticipationMatrix read_alpha(const std::vector<double>& x, const conic::VarBlock& alpha, const StochasticModel& stoch);

/// Fills p_bar (per bus), theta and f from solver values.
void read_network(const std::vector<double>& x, const NetworkVars& v, const Grid& grid, DispatchSolution& sol);

conic::SolveResult run_solver(const conic::ConicProgram& prog, const OpfOptions& options);

void copy_diagnostics(const conic::SolveResult& r, DispatchSolution& sol);

}  // namespace vaopf::detail
