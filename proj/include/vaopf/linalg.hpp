#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>

#include "vaopf/grid.hpp"

namespace vaopf {

class SingularSystemError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnbalancedInjectionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class FlowMethod { kPi, kTheta };

/// Bus susceptance matrix B with a factorization of B-hat (B without the
/// reduction row and column). B-breve is the padded inverse of B-hat.
class SusceptanceSystem {
 public:
  explicit SusceptanceSystem(const Grid& grid);
  SusceptanceSystem(const Grid& grid, int reduction_bus);
  ~SusceptanceSystem();
  SusceptanceSystem(const SusceptanceSystem&) = delete;
  SusceptanceSystem& operator=(const SusceptanceSystem&) = delete;

  int size() const { return n_; }
  int num_lines() const { return static_cast<int>(lines_.size()); }
  int reduction_bus() const { return reduction_bus_; }
  const Eigen::SparseMatrix<double>& B() const { return B_; }
  const std::vector<Line>& lines() const { return lines_; }

  /// x = B-breve rhs (entry at the reduction bus is 0).
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;

  /// Row i of B-breve; cached per bus.
  Eigen::VectorXd breve_row(int bus) const;

  /// pi_ij = breve_row(from) - breve_row(to).
  Eigen::VectorXd line_factor(int line) const;

  /// Flows b_ij pi_ij^T inj. Throws UnbalancedInjectionError when
  /// |sum inj| > tol * (1 + sum |inj|).
  Eigen::VectorXd dc_flows(const Eigen::VectorXd& injections, FlowMethod method = FlowMethod::kTheta,
                           double tol = 1e-8) const;

  /// theta with theta_reduction = 0 solving B theta = injections.
  Eigen::VectorXd angles(const Eigen::VectorXd& injections) const;

  /// b_ij (theta_i - theta_j) per line.
  Eigen::VectorXd flows_from_angles(const Eigen::VectorXd& theta) const;

 private:
  struct Factor;

  int n_ = 0;
  int reduction_bus_ = 0;
  std::vector<Line> lines_;
  Eigen::SparseMatrix<double> B_;
  std::unique_ptr<Factor> factor_;
  mutable std::mutex cache_mutex_;
  mutable std::map<int, Eigen::VectorXd> row_cache_;
};

}  // namespace vaopf
