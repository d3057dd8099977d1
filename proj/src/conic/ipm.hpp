#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <string>
#include <vector>

#include "vaopf/conic.hpp"

namespace vaopf::conic::detail {

using SpMat = Eigen::SparseMatrix<double>;

/// Product cone: a nonnegative orthant of dimension lp_dim followed by
/// second-order cones (t, y) with t >= ||y||.
struct ConeLayout {
  int lp_dim = 0;
  std::vector<int> soc_dims;

  int total() const;
  int degree() const { return lp_dim + static_cast<int>(soc_dims.size()); }
};

/// minimize 1/2 x'Px + q'x  s.t.  Ax = b,  Gx + s = h,  s in K.
struct StandardForm {
  int n = 0;
  SpMat P;  // full symmetric
  Eigen::VectorXd q;
  SpMat A;
  Eigen::VectorXd b;
  SpMat G;
  Eigen::VectorXd h;
  ConeLayout cones;
  double objective_constant = 0.0;

  /// Where each linear constraint of the source program landed.
  struct RowRef {
    bool equality = false;
    int row = -1;
    double sign = 1.0;
  };
  std::vector<RowRef> linear_rows;
};

StandardForm lower_program(const ConicProgram& program);

struct IpmResult {
  SolveStatus status = SolveStatus::kNumericFailure;
  Eigen::VectorXd x, y, z, s;
  int iterations = 0;
  double primal_objective = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double gap = 0.0;
  std::string message;
};

IpmResult solve_standard(const StandardForm& form, const SolveOptions& options);

// Cone arithmetic, exposed for unit tests.
double min_eigenvalue(const Eigen::VectorXd& v, const ConeLayout& cones);
Eigen::VectorXd jordan_product(const Eigen::VectorXd& u, const Eigen::VectorXd& v, const ConeLayout& cones);
/// Solves lambda o x = r for x.
Eigen::VectorXd jordan_divide(const Eigen::VectorXd& lambda, const Eigen::VectorXd& r, const ConeLayout& cones);
/// Largest alpha with v + alpha*dv in the cone (infinity when unbounded).
double max_step(const Eigen::VectorXd& v, const Eigen::VectorXd& dv, const ConeLayout& cones);

/// Nesterov-Todd scaling W (symmetric) with W z = W^{-1} s = lambda.
class NtScaling {
 public:
  bool compute(const Eigen::VectorXd& s, const Eigen::VectorXd& z, const ConeLayout& cones);
  Eigen::VectorXd apply(const Eigen::VectorXd& v) const;
  Eigen::VectorXd apply_inverse(const Eigen::VectorXd& v) const;
  /// Dense W^2 block of cone k (SOC index), or LP diagonal entry for LP rows.
  const Eigen::MatrixXd& soc_square(int k) const { return soc_w2_[k]; }
  /// Dense W^-1 block of SOC k.
  const Eigen::MatrixXd& soc_inverse(int k) const { return soc_winv_[k]; }
  double lp_square(int i) const { return lp_w_[i] * lp_w_[i]; }

 private:
  ConeLayout cones_;
  Eigen::VectorXd lp_w_;
  std::vector<double> beta_;
  std::vector<Eigen::VectorXd> wbar_;
  std::vector<Eigen::MatrixXd> soc_w2_;
  std::vector<Eigen::MatrixXd> soc_winv_;
};

}  // namespace vaopf::conic::detail
