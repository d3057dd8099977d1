#pragma once

#include <cstddef>
#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace vaopf::conic {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Affine expression sum_k coef_k * x[var_k] + constant over scalar variables.
class LinearExpr {
 public:
  struct Term {
    int var;
    double coef;
  };

  LinearExpr() = default;
  LinearExpr(double constant) : constant_(constant) {}  // NOLINT: implicit by intent

  static LinearExpr var(int index, double coef = 1.0) {
    LinearExpr e;
    e.add(index, coef);
    return e;
  }

  LinearExpr& add(int index, double coef) {
    if (coef != 0.0) terms_.push_back({index, coef});
    return *this;
  }
  LinearExpr& add_constant(double c) {
    constant_ += c;
    return *this;
  }
  LinearExpr& operator+=(const LinearExpr& other);
  LinearExpr& operator-=(const LinearExpr& other);
  LinearExpr& operator*=(double scale);

  const std::vector<Term>& terms() const { return terms_; }
  double constant() const { return constant_; }

  double evaluate(const std::vector<double>& x) const;

  /// Merges duplicate variables and drops zero coefficients.
  LinearExpr compacted() const;

 private:
  std::vector<Term> terms_;
  double constant_ = 0.0;
};

LinearExpr operator+(LinearExpr a, const LinearExpr& b);
LinearExpr operator-(LinearExpr a, const LinearExpr& b);
LinearExpr operator*(double s, LinearExpr a);

/// Contiguous run of scalar variables sharing a name.
struct VarBlock {
  std::string name;
  int offset = 0;
  int size = 0;

  int operator[](int i) const { return offset + i; }
};

enum class Sense { kLessEqual, kEqual, kGreaterEqual };

/// expr (sense) rhs
struct LinearConstraint {
  LinearExpr expr;
  Sense sense = Sense::kLessEqual;
  double rhs = 0.0;
  std::string group;
};

/// t >= ||y||_2
struct SocConstraint {
  LinearExpr t;
  std::vector<LinearExpr> y;
  std::string group;
};

/// Solver-agnostic conic program:
///   minimize   sum_{(i,j,v)} v * x_i * x_j + c^T x + constant
///   subject to linear rows, second-order cones and variable bounds.
/// The quadratic part must be convex.
class ConicProgram {
 public:
  VarBlock add_variables(const std::string& name, int count, double lower = -kInf,
                         double upper = kInf);
  void set_bounds(int var, double lower, double upper);

  int add_linear(LinearExpr expr, Sense sense, double rhs, std::string group = {});
  int add_soc(LinearExpr t, std::vector<LinearExpr> y, std::string group = {});

  /// Adds v * x_i * x_j to the objective (i == j gives v * x_i^2).
  void add_quadratic(int i, int j, double v);
  void add_linear_objective(int var, double c);
  void add_objective_constant(double c) { objective_constant_ += c; }

  int num_variables() const { return static_cast<int>(lower_.size()); }
  const std::vector<VarBlock>& blocks() const { return blocks_; }
  const VarBlock* find_block(const std::string& name) const;
  const std::vector<double>& lower() const { return lower_; }
  const std::vector<double>& upper() const { return upper_; }
  const std::vector<LinearConstraint>& linear_constraints() const { return linear_; }
  const std::vector<SocConstraint>& soc_constraints() const { return soc_; }
  std::vector<SocConstraint>& mutable_soc_constraints() { return soc_; }

  struct QuadTerm {
    int i;
    int j;
    double v;
  };
  const std::vector<QuadTerm>& quadratic_terms() const { return quad_; }
  const std::vector<double>& linear_objective() const { return linear_objective_; }
  double objective_constant() const { return objective_constant_; }

  double objective_value(const std::vector<double>& x) const;

  /// Largest violation over linear rows, bounds and cones at x (absolute).
  double max_violation(const std::vector<double>& x) const;

  /// Drops the cones, returning a copy with only linear structure.
  ConicProgram without_cones() const;

 private:
  std::vector<VarBlock> blocks_;
  std::vector<double> lower_;
  std::vector<double> upper_;
  std::vector<LinearConstraint> linear_;
  std::vector<SocConstraint> soc_;
  std::vector<QuadTerm> quad_;
  std::vector<double> linear_objective_;
  double objective_constant_ = 0.0;
};

enum class SolveStatus { kOptimal, kInfeasible, kUnbounded, kNumericFailure, kIterationLimit };

const char* to_string(SolveStatus status);

struct SolveOptions {
  double feasibility_tol = 1e-9;
  double absolute_gap_tol = 1e-9;
  double relative_gap_tol = 1e-10;
  int max_iterations = 120;
  /// Independent feasibility re-check applied to optimal answers.
  double recheck_tol = 1e-6;
  bool verbose = false;
};

struct SolveResult {
  SolveStatus status = SolveStatus::kNumericFailure;
  std::vector<double> values;
  double objective = 0.0;
  /// One multiplier per linear constraint (>= 0 for inequalities) when available.
  std::vector<double> duals;
  int iterations = 0;
  /// Cutting-plane rounds (1 for a direct solve).
  int rounds = 1;
  double wall_time = 0.0;
  double max_violation = 0.0;
  std::string message;
  /// Objective value of each cutting-plane round's relaxation.
  std::vector<double> round_objectives;

  bool optimal() const { return status == SolveStatus::kOptimal; }
};

/// Direct conic solve through the bundled interior-point adapter.
SolveResult solve(const ConicProgram& program, const SolveOptions& options = {});

struct CuttingPlaneOptions {
  double soc_tolerance = 1e-6;
  int max_rounds = 50;
  /// FIFO cap on accumulated cuts per cone; 0 keeps every cut.
  int max_cuts_per_cone = 0;
  SolveOptions inner;
};

/// Outer approximation: cones are replaced by accumulated gradient cuts
/// t >= (y*/||y*||)^T y until every cone holds to soc_tolerance.
SolveResult cutting_plane_solve(const ConicProgram& program, const CuttingPlaneOptions& options = {});

/// Stable text dump (variables, objective, rows, cones) in declaration order.
void dump_program(const ConicProgram& program, std::ostream& out);

}  // namespace vaopf::conic
