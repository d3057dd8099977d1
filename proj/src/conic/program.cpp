#include "vaopf/conic.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <stdexcept>
#include <unordered_map>

namespace vaopf::conic {

LinearExpr& LinearExpr::operator+=(const LinearExpr& other) {
  terms_.insert(terms_.end(), other.terms_.begin(), other.terms_.end());
  constant_ += other.constant_;
  return *this;
}

LinearExpr& LinearExpr::operator-=(const LinearExpr& other) {
  for (const auto& t : other.terms_) terms_.push_back({t.var, -t.coef});
  constant_ -= other.constant_;
  return *this;
}

LinearExpr& LinearExpr::operator*=(double scale) {
  for (auto& t : terms_) t.coef *= scale;
  constant_ *= scale;
  return *this;
}

double LinearExpr::evaluate(const std::vector<double>& x) const {
  double v = constant_;
  for (const auto& t : terms_) v += t.coef * x[t.var];
  return v;
}

LinearExpr LinearExpr::compacted() const {
  std::vector<Term> sorted = terms_;
  std::sort(sorted.begin(), sorted.end(), [](const Term& a, const Term& b) { return a.var < b.var; });
  LinearExpr out(constant_);
  for (std::size_t k = 0; k < sorted.size();) {
    double c = 0.0;
    const int v = sorted[k].var;
    while (k < sorted.size() && sorted[k].var == v) c += sorted[k++].coef;
    if (c != 0.0) out.terms_.push_back({v, c});
  }
  return out;
}

LinearExpr operator+(LinearExpr a, const LinearExpr& b) { return a += b; }
LinearExpr operator-(LinearExpr a, const LinearExpr& b) { return a -= b; }
LinearExpr operator*(double s, LinearExpr a) { return a *= s; }

VarBlock ConicProgram::add_variables(const std::string& name, int count, double lower, double upper) {
  if (count < 0) throw std::invalid_argument("negative variable count for block " + name);
  VarBlock block{name, num_variables(), count};
  lower_.insert(lower_.end(), count, lower);
  upper_.insert(upper_.end(), count, upper);
  linear_objective_.insert(linear_objective_.end(), count, 0.0);
  blocks_.push_back(block);
  return block;
}

void ConicProgram::set_bounds(int var, double lower, double upper) {
  lower_.at(var) = lower;
  upper_.at(var) = upper;
}

int ConicProgram::add_linear(LinearExpr expr, Sense sense, double rhs, std::string group) {
  for (const auto& t : expr.terms())
    if (t.var < 0 || t.var >= num_variables()) throw std::out_of_range("linear row references unknown variable");
  linear_.push_back({expr.compacted(), sense, rhs, std::move(group)});
  return static_cast<int>(linear_.size()) - 1;
}

int ConicProgram::add_soc(LinearExpr t, std::vector<LinearExpr> y, std::string group) {
  auto check = [this](const LinearExpr& e) {
    for (const auto& term : e.terms())
      if (term.var < 0 || term.var >= num_variables()) throw std::out_of_range("cone references unknown variable");
  };
  check(t);
  for (auto& e : y) {
    check(e);
    e = e.compacted();
  }
  soc_.push_back({t.compacted(), std::move(y), std::move(group)});
  return static_cast<int>(soc_.size()) - 1;
}

void ConicProgram::add_quadratic(int i, int j, double v) {
  if (i < 0 || j < 0 || i >= num_variables() || j >= num_variables())
    throw std::out_of_range("quadratic term references unknown variable");
  if (v == 0.0) return;
  if (i > j) std::swap(i, j);
  quad_.push_back({i, j, v});
}

void ConicProgram::add_linear_objective(int var, double c) { linear_objective_.at(var) += c; }

const VarBlock* ConicProgram::find_block(const std::string& name) const {
  for (const auto& b : blocks_)
    if (b.name == name) return &b;
  return nullptr;
}

double ConicProgram::objective_value(const std::vector<double>& x) const {
  double v = objective_constant_;
  for (const auto& q : quad_) v += q.v * x[q.i] * x[q.j];
  for (int k = 0; k < num_variables(); ++k) v += linear_objective_[k] * x[k];
  return v;
}

double ConicProgram::max_violation(const std::vector<double>& x) const {
  double worst = 0.0;
  for (int k = 0; k < num_variables(); ++k) {
    worst = std::max(worst, lower_[k] - x[k]);
    worst = std::max(worst, x[k] - upper_[k]);
  }
  for (const auto& row : linear_) {
    const double lhs = row.expr.evaluate(x);
    switch (row.sense) {
      case Sense::kLessEqual: worst = std::max(worst, lhs - row.rhs); break;
      case Sense::kGreaterEqual: worst = std::max(worst, row.rhs - lhs); break;
      case Sense::kEqual: worst = std::max(worst, std::abs(lhs - row.rhs)); break;
    }
  }
  for (const auto& cone : soc_) {
    double sq = 0.0;
    for (const auto& e : cone.y) {
      const double v = e.evaluate(x);
      sq += v * v;
    }
    worst = std::max(worst, std::sqrt(sq) - cone.t.evaluate(x));
  }
  return worst;
}

ConicProgram ConicProgram::without_cones() const {
  ConicProgram copy = *this;
  copy.soc_.clear();
  return copy;
}

const char* to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::kOptimal: return "optimal";
    case SolveStatus::kInfeasible: return "infeasible";
    case SolveStatus::kUnbounded: return "unbounded";
    case SolveStatus::kNumericFailure: return "numeric_failure";
    case SolveStatus::kIterationLimit: return "iteration_limit";
  }
  return "unknown";
}

namespace {

void write_expr(const LinearExpr& e, std::ostream& out) {
  for (const auto& t : e.terms()) out << ' ' << t.coef << "*x" << t.var;
  out << " + " << e.constant();
}

}  // namespace

void dump_program(const ConicProgram& program, std::ostream& out) {
  const auto old_precision = out.precision();
  out << std::setprecision(17);
  out << "VARIABLES " << program.num_variables() << '\n';
  for (const auto& b : program.blocks()) out << "BLOCK " << b.name << ' ' << b.offset << ' ' << b.size << '\n';
  for (int k = 0; k < program.num_variables(); ++k)
    out << "BOUND x" << k << ' ' << program.lower()[k] << ' ' << program.upper()[k] << '\n';
  out << "OBJECTIVE CONSTANT " << program.objective_constant() << '\n';
  for (int k = 0; k < program.num_variables(); ++k)
    if (program.linear_objective()[k] != 0.0) out << "OBJECTIVE LINEAR x" << k << ' ' << program.linear_objective()[k] << '\n';
  for (const auto& q : program.quadratic_terms())
    out << "OBJECTIVE QUAD x" << q.i << " x" << q.j << ' ' << q.v << '\n';
  for (const auto& row : program.linear_constraints()) {
    out << "ROW";
    if (!row.group.empty()) out << " [" << row.group << ']';
    write_expr(row.expr, out);
    out << (row.sense == Sense::kLessEqual ? " <= " : row.sense == Sense::kEqual ? " = " : " >= ") << row.rhs << '\n';
  }
  for (const auto& cone : program.soc_constraints()) {
    out << "SOC";
    if (!cone.group.empty()) out << " [" << cone.group << ']';
    out << " t:";
    write_expr(cone.t, out);
    for (const auto& y : cone.y) {
      out << " | y:";
      write_expr(y, out);
    }
    out << '\n';
  }
  out.precision(old_precision);
}

}  // namespace vaopf::conic
