#include <Eigen/SparseCholesky>
#include <cmath>
#include <sstream>

#include "vaopf/linalg.hpp"

namespace vaopf {

struct SusceptanceSystem::Factor {
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
};

SusceptanceSystem::SusceptanceSystem(const Grid& grid) : SusceptanceSystem(grid, grid.slack_bus) {}

SusceptanceSystem::SusceptanceSystem(const Grid& grid, int reduction_bus)
    : n_(grid.num_buses()), reduction_bus_(reduction_bus), lines_(grid.lines), factor_(std::make_unique<Factor>()) {
  if (n_ == 0) throw SingularSystemError("grid has no buses");
  if (reduction_bus < 0 || reduction_bus >= n_) throw SingularSystemError("reduction bus out of range");
  std::vector<Eigen::Triplet<double>> trip;
  for (const auto& l : lines_) {
    const double b = l.susceptance();
    trip.emplace_back(l.from_bus, l.from_bus, b);
    trip.emplace_back(l.to_bus, l.to_bus, b);
    trip.emplace_back(l.from_bus, l.to_bus, -b);
    trip.emplace_back(l.to_bus, l.from_bus, -b);
  }
  B_.resize(n_, n_);
  B_.setFromTriplets(trip.begin(), trip.end());

  if (n_ == 1) return;
  // B-hat: drop the reduction row/column.
  std::vector<Eigen::Triplet<double>> red;
  for (int c = 0; c < B_.outerSize(); ++c)
    for (Eigen::SparseMatrix<double>::InnerIterator it(B_, c); it; ++it) {
      const int r = static_cast<int>(it.row()), col = static_cast<int>(it.col());
      if (r == reduction_bus_ || col == reduction_bus_) continue;
      red.emplace_back(r > reduction_bus_ ? r - 1 : r, col > reduction_bus_ ? col - 1 : col, it.value());
    }
  Eigen::SparseMatrix<double> bhat(n_ - 1, n_ - 1);
  bhat.setFromTriplets(red.begin(), red.end());
  factor_->ldlt.compute(bhat);
  if (factor_->ldlt.info() != Eigen::Success) throw SingularSystemError("B-hat factorization failed");
  const Eigen::VectorXd d = factor_->ldlt.vectorD();
  const double scale = d.cwiseAbs().maxCoeff();
  if (d.minCoeff() <= 1e-12 * scale) throw SingularSystemError("B-hat is singular (disconnected grid)");
}

SusceptanceSystem::~SusceptanceSystem() = default;

Eigen::VectorXd SusceptanceSystem::solve(const Eigen::VectorXd& rhs) const {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n_);
  if (n_ == 1) return x;
  Eigen::VectorXd r(n_ - 1);
  for (int k = 0, j = 0; k < n_; ++k)
    if (k != reduction_bus_) r[j++] = rhs[k];
  const Eigen::VectorXd y = factor_->ldlt.solve(r);
  for (int k = 0, j = 0; k < n_; ++k)
    if (k != reduction_bus_) x[k] = y[j++];
  return x;
}

Eigen::VectorXd SusceptanceSystem::breve_row(int bus) const {
  {
    std::lock_guard<std::mutex> lock(cache_mutex_);
    const auto it = row_cache_.find(bus);
    if (it != row_cache_.end()) return it->second;
  }
  // B-breve is symmetric, so row i equals column i = B-breve e_i.
  Eigen::VectorXd e = Eigen::VectorXd::Zero(n_);
  if (bus != reduction_bus_) e[bus] = 1.0;
  Eigen::VectorXd row = solve(e);
  std::lock_guard<std::mutex> lock(cache_mutex_);
  return row_cache_.emplace(bus, std::move(row)).first->second;
}

Eigen::VectorXd SusceptanceSystem::line_factor(int line) const {
  const auto& l = lines_.at(line);
  return breve_row(l.from_bus) - breve_row(l.to_bus);
}

Eigen::VectorXd SusceptanceSystem::angles(const Eigen::VectorXd& injections) const { return solve(injections); }

Eigen::VectorXd SusceptanceSystem::flows_from_angles(const Eigen::VectorXd& theta) const {
  Eigen::VectorXd f(num_lines());
  for (int l = 0; l < num_lines(); ++l)
    f[l] = lines_[l].susceptance() * (theta[lines_[l].from_bus] - theta[lines_[l].to_bus]);
  return f;
}

Eigen::VectorXd SusceptanceSystem::dc_flows(const Eigen::VectorXd& injections, FlowMethod method, double tol) const {
  if (injections.size() != n_) throw std::invalid_argument("injection vector has wrong size");
  const double sum = injections.sum();
  if (std::abs(sum) > tol * (1.0 + injections.cwiseAbs().sum())) {
    std::ostringstream msg;
    msg << "injections are unbalanced by " << sum;
    throw UnbalancedInjectionError(msg.str());
  }
  if (method == FlowMethod::kTheta) return flows_from_angles(angles(injections));
  Eigen::VectorXd f(num_lines());
  for (int l = 0; l < num_lines(); ++l) f[l] = lines_[l].susceptance() * line_factor(l).dot(injections);
  return f;
}

}  // namespace vaopf
