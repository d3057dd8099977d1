#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "vaopf/grid.hpp"
#include "vaopf/linalg.hpp"

namespace vaopf {

/// Fluctuations omega live on the source buses only; omega has covariance
/// `omega` (|S| x |S|) and mean `mu`.
struct StochasticModel {
  std::vector<int> sources;
  Eigen::VectorXd mu;
  Eigen::MatrixXd omega;
  std::vector<int> participants;

  int num_sources() const { return static_cast<int>(sources.size()); }
  int num_participants() const { return static_cast<int>(participants.size()); }
  /// Position of bus in sources, or -1.
  int source_index(int bus) const;
  int participant_index(int bus) const;
  /// n-vector with mu on the source buses.
  Eigen::VectorXd mean_injection(int num_buses) const;
};

struct CovarianceCheck {
  bool ok = true;
  bool clipped = false;
  double min_eigenvalue = 0.0;
  std::string message;
};

/// Symmetry and PSD test at tolerance 1e-10 * ||omega||.
CovarianceCheck check_covariance(const Eigen::MatrixXd& omega);

/// L with omega = L L^T, from the eigendecomposition; columns with zero
/// eigenvalue are dropped and small negative eigenvalues clipped.
Eigen::MatrixXd covariance_factor(const Eigen::MatrixXd& omega);

/// Throws std::invalid_argument when the model is inconsistent with the grid.
void check_model(const StochasticModel& model, const Grid& grid);

/// Copies model means into Bus::stochastic_mean.
void apply_means(Grid& grid, const StochasticModel& model);

/// JSON with sources [{bus, mean, std}], correlation (matrix or "identity")
/// and participants [bus]; bus numbers are MATPOWER labels.
StochasticModel parse_stochastic_json(const std::string& text, const Grid& grid);
StochasticModel load_stochastic(const std::string& path, const Grid& grid);
std::string stochastic_to_json(const StochasticModel& model, const Grid& grid);

/// Participation factors alpha(i, j) for participant i and source j.
struct ParticipationMatrix {
  std::vector<int> participants;
  std::vector<int> sources;
  Eigen::MatrixXd alpha;

  /// alpha at (participant bus, source bus); 0 outside R x S.
  double at(int participant_bus, int source_bus) const;
  /// |S|-vector of the row for a bus (zero when the bus does not participate).
  Eigen::VectorXd row_for_bus(int bus) const;
  /// Full n x n matrix.
  Eigen::MatrixXd dense(int num_buses) const;

  /// alpha_ij = 1/|R| for every source.
  static ParticipationMatrix uniform(const StochasticModel& model);
  static ParticipationMatrix zeros(const StochasticModel& model);
};

/// Convex combination (1 - t) a + t b.
ParticipationMatrix blend(const ParticipationMatrix& a, const ParticipationMatrix& b, double t);

enum class ParticipationPolicy { kFree, kGlobal };

struct PatternK {
  ParticipationPolicy policy = ParticipationPolicy::kFree;
  bool nonnegative = false;
  std::optional<double> lower;
  std::optional<double> upper;
};

struct ParticipationReport {
  bool ok = true;
  std::vector<std::string> violations;
};

/// Each source column must sum to 1 (so sum_i p_i(omega) stays balanced).
ParticipationReport validate_participation(const ParticipationMatrix& A, const PatternK& pattern = {},
                                           double tol = 1e-9);

struct GammaMatrices {
  Eigen::MatrixXd D;      // n x |S|
  Eigen::MatrixXd gamma;  // m x |S|
};

GammaMatrices gamma_matrix(const SusceptanceSystem& sys, const ParticipationMatrix& A);

enum class VarianceMethod { kGammaForm, kPiForm };

class VarianceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Per-line flow variance b^2 gamma omega gamma^T (or the pi form).
Eigen::VectorXd line_variances(const SusceptanceSystem& sys, const ParticipationMatrix& A,
                               const Eigen::MatrixXd& omega, VarianceMethod method = VarianceMethod::kGammaForm);

struct GenerationStats {
  double variance = 0.0;
  double expected_cost = 0.0;
};

/// Var(p_i) = A_i omega A_i^T; E c_i = c0 (p^2 + Var) + c1 p + c2.
GenerationStats generation_stats(const Eigen::VectorXd& alpha_row, const Eigen::MatrixXd& omega,
                                 const Generator& gen, double p_bar);

/// Standard normal quantile at 1 - epsilon.
double nu_from_epsilon(double epsilon);

}  // namespace vaopf
