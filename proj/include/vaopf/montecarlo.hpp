#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "vaopf/opf.hpp"

namespace vaopf {

/// Samples are drawn in chunks of this size; chunk c uses its own stream
/// seeded from (seed, c), so results do not depend on the worker count.
constexpr int kSampleChunk = 4096;

struct SampleBatch {
  Eigen::MatrixXd omega;  // N x |S|
  std::uint64_t seed = 0;
  std::string distribution = "gaussian";
};

/// Zero-mean Gaussian draws with covariance omega via the symmetric square
/// root. Throws std::invalid_argument if omega is not PSD.
SampleBatch sample_omega(const StochasticModel& stoch, long n_samples, std::uint64_t seed, int threads = 0);

/// Count, mean and M2 with exact pairwise merge.
struct RunningStat {
  long count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x);
  void merge(const RunningStat& other);
  double variance() const { return count > 1 ? m2 / static_cast<double>(count - 1) : 0.0; }
};

struct EmpiricalStats {
  long samples = 0;
  std::vector<RunningStat> line_flow;
  std::vector<double> line_violation_rate;  // |f| > fmax
  std::vector<RunningStat> gen_output;
  std::vector<double> gen_violation_rate;   // outside [p_min, p_max]
  RunningStat cost;                         // total generation cost
  double max_imbalance = 0.0;
};

class ImbalanceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Propagates each draw through p(w) = p_bar - A w and the DC flows.
EmpiricalStats simulate(const Grid& grid, const SusceptanceSystem& sys, const StochasticModel& stoch,
                        const DispatchSolution& solution, const SampleBatch& batch, int threads = 0);

struct LineViolation {
  int line = 0;
  double rate = 0.0;
  double epsilon = 0.0;
  double threshold = 0.0;
  bool flagged = false;
};

struct ViolationReport {
  std::vector<LineViolation> lines;
  int flagged = 0;
};

/// epsilon = 1 - Phi(nu); flags lines whose rate exceeds epsilon + 3 sqrt(epsilon / N).
ViolationReport violation_report(const EmpiricalStats& stats, const Grid& grid, const std::vector<double>& nu);
/// Uses each line's safety parameter.
ViolationReport violation_report(const EmpiricalStats& stats, const Grid& grid);

/// line_id (1-based), mean, variance, violation_rate.
std::string stats_to_csv(const EmpiricalStats& stats);
std::string stats_to_json(const EmpiricalStats& stats, const ViolationReport& report, std::uint64_t seed);

}  // namespace vaopf
