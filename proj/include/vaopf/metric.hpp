#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "vaopf/grid.hpp"

namespace vaopf {

enum class MetricModel {
  kSum,            // model I: every line
  kTopFlow,        // II.1: N lines with largest |f|
  kTopVariance,    // II.2: N lines with largest s^2
  kLogBarrier,     // III
  kComposite,      // top-N flows plus the nearly binding lines
};

enum class WeightPreset { kUnit, kInverseLimitSquared, kCustom };

/// Delta(f, s^2) = sum over F of psi_ij s_ij^2 (models I, II, composite) or
/// -sum rho_ij log(s_ij^2 - floor_ij) (model III).
struct MetricSpec {
  MetricModel model = MetricModel::kSum;
  WeightPreset weights = WeightPreset::kUnit;
  std::vector<double> psi;  // used with kCustom
  int N = 100;
  std::vector<double> rho;  // model III; empty means 1 everywhere
  double tau = 0.1;         // nearly-binding threshold for kComposite
};

/// Parses "I", "II.1:N=5", "II.2:N=5", "III", "composite:N=100", with an
/// optional ",weights=unit|inverse_limit_squared" suffix.
MetricSpec parse_metric(const std::string& text);
std::string to_string(const MetricSpec& spec);

/// Only models I and II.1 satisfy the shifting assumptions; composite is
/// allowed with monotonicity reported, not asserted.
bool shift_supported(const MetricSpec& spec);

std::vector<double> metric_weights(const MetricSpec& spec, const Grid& grid);

/// { ij : |f_ij| + nu_ij s_ij >= (1 - tau) fmax_ij }
std::vector<int> tight_lines(const Grid& grid, const Eigen::VectorXd& f_bar, const Eigen::VectorXd& s2, double tau);

/// Ordered line set F; ties broken by lower line index.
std::vector<int> select_F(const MetricSpec& spec, const Grid& grid, const Eigen::VectorXd& f_bar,
                          const Eigen::VectorXd& s2);

/// floor is b^2 gamma omega gamma^T per line; model III returns +inf without
/// a strict gap.
double metric_eval(const MetricSpec& spec, const Grid& grid, const Eigen::VectorXd& f_bar, const Eigen::VectorXd& s2,
                   const Eigen::VectorXd* floor = nullptr);

}  // namespace vaopf
