#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace vaopf {

struct Bus {
  int id = 0;        // 0-based internal index
  long label = 0;    // original BUS_I
  double load = 0.0; // MW
  double stochastic_mean = 0.0;

  bool operator==(const Bus&) const = default;
};

struct Line {
  int from_bus = 0;
  int to_bus = 0;
  double reactance = 1.0;
  double limit = 0.0;  // MW
  double safety_param = 3.0;

  double susceptance() const { return 1.0 / reactance; }
  bool operator==(const Line&) const = default;
};

/// Cost c(p) = cost_c0 p^2 + cost_c1 p + cost_c2.
struct Generator {
  int bus = 0;
  double p_min = 0.0;
  double p_max = 0.0;
  double cost_c0 = 0.0;
  double cost_c1 = 0.0;
  double cost_c2 = 0.0;
  bool participating = true;
  double safety_param = 3.0;

  double cost(double p) const { return cost_c0 * p * p + cost_c1 * p + cost_c2; }
  bool operator==(const Generator&) const = default;
};

struct Grid {
  std::vector<Bus> buses;
  std::vector<Line> lines;
  std::vector<Generator> generators;
  int slack_bus = 0;
  double base_mva = 100.0;  // recorded, unused (all quantities in MW)

  int num_buses() const { return static_cast<int>(buses.size()); }
  int num_lines() const { return static_cast<int>(lines.size()); }
  /// Index into generators, or -1.
  int generator_at(int bus) const;
  std::vector<double> loads() const;
  double total_load() const;

  bool operator==(const Grid&) const = default;
};

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MatpowerOptions {
  /// Original BUS_I label of the slack bus; defaults to the highest-index bus.
  std::optional<long> slack_label;
  double line_safety_param = 3.0;
  double generator_safety_param = 3.0;
};

/// Parses the MATPOWER subset: mpc.baseMVA and the bus/branch/gen/gencost
/// matrix blocks. Branches with BR_STATUS = 0 are dropped and RATE_A = 0
/// becomes 100 x (total load).
Grid parse_matpower(const std::string& text, const MatpowerOptions& options = {});
Grid load_matpower(const std::string& path, const MatpowerOptions& options = {});
std::string write_matpower(const Grid& grid);

double unlimited_line_limit(double total_load);

struct Violation {
  std::string code;
  std::string message;
};

struct ValidationReport {
  bool ok = true;
  std::vector<Violation> violations;
  std::optional<double> balance_residual;

  bool has(const std::string& code) const;
};

/// Structural checks; with a dispatch (n-vector of p-bar) also the balance
/// residual sum_i (p - d + mu)_i.
ValidationReport validate(const Grid& grid, std::optional<std::span<const double>> dispatch = std::nullopt,
                          double balance_tol = 1e-6);

bool is_connected(const Grid& grid);

}  // namespace vaopf
