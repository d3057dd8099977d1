#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "json.hpp"
#include "vaopf/figure1.hpp"
#include "vaopf/montecarlo.hpp"
#include "vaopf/shift.hpp"
#include "vaopf/synthetic.hpp"

namespace fs = std::filesystem;
using namespace vaopf;

namespace {

enum Exit { kOk = 0, kInfeasibleOrViolation = 1, kInputError = 2, kSolverError = 3 };

class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Config {
  std::string case_path;
  std::string stoch_path;
  std::string out_dir = ".";
  std::uint64_t seed = 1;
  double tol = 1e-6;
  std::optional<long> slack;
  bool nonnegative = false;

  // solve
  std::string mode = "safety";
  // solve / shift reporting
  std::string metric = "composite:N=100";
  double tau = 0.1;
  // shift
  std::string solution_path;
  int K = 2;
  bool retry = false;
  bool no_gen_margins = false;
  // validate
  long samples = 100000;
  int threads = 0;
  // gen-fig1
  Figure1Params fig1;
  std::string variant = "unlimited";
  // gen-synthetic
  SyntheticOptions synth;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
}

Grid load_grid(const Config& c) {
  if (c.case_path.empty()) throw InputError("--case is required");
  if (!fs::exists(c.case_path)) throw InputError("case file not found: " + c.case_path);
  MatpowerOptions mo;
  mo.slack_label = c.slack;
  return load_matpower(c.case_path, mo);
}

StochasticModel load_stoch(const Config& c, const Grid& grid) {
  if (c.stoch_path.empty()) throw InputError("--stoch is required");
  if (!fs::exists(c.stoch_path)) throw InputError("stochastic file not found: " + c.stoch_path);
  StochasticModel m = load_stochastic(c.stoch_path, grid);
  check_model(m, grid);
  return m;
}

OpfOptions opf_options(const Config& c) {
  OpfOptions o;
  o.pattern.nonnegative = c.nonnegative;
  o.cutting.soc_tolerance = c.tol;
  return o;
}

int status_exit(conic::SolveStatus s) {
  switch (s) {
    case conic::SolveStatus::kOptimal: return kOk;
    case conic::SolveStatus::kInfeasible: return kInfeasibleOrViolation;
    default: return kSolverError;
  }
}

std::string fmt(double v, int prec = 6) {
  std::ostringstream s;
  s << std::setprecision(prec) << v;
  return s.str();
}

int cmd_solve(const Config& c) {
  const Grid grid = load_grid(c);
  const SusceptanceSystem sys(grid);
  DispatchSolution sol;
  std::optional<StochasticModel> stoch;
  if (c.mode == "dcopf") {
    if (!c.stoch_path.empty()) stoch = load_stoch(c, grid);
    conic::SolveOptions so;
    sol = solve_dcopf(grid, sys, stoch ? &*stoch : nullptr, so);
  } else if (c.mode == "safety" || c.mode == "safety-cutting-plane") {
    stoch = load_stoch(c, grid);
    OpfOptions o = opf_options(c);
    o.cutting_plane = c.mode == "safety-cutting-plane";
    sol = solve_safety_opf(grid, sys, *stoch, o);
  } else {
    throw InputError("unknown mode " + c.mode);
  }
  std::cout << "status: " << conic::to_string(sol.status) << "\n";
  if (!sol.optimal()) {
    if (!sol.message.empty()) std::cout << "message: " << sol.message << "\n";
    return status_exit(sol.status);
  }
  std::cout << "expected cost: " << fmt(sol.expected_cost, 10) << "\n";
  if (sol.A) {
    const MetricSpec spec = parse_metric(c.metric);
    std::cout << "variance metric (" << to_string(spec) << "): " << fmt(metric_eval(spec, grid, sol.f_bar, sol.s2), 10)
              << "\n";
    std::cout << "tight lines (tau=" << c.tau << "): " << tight_lines(grid, sol.f_bar, sol.s2, c.tau).size() << "\n";
  }
  if (c.mode == "safety-cutting-plane") std::cout << "cutting-plane rounds: " << sol.rounds << "\n";
  const fs::path out = fs::path(c.out_dir) / "solution.json";
  write_file(out, solution_to_json(sol, grid));
  std::cout << "wrote " << out.string() << "\n";
  return kOk;
}

int cmd_shift(const Config& c) {
  const Grid grid = load_grid(c);
  const StochasticModel stoch = load_stoch(c, grid);
  const SusceptanceSystem sys(grid);
  const OpfOptions o = opf_options(c);
  DispatchSolution start;
  if (!c.solution_path.empty()) {
    start = solution_from_json(read_file(c.solution_path), grid, stoch);
  } else {
    start = solve_safety_opf(grid, sys, stoch, o);
    if (!start.optimal()) {
      std::cout << "safety OPF: " << conic::to_string(start.status) << " " << start.message << "\n";
      return status_exit(start.status);
    }
  }
  if (!start.A) throw InputError("solution has no participation matrix");

  ProcedureOptions po;
  po.metric = parse_metric(c.metric);
  if (!shift_supported(po.metric)) throw InputError("metric " + c.metric + " cannot drive VShift");
  po.tau = c.tau;
  po.K = c.K;
  po.retry_after_stop = c.retry;
  po.opf = o;
  po.vshift.pattern = o.pattern;
  po.generator_margins_in_vshift = !c.no_gen_margins;
  if (!(c.tau > 0.0 && c.tau < 1.0)) throw InputError("--tau must lie in (0, 1)");
  if (c.K < 0) throw InputError("--K must be nonnegative");

  const ShiftTrace trace = run_procedure(grid, sys, stoch, start, po);
  std::cout << std::left << std::setw(4) << "k" << std::setw(18) << "cost" << std::setw(18) << "delta" << std::setw(14)
            << "lambda" << std::setw(6) << "|T|" << std::setw(8) << "tau" << "stop\n";
  for (const auto& r : trace.records)
    std::cout << std::setw(4) << r.k << std::setw(18) << fmt(r.cost, 10) << std::setw(18) << fmt(r.delta, 10)
              << std::setw(14) << (r.lambda ? fmt(*r.lambda) : "-") << std::setw(6) << r.tight_count << std::setw(8)
              << r.tau << (r.stop_reason.empty() ? "-" : r.stop_reason) << "\n";
  const auto& first = trace.records.front();
  const double d_final = metric_eval(po.metric, grid, trace.final.f_bar, trace.final.s2);
  std::cout << "stop: " << trace.stop_reason << "\n";
  if (first.delta != 0.0) std::cout << "metric reduction: " << fmt(100.0 * (first.delta - d_final) / first.delta) << "%\n";
  std::cout << "cost change: " << fmt(trace.final.expected_cost - first.cost, 10) << "\n";

  write_file(fs::path(c.out_dir) / "trace.jsonl", trace_to_jsonl(trace));
  write_file(fs::path(c.out_dir) / "shifted_solution.json", solution_to_json(trace.final, grid));
  if (auto cert = certify_stop(trace)) {
    nlohmann::ordered_json j;
    j["k"] = cert->k;
    j["delta_stop"] = cert->delta_stop;
    j["delta_rejected"] = cert->delta_rejected;
    write_file(fs::path(c.out_dir) / "certificate.json", j.dump(2) + "\n");
  }
  for (const auto& r : trace.records)
    if (r.stop_reason == "solver_failure") return kSolverError;
  return kOk;
}

int cmd_validate(const Config& c) {
  const Grid grid = load_grid(c);
  const StochasticModel stoch = load_stoch(c, grid);
  if (c.solution_path.empty()) throw InputError("--solution is required");
  const DispatchSolution sol = solution_from_json(read_file(c.solution_path), grid, stoch);
  if (c.samples <= 0) throw InputError("--samples must be positive");
  const SusceptanceSystem sys(grid);
  const SampleBatch batch = sample_omega(stoch, c.samples, c.seed, c.threads);
  const EmpiricalStats stats = simulate(grid, sys, stoch, sol, batch, c.threads);
  const ViolationReport rep = violation_report(stats, grid);
  write_file(fs::path(c.out_dir) / "validation.json", stats_to_json(stats, rep, c.seed));
  write_file(fs::path(c.out_dir) / "line_stats.csv", stats_to_csv(stats));
  std::cout << "samples: " << stats.samples << "\n";
  std::cout << "flagged lines: " << rep.flagged << "\n";
  for (const auto& v : rep.lines)
    if (v.flagged)
      std::cout << "  line " << v.line + 1 << ": rate " << fmt(v.rate) << " > threshold " << fmt(v.threshold) << "\n";
  return rep.flagged > 0 ? kInfeasibleOrViolation : kOk;
}

int cmd_gen_fig1(Config c) {
  if (c.variant == "limited") c.fig1.variant = Figure1Variant::kLimited;
  else if (c.variant == "unlimited") c.fig1.variant = Figure1Variant::kUnlimited;
  else throw InputError("unknown variant " + c.variant);
  const Figure1Case fc = make_figure1_case(c.fig1);
  write_file(fs::path(c.out_dir) / "fig1.m", write_matpower(fc.grid));
  write_file(fs::path(c.out_dir) / "fig1.json", stochastic_to_json(fc.stoch, fc.grid));
  std::cout << "buses: " << fc.grid.num_buses() << ", lines: " << fc.grid.num_lines() << "\n";
  return kOk;
}

int cmd_gen_synthetic(Config c) {
  Grid grid = load_grid(c);
  c.synth.seed = c.seed;
  const StochasticModel stoch = synthetic_sources(grid, c.synth);
  const DispatchSolution sol = synthetic_limits(grid, stoch, c.synth, opf_options(c));
  const std::string stem = fs::path(c.case_path).stem().string();
  write_file(fs::path(c.out_dir) / (stem + "_synthetic.m"), write_matpower(grid));
  write_file(fs::path(c.out_dir) / (stem + "_synthetic.json"), stochastic_to_json(stoch, grid));
  std::cout << "sources: " << stoch.num_sources() << ", participants: " << stoch.num_participants()
            << ", unlimited expected cost: " << fmt(sol.expected_cost, 10) << "\n";
  return kOk;
}

int cmd_stats(const Config& c) {
  const Grid grid = load_grid(c);
  const StochasticModel stoch = load_stoch(c, grid);
  const SusceptanceSystem sys(grid);
  const SafetyProgram sp = build_safety_opf(grid, sys, stoch, opf_options(c).pattern);
  const FormulationStats st = formulation_stats(sp);
  nlohmann::ordered_json j;
  j["buses"] = grid.num_buses();
  j["lines"] = grid.num_lines();
  j["participants"] = stoch.num_participants();
  j["sources"] = stoch.num_sources();
  j["alpha_vars"] = st.n_A_vars;
  j["D_vars"] = st.n_D_vars;
  j["gamma_vars"] = st.n_gamma_vars;
  j["other_vars"] = st.n_other_vars;
  j["D_coupling_nonzeros"] = st.nnz_D_constraints;
  j["conic_nonzeros"] = st.nnz_conic_constraints;
  j["D_row_nonzeros_built"] = st.nnz_D_rows_built;
  std::cout << j.dump(2) << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"safety-constrained DC optimal power flow with participation factors"};
  app.require_subcommand(1);
  app.fallthrough();
  Config c;
  app.add_option("--case", c.case_path, "MATPOWER case file");
  app.add_option("--stoch", c.stoch_path, "stochastic model JSON");
  app.add_option("--out", c.out_dir, "output directory");
  app.add_option("--seed", c.seed, "random seed");
  app.add_option("--tol", c.tol, "cone tolerance of the cutting-plane mode");
  app.add_option("--slack", c.slack, "slack bus label (default: highest-index bus)");
  app.add_flag("--nonnegative", c.nonnegative, "restrict participation factors to alpha >= 0");

  auto* solve = app.add_subcommand("solve", "solve a DC-OPF or safety-constrained OPF");
  solve->add_option("--mode", c.mode)->check(CLI::IsMember({"dcopf", "safety", "safety-cutting-plane"}));
  solve->add_option("--metric", c.metric, "variance metric to report");
  solve->add_option("--tau", c.tau, "tight-set threshold to report");

  auto* shift = app.add_subcommand("shift", "run the variance-shifting procedure");
  shift->add_option("--solution", c.solution_path, "start from this solution instead of solving");
  shift->add_option("--metric", c.metric, "I, II.1:N=.., II.2:N=.., composite:N=.. [,weights=..]");
  shift->add_option("--tau", c.tau);
  shift->add_option("--K", c.K, "iteration count");
  shift->add_flag("--retry-after-stop", c.retry, "halve tau and continue after a Step-5 stop");
  shift->add_flag("--no-gen-margins", c.no_gen_margins, "omit generator margins from VShift");

  auto* validate = app.add_subcommand("validate", "Monte-Carlo check of a solution");
  validate->add_option("--solution", c.solution_path)->required();
  validate->add_option("--samples", c.samples);
  validate->add_option("--threads", c.threads, "0 = hardware concurrency");

  auto* fig1 = app.add_subcommand("gen-fig1", "write the two-path example case");
  fig1->add_option("--k", c.fig1.k);
  fig1->add_option("--D", c.fig1.D);
  fig1->add_option("--L", c.fig1.L);
  fig1->add_option("--mu", c.fig1.mu);
  fig1->add_option("--sigma", c.fig1.sigma);
  fig1->add_option("--nu", c.fig1.nu);
  fig1->add_option("--c-quad", c.fig1.c_quad);
  fig1->add_option("--variant", c.variant)->check(CLI::IsMember({"unlimited", "limited"}));

  auto* synth = app.add_subcommand("gen-synthetic", "seeded sources and line limits for a MATPOWER case");
  synth->add_option("--sources", c.synth.sources);
  synth->add_option("--penetration", c.synth.penetration);
  synth->add_option("--cv", c.synth.cv);

  auto* stats = app.add_subcommand("stats", "formulation size of the safety-constrained OPF");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInputError;
  }

  try {
    if (*solve) return cmd_solve(c);
    if (*shift) return cmd_shift(c);
    if (*validate) return cmd_validate(c);
    if (*fig1) return cmd_gen_fig1(c);
    if (*synth) return cmd_gen_synthetic(c);
    if (*stats) return cmd_stats(c);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kInputError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kSolverError;
  }
  return kInputError;
}
