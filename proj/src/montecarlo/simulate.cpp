#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <random>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "vaopf/montecarlo.hpp"

namespace vaopf {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t chunk_seed(std::uint64_t seed, long chunk) {
  return splitmix64(splitmix64(seed) ^ static_cast<std::uint64_t>(chunk));
}

int worker_count(int requested, long chunks) {
  int t = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
  t = std::max(1, t);
  return static_cast<int>(std::min<long>(t, std::max<long>(chunks, 1)));
}

// Runs body(c) for every chunk index; chunks are handed out round-robin.
template <class F>
void for_chunks(long chunks, int threads, F body) {
  const int workers = worker_count(threads, chunks);
  if (workers == 1) {
    for (long c = 0; c < chunks; ++c) body(c);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      try {
        for (long c = w; c < chunks; c += workers) body(c);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

Eigen::MatrixXd symmetric_root(const Eigen::MatrixXd& omega) {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(omega);
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

void RunningStat::add(double x) {
  ++count;
  const double d = x - mean;
  mean += d / static_cast<double>(count);
  m2 += d * (x - mean);
}

void RunningStat::merge(const RunningStat& o) {
  if (o.count == 0) return;
  if (count == 0) {
    *this = o;
    return;
  }
  const double n = static_cast<double>(count + o.count);
  const double d = o.mean - mean;
  mean += d * static_cast<double>(o.count) / n;
  m2 += o.m2 + d * d * static_cast<double>(count) * static_cast<double>(o.count) / n;
  count += o.count;
}

SampleBatch sample_omega(const StochasticModel& stoch, long n_samples, std::uint64_t seed, int threads) {
  if (n_samples < 0) throw std::invalid_argument("sample count must be nonnegative");
  const CovarianceCheck cc = check_covariance(stoch.omega);
  if (!cc.ok) throw std::invalid_argument("covariance is not PSD: " + cc.message);
  const int S = stoch.num_sources();
  const Eigen::MatrixXd root = symmetric_root(stoch.omega);
  SampleBatch batch;
  batch.seed = seed;
  batch.omega.resize(n_samples, S);
  const long chunks = (n_samples + kSampleChunk - 1) / kSampleChunk;
  for_chunks(chunks, threads, [&](long c) {
    std::mt19937_64 rng(chunk_seed(seed, c));
    std::normal_distribution<double> normal;
    const long lo = c * kSampleChunk, hi = std::min(n_samples, lo + kSampleChunk);
    Eigen::VectorXd z(S);
    for (long i = lo; i < hi; ++i) {
      for (int k = 0; k < S; ++k) z[k] = normal(rng);
      batch.omega.row(i) = (root * z).transpose();
    }
  });
  return batch;
}

EmpiricalStats simulate(const Grid& grid, const SusceptanceSystem& sys, const StochasticModel& stoch,
                        const DispatchSolution& solution, const SampleBatch& batch, int threads) {
  const int n = grid.num_buses();
  const int m = grid.num_lines();
  const int G = static_cast<int>(grid.generators.size());
  const int S = stoch.num_sources();
  if (batch.omega.cols() != S) throw std::invalid_argument("sample width does not match the source count");
  if (solution.p_bar.size() != n) throw std::invalid_argument("solution dispatch has wrong size");
  const ParticipationMatrix A = solution.A ? *solution.A : ParticipationMatrix::zeros(stoch);

  // mean injections p - d + mu at every bus
  Eigen::VectorXd base = solution.p_bar + stoch.mean_injection(n);
  for (int i = 0; i < n; ++i) base[i] -= grid.buses[i].load;
  double load_scale = 1.0;
  for (int i = 0; i < n; ++i) load_scale += std::abs(base[i]) + grid.buses[i].load;

  struct Partial {
    std::vector<RunningStat> flow, gen;
    std::vector<long> line_viol, gen_viol;
    RunningStat cost;
    double imbalance = 0.0;
  };
  const long N = batch.omega.rows();
  const long chunks = (N + kSampleChunk - 1) / kSampleChunk;
  std::vector<Partial> parts(chunks);

  for_chunks(chunks, threads, [&](long c) {
    Partial& part = parts[c];
    part.flow.resize(m);
    part.gen.resize(G);
    part.line_viol.assign(m, 0);
    part.gen_viol.assign(G, 0);
    const long lo = c * kSampleChunk, hi = std::min(N, lo + kSampleChunk);
    Eigen::VectorXd inj(n);
    for (long s = lo; s < hi; ++s) {
      const Eigen::VectorXd w = batch.omega.row(s).transpose();
      const Eigen::VectorXd aw = A.alpha * w;
      inj = base;
      for (int k = 0; k < S; ++k) inj[stoch.sources[k]] += w[k];
      for (int r = 0; r < static_cast<int>(A.participants.size()); ++r) inj[A.participants[r]] -= aw[r];
      const double imbalance = std::abs(inj.sum());
      part.imbalance = std::max(part.imbalance, imbalance);
      if (imbalance > 1e-8 * load_scale) {
        std::ostringstream msg;
        msg << "sample " << s << " is unbalanced by " << imbalance << "; participation columns must sum to one";
        throw ImbalanceError(msg.str());
      }
      const Eigen::VectorXd f = sys.dc_flows(inj, FlowMethod::kTheta, 1e-8 * load_scale);
      for (int l = 0; l < m; ++l) {
        part.flow[l].add(f[l]);
        if (std::abs(f[l]) > grid.lines[l].limit) ++part.line_viol[l];
      }
      double cost = 0.0;
      for (int g = 0; g < G; ++g) {
        const auto& gen = grid.generators[g];
        const int r = stoch.participant_index(gen.bus);
        const double p = solution.p_bar[gen.bus] - (r >= 0 ? aw[r] : 0.0);
        part.gen[g].add(p);
        if (p < gen.p_min || p > gen.p_max) ++part.gen_viol[g];
        cost += gen.cost_c0 * p * p + gen.cost_c1 * p + gen.cost_c2;
      }
      part.cost.add(cost);
    }
  });

  EmpiricalStats out;
  out.samples = N;
  out.line_flow.resize(m);
  out.gen_output.resize(G);
  std::vector<long> lv(m, 0), gv(G, 0);
  for (const Partial& part : parts) {
    for (int l = 0; l < m; ++l) {
      out.line_flow[l].merge(part.flow[l]);
      lv[l] += part.line_viol[l];
    }
    for (int g = 0; g < G; ++g) {
      out.gen_output[g].merge(part.gen[g]);
      gv[g] += part.gen_viol[g];
    }
    out.cost.merge(part.cost);
    out.max_imbalance = std::max(out.max_imbalance, part.imbalance);
  }
  const double denom = N > 0 ? static_cast<double>(N) : 1.0;
  out.line_violation_rate.resize(m);
  for (int l = 0; l < m; ++l) out.line_violation_rate[l] = static_cast<double>(lv[l]) / denom;
  out.gen_violation_rate.resize(G);
  for (int g = 0; g < G; ++g) out.gen_violation_rate[g] = static_cast<double>(gv[g]) / denom;
  return out;
}

ViolationReport violation_report(const EmpiricalStats& stats, const Grid& grid, const std::vector<double>& nu) {
  if (nu.size() != stats.line_violation_rate.size()) throw std::invalid_argument("one nu per line expected");
  const boost::math::normal normal;
  ViolationReport rep;
  const double N = std::max<double>(1.0, static_cast<double>(stats.samples));
  for (std::size_t l = 0; l < nu.size(); ++l) {
    LineViolation v;
    v.line = static_cast<int>(l);
    v.rate = stats.line_violation_rate[l];
    v.epsilon = boost::math::cdf(boost::math::complement(normal, nu[l]));
    v.threshold = v.epsilon + 3.0 * std::sqrt(v.epsilon / N);
    v.flagged = v.rate > v.threshold;
    if (v.flagged) ++rep.flagged;
    rep.lines.push_back(v);
  }
  (void)grid;
  return rep;
}

ViolationReport violation_report(const EmpiricalStats& stats, const Grid& grid) {
  std::vector<double> nu;
  for (const auto& ln : grid.lines) nu.push_back(ln.safety_param);
  return violation_report(stats, grid, nu);
}

std::string stats_to_csv(const EmpiricalStats& stats) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "line_id,mean,variance,violation_rate\n";
  for (std::size_t l = 0; l < stats.line_flow.size(); ++l)
    out << l + 1 << ',' << stats.line_flow[l].mean << ',' << stats.line_flow[l].variance() << ','
        << stats.line_violation_rate[l] << '\n';
  return out.str();
}

std::string stats_to_json(const EmpiricalStats& stats, const ViolationReport& report, std::uint64_t seed) {
  nlohmann::ordered_json j;
  j["samples"] = stats.samples;
  j["seed"] = seed;
  j["flagged_lines"] = report.flagged;
  nlohmann::ordered_json lines = nlohmann::ordered_json::array();
  for (const auto& v : report.lines) {
    nlohmann::ordered_json e;
    e["line_id"] = v.line + 1;
    e["mean"] = stats.line_flow[v.line].mean;
    e["variance"] = stats.line_flow[v.line].variance();
    e["violation_rate"] = v.rate;
    e["epsilon"] = v.epsilon;
    e["threshold"] = v.threshold;
    e["flagged"] = v.flagged;
    lines.push_back(e);
  }
  j["lines"] = lines;
  nlohmann::ordered_json gens = nlohmann::ordered_json::array();
  for (std::size_t g = 0; g < stats.gen_output.size(); ++g)
    gens.push_back({{"generator", g + 1},
                    {"mean", stats.gen_output[g].mean},
                    {"variance", stats.gen_output[g].variance()},
                    {"violation_rate", stats.gen_violation_rate[g]}});
  j["generators"] = gens;
  j["cost_mean"] = stats.cost.mean;
  j["cost_variance"] = stats.cost.variance();
  j["max_imbalance"] = stats.max_imbalance;
  return j.dump(2) + "\n";
}

}  // namespace vaopf
