#include <gtest/gtest.h>

#include <boost/math/distributions/normal.hpp>

#include "test_util.hpp"
#include "vaopf/figure1.hpp"
#include "vaopf/montecarlo.hpp"

namespace vaopf {
namespace {

using testing::make_gen;

TEST(Sampling, ZeroCovarianceGivesZeros) {
  StochasticModel m = testing::single_source(0, {1}, 0.0);
  const SampleBatch b = sample_omega(m, 1000, 3);
  EXPECT_EQ(b.omega.rows(), 1000);
  EXPECT_EQ(b.omega.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Sampling, IdentityCovariance) {
  StochasticModel m;
  m.sources = {0, 1};
  m.participants = {2};
  m.mu = Eigen::Vector2d::Zero();
  m.omega = Eigen::Matrix2d::Identity();
  const SampleBatch b = sample_omega(m, 100000, 11);
  const Eigen::RowVector2d mean = b.omega.colwise().mean();
  const Eigen::MatrixXd c = b.omega.transpose() * b.omega / static_cast<double>(b.omega.rows());
  EXPECT_LT(mean.cwiseAbs().maxCoeff(), 0.02);
  EXPECT_NEAR(c(0, 0), 1.0, 0.02);
  EXPECT_NEAR(c(1, 1), 1.0, 0.02);
  EXPECT_NEAR(c(0, 1), 0.0, 0.02);
}

TEST(Sampling, RankOneDrawsAreParallel) {
  StochasticModel m;
  m.sources = {0, 1};
  m.participants = {2};
  m.mu = Eigen::Vector2d::Zero();
  m.omega = Eigen::Vector2d(1.0, 2.0) * Eigen::RowVector2d(1.0, 2.0);
  const SampleBatch b = sample_omega(m, 5000, 5);
  for (long i = 0; i < b.omega.rows(); ++i) EXPECT_NEAR(b.omega(i, 1), 2.0 * b.omega(i, 0), 1e-9 * (1 + std::abs(b.omega(i, 0))));
}

TEST(Sampling, RejectsIndefinite) {
  StochasticModel m;
  m.sources = {0, 1};
  m.participants = {2};
  m.mu = Eigen::Vector2d::Zero();
  m.omega.resize(2, 2);
  m.omega << 1.0, 2.0, 2.0, 1.0;
  EXPECT_THROW(sample_omega(m, 10, 1), std::invalid_argument);
}

TEST(RunningStat, MergeMatchesSequential) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> z(5.0, 2.0);
  RunningStat all, a, b;
  for (int i = 0; i < 1000; ++i) {
    const double x = z(rng);
    all.add(x);
    (i < 377 ? a : b).add(x);
  }
  a.merge(b);
  EXPECT_EQ(a.count, all.count);
  EXPECT_NEAR(a.mean, all.mean, 1e-12);
  EXPECT_NEAR(a.variance(), all.variance(), 1e-10);
}

// Source at bus 1 with mean 9 against a load of 9 at bus 2; bus 3 absorbs.
struct Cycle {
  Grid grid;
  StochasticModel stoch;
  DispatchSolution sol;
  SusceptanceSystem sys;

  explicit Cycle(double limit0, double c0 = 0.0)
      : grid(make()), stoch(testing::single_source(0, {2}, 1.0, 9.0)), sys(grid) {
    grid.lines[0].limit = limit0;
    grid.generators[0].cost_c0 = c0;
    sol.p_bar = Eigen::VectorXd::Zero(3);
    sol.A = testing::participation(stoch, Eigen::MatrixXd::Constant(1, 1, 1.0));
  }
  static Grid make() {
    Grid g = testing::three_cycle(1e6);
    g.buses[1].load = 9.0;
    g.generators.push_back(make_gen(2, 2.0, 1e6, -1e6));
    return g;
  }
};

TEST(Simulate, ZeroBatchIsMeanFlow) {
  Cycle c(1e6);
  SampleBatch b;
  b.omega = Eigen::MatrixXd::Zero(10, 1);
  const EmpiricalStats st = simulate(c.grid, c.sys, c.stoch, c.sol, b);
  EXPECT_NEAR(st.line_flow[0].mean, 6.0, 1e-12);
  EXPECT_NEAR(st.line_flow[1].mean, 3.0, 1e-12);
  EXPECT_NEAR(st.line_flow[2].mean, -3.0, 1e-12);
  EXPECT_EQ(st.line_flow[0].variance(), 0.0);
}

TEST(Simulate, FlowVarianceWithinInterval) {
  Cycle c(1e6);
  const long N = 200000;
  const EmpiricalStats st = simulate(c.grid, c.sys, c.stoch, c.sol, sample_omega(c.stoch, N, 9));
  // the sample variance of a Gaussian has sd sigma^2 sqrt(2 / (N - 1))
  const double v = 1.0 / 9.0;
  EXPECT_NEAR(st.line_flow[0].variance(), v, 4.0 * v * std::sqrt(2.0 / (N - 1)));
  EXPECT_NEAR(st.line_flow[1].variance(), 4.0 * v, 4.0 * 4.0 * v * std::sqrt(2.0 / (N - 1)));
  EXPECT_LT(st.max_imbalance, 1e-9);
}

TEST(Simulate, ViolationRates) {
  const long N = 200000;
  {
    Cycle c(1e6);
    const EmpiricalStats st = simulate(c.grid, c.sys, c.stoch, c.sol, sample_omega(c.stoch, N, 1));
    EXPECT_EQ(st.line_violation_rate[0], 0.0);
  }
  {
    Cycle c(6.0 + 3.0 / 3.0);
    const EmpiricalStats st = simulate(c.grid, c.sys, c.stoch, c.sol, sample_omega(c.stoch, N, 2));
    const double eps = 1.0 - boost::math::cdf(boost::math::normal(), 3.0);
    EXPECT_NEAR(st.line_violation_rate[0], eps, 4.0 * std::sqrt(eps / N));
    const ViolationReport rep = violation_report(st, c.grid, std::vector<double>(3, 3.0));
    EXPECT_FALSE(rep.lines[0].flagged);
    EXPECT_NEAR(rep.lines[0].epsilon, eps, 1e-12);
    EXPECT_NEAR(rep.lines[0].threshold, eps + 3.0 * std::sqrt(eps / N), 1e-12);
  }
  {
    Cycle c(6.0);
    const EmpiricalStats st = simulate(c.grid, c.sys, c.stoch, c.sol, sample_omega(c.stoch, N, 3));
    EXPECT_NEAR(st.line_violation_rate[0], 0.5, 4.0 * std::sqrt(0.25 / N));
    EXPECT_FALSE(violation_report(st, c.grid, std::vector<double>(3, 0.0)).lines[0].flagged);
    EXPECT_TRUE(violation_report(st, c.grid, std::vector<double>(3, 3.0)).lines[0].flagged);
  }
}

TEST(Simulate, UnbalancedParticipationThrows) {
  Cycle c(1e6);
  c.sol.A->alpha(0, 0) = 0.5;
  EXPECT_THROW(simulate(c.grid, c.sys, c.stoch, c.sol, sample_omega(c.stoch, 100, 1)), ImbalanceError);
}

TEST(Simulate, DeterministicAcrossThreadCounts) {
  Cycle c(7.0);
  const SampleBatch b1 = sample_omega(c.stoch, 50000, 42, 1);
  const SampleBatch b4 = sample_omega(c.stoch, 50000, 42, 4);
  EXPECT_TRUE(b1.omega == b4.omega);
  const EmpiricalStats s1 = simulate(c.grid, c.sys, c.stoch, c.sol, b1, 1);
  const EmpiricalStats s4 = simulate(c.grid, c.sys, c.stoch, c.sol, b4, 4);
  for (int l = 0; l < 3; ++l) {
    EXPECT_EQ(s1.line_flow[l].mean, s4.line_flow[l].mean);
    EXPECT_EQ(s1.line_flow[l].m2, s4.line_flow[l].m2);
    EXPECT_EQ(s1.line_violation_rate[l], s4.line_violation_rate[l]);
  }
  EXPECT_EQ(stats_to_csv(s1), stats_to_csv(s4));
}

TEST(Simulate, ExpectedCostMatchesClosedForm) {
  Cycle c(1e6, 0.5);
  c.sol.p_bar[2] = 4.0;
  c.grid.buses[1].load = 13.0;
  const long N = 200000;
  const EmpiricalStats st = simulate(c.grid, c.sys, c.stoch, c.sol, sample_omega(c.stoch, N, 5));
  const GenerationStats gs = generation_stats(c.sol.A->alpha.row(0).transpose(), c.stoch.omega, c.grid.generators[0], 4.0);
  EXPECT_NEAR(gs.variance, 1.0, 1e-15);
  EXPECT_NEAR(gs.expected_cost, 0.5 * 17.0 + 8.0, 1e-12);
  EXPECT_NEAR(st.cost.mean, gs.expected_cost, 4.0 * std::sqrt(st.cost.variance() / N));
  EXPECT_NEAR(st.gen_output[0].variance(), 1.0, 0.02);
}

TEST(Simulate, Figure1CandidateFlowVariance) {
  const Figure1Params p;
  const Figure1Case fc = make_figure1_case(p);
  const SusceptanceSystem sys(fc.grid);
  const Figure1Candidate cand = figure1_candidate(fc, p);
  DispatchSolution sol;
  sol.p_bar = cand.p_bar;
  sol.A = cand.A;
  const long N = 100000;
  const EmpiricalStats st = simulate(fc.grid, sys, fc.stoch, sol, sample_omega(fc.stoch, N, 8));
  const double s2 = p.sigma * p.sigma;
  EXPECT_NEAR(line_variances(sys, cand.A, fc.stoch.omega)[fc.line_ab], s2, 1e-6 * s2);
  EXPECT_NEAR(st.line_flow[fc.line_ab].variance(), s2, 4.0 * s2 * std::sqrt(2.0 / (N - 1)));
  EXPECT_LT(st.line_flow[fc.line_0a].variance(), 1e-12 * s2);
}

}  // namespace
}  // namespace vaopf
