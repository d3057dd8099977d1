#include <gtest/gtest.h>

#include "json.hpp"
#include "test_util.hpp"
#include "vaopf/figure1.hpp"
#include "vaopf/shift.hpp"

namespace vaopf {
namespace {

using testing::make_gen;
using testing::participation;

TEST(Interpolate, RecoversCoefficients) {
  const Quadratic q = interpolate(1.0, 1.0 + 0.5 * 2.0 + 0.25 * 3.0, 6.0);
  EXPECT_NEAR(q.a, 3.0, 1e-14);
  EXPECT_NEAR(q.b, 2.0, 1e-14);
  EXPECT_NEAR(q.c, 1.0, 1e-14);
}

TEST(Interpolate, LineQuadraticsMatchDirectEvaluation) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const Grid g = testing::random_grid(rng, 12, 5);
    const SusceptanceSystem sys(g);
    const StochasticModel m = testing::random_model(rng, 12, 3, 4);
    const auto A0 = testing::random_participation(rng, m), A1 = testing::random_participation(rng, m);
    const auto qs = line_variance_quadratics(sys, m, A0, A1);
    for (int r = 0; r < 10; ++r) {
      const double t = u(rng);
      const Eigen::VectorXd v = line_variances(sys, blend(A0, A1, t), m.omega);
      for (int l = 0; l < g.num_lines(); ++l) EXPECT_NEAR(qs[l](t), v[l], 1e-10 * (1.0 + std::abs(v[l])));
    }
    for (const auto& q : qs) EXPECT_GE(q.a, -1e-12 * (1.0 + std::abs(q.c)));
  }
}

struct Cycle {
  Grid grid;
  StochasticModel stoch;
};

// source at bus 1, participants 1 and 3; generators with wide ranges
Cycle cycle_case() {
  Cycle c;
  c.grid = testing::three_cycle(1e6);
  c.grid.lines[0].limit = 1.0;
  c.grid.generators.push_back(make_gen(0, 1.0, 1e3, -1e3));
  c.grid.generators.push_back(make_gen(2, 1.0, 1e3, -1e3));
  c.stoch = testing::single_source(0, {0, 2}, 1.0);
  return c;
}

TEST(MaxStep, LinearBindingLine) {
  const Cycle c = cycle_case();
  const SusceptanceSystem sys(c.grid);
  const auto A_prev = participation(c.stoch, Eigen::Vector2d(1.0, 0.0));
  const auto A_hat = participation(c.stoch, Eigen::Vector2d(0.0, 1.0));
  const StepResult st = max_step(c.grid, sys, c.stoch, Eigen::Vector3d(0.9, 0.0, 0.0), Eigen::Vector3d::Zero(), A_prev, A_hat);
  EXPECT_FALSE(st.zero_step);
  EXPECT_NEAR(st.lambda, 0.1, 1e-12);
  EXPECT_EQ(st.binding_line, 0);
}

TEST(MaxStep, NoChangeIsFullStep) {
  const Cycle c = cycle_case();
  const SusceptanceSystem sys(c.grid);
  const auto A = participation(c.stoch, Eigen::Vector2d(0.3, 0.7));
  EXPECT_DOUBLE_EQ(max_step(c.grid, sys, c.stoch, Eigen::Vector3d(0.1, 0, 0), Eigen::Vector3d::Zero(), A, A).lambda, 1.0);
}

TEST(MaxStep, HugeLimitsFullStep) {
  Cycle c = cycle_case();
  for (auto& ln : c.grid.lines) ln.limit = 1e6;
  const SusceptanceSystem sys(c.grid);
  const StepResult st = max_step(c.grid, sys, c.stoch, Eigen::Vector3d(0.9, 0, 0), Eigen::Vector3d::Zero(),
                                 participation(c.stoch, Eigen::Vector2d(1, 0)), participation(c.stoch, Eigen::Vector2d(0, 1)));
  EXPECT_DOUBLE_EQ(st.lambda, 1.0);
}

TEST(MaxStep, ViolatedStartIsZeroStep) {
  const Cycle c = cycle_case();
  const SusceptanceSystem sys(c.grid);
  const StepResult st = max_step(c.grid, sys, c.stoch, Eigen::Vector3d(0.9, 0, 0), Eigen::Vector3d::Zero(),
                                 participation(c.stoch, Eigen::Vector2d(0.5, 0.5)), participation(c.stoch, Eigen::Vector2d(0, 1)));
  EXPECT_TRUE(st.zero_step);
  EXPECT_EQ(st.lambda, 0.0);
}

TEST(MaxStep, CurvedConstraintRoot) {
  // s_12(t)^2 = (1 - t)^2 / 9 from A_prev absorbing at bus 3 toward self-absorption,
  // then back out past the start on the other side of zero
  const Cycle c = cycle_case();
  const SusceptanceSystem sys(c.grid);
  const auto A_prev = participation(c.stoch, Eigen::Vector2d(0.5, 0.5));
  const auto A_hat = participation(c.stoch, Eigen::Vector2d(3.0, -2.0));
  const StepResult st = max_step(c.grid, sys, c.stoch, Eigen::Vector3d(0.4, 0, 0), Eigen::Vector3d::Zero(), A_prev, A_hat);
  // alpha_3(t) = 0.5 - 2.5 t, s = |alpha_3| / 3, need 0.4 + |alpha_3| <= 1
  EXPECT_NEAR(st.lambda, (0.5 + 0.6) / 2.5, 1e-10);
}

// property: the step keeps the pair compatible and is maximal up to 1e-9
TEST(MaxStepProperty, CompatibleAndMaximal) {
  std::mt19937_64 rng(31);
  int checked = 0;
  for (int trial = 0; trial < 15; ++trial) {
    const auto inst = testing::random_limited_instance(rng);
    const SusceptanceSystem sys(inst.grid);
    const DispatchSolution sol = solve_safety_opf(inst.grid, sys, inst.stoch);
    if (!sol.optimal()) continue;
    DispatchSolution rr;
    for (double tau = 0.05; tau > 1e-3 && !rr.optimal(); tau /= 2)
      rr = solve_reroute(inst.grid, sys, inst.stoch, *sol.A, tau);
    if (!rr.optimal()) continue;
    // move only rows whose generator has room on both sides
    std::vector<int> free_rows;
    for (const auto& gen : inst.grid.generators) {
      const int r = inst.stoch.participant_index(gen.bus);
      const Eigen::RowVectorXd a = sol.A->alpha.row(r);
      const double sd = std::sqrt(a * inst.stoch.omega * a.transpose());
      const double p = rr.p_bar[gen.bus];
      if (p - gen.safety_param * sd > gen.p_min + 1e-3 && p + gen.safety_param * sd < gen.p_max - 1e-3) free_rows.push_back(r);
    }
    if (free_rows.size() < 2) continue;
    ParticipationMatrix A_hat = *sol.A;
    std::normal_distribution<double> z(0.0, 0.5);
    for (int k = 0; k < inst.stoch.num_sources(); ++k) {
      Eigen::VectorXd d(free_rows.size());
      for (auto& x : d) x = z(rng);
      d.array() -= d.mean();
      for (std::size_t i = 0; i < free_rows.size(); ++i) A_hat.alpha(free_rows[i], k) += d[i];
    }
    const StepResult st = max_step(inst.grid, sys, inst.stoch, rr.f_bar, rr.p_bar, *sol.A, A_hat);
    if (st.zero_step) continue;
    ++checked;
    const auto A = blend(*sol.A, A_hat, st.lambda);
    EXPECT_TRUE(check_compatible(rr.f_bar, A, inst.grid, sys, inst.stoch).compatible);
    if (st.lambda < 1.0) {
      const auto over = blend(*sol.A, A_hat, std::min(1.0, st.lambda + 1e-6));
      EXPECT_FALSE(check_compatible(rr.f_bar, over, inst.grid, sys, inst.stoch, {}, 1e-9).compatible);
    }
  }
  EXPECT_GE(checked, 5);
}

TEST(MetricProperty, ConvexCombinationBound) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const Grid g = testing::random_grid(rng, 9, 4);
    const SusceptanceSystem sys(g);
    const StochasticModel m = testing::random_model(rng, 9, 2, 3);
    const auto A0 = testing::random_participation(rng, m), A1 = testing::random_participation(rng, m);
    const MetricSpec spec = parse_metric("I");
    const Eigen::VectorXd f = Eigen::VectorXd::Zero(g.num_lines());
    const double d0 = metric_eval(spec, g, f, line_variances(sys, A0, m.omega));
    const double d1 = metric_eval(spec, g, f, line_variances(sys, A1, m.omega));
    const double t = u(rng);
    const double dt = metric_eval(spec, g, f, line_variances(sys, blend(A0, A1, t), m.omega));
    EXPECT_LE(dt, (1 - t) * d0 + t * d1 + 1e-10 * (1.0 + d0 + d1));
  }
}

ProcedureOptions model_one(double tau, int K) {
  ProcedureOptions po;
  po.metric = parse_metric("I");
  po.tau = tau;
  po.K = K;
  return po;
}

TEST(Procedure, ZeroIterations) {
  const Figure1Case fc = make_figure1_case({});
  const SusceptanceSystem sys(fc.grid);
  const DispatchSolution sol = solve_safety_opf(fc.grid, sys, fc.stoch);
  const ShiftTrace tr = run_procedure(fc.grid, sys, fc.stoch, sol, model_one(0.1, 0));
  ASSERT_EQ(tr.records.size(), 1u);
  EXPECT_EQ(tr.stop_reason, "k_exhausted");
  EXPECT_FALSE(certify_stop(tr));
  const auto j = nlohmann::json::parse(trace_to_jsonl(tr));
  for (const char* key : {"k", "cost", "delta", "lambda", "tight_count", "tau", "stop_reason"}) EXPECT_TRUE(j.contains(key));
  EXPECT_TRUE(j["lambda"].is_null());
}

TEST(Procedure, RejectsBadOptions) {
  const Figure1Case fc = make_figure1_case({});
  const SusceptanceSystem sys(fc.grid);
  const DispatchSolution sol = solve_safety_opf(fc.grid, sys, fc.stoch);
  EXPECT_THROW(run_procedure(fc.grid, sys, fc.stoch, sol, model_one(1.5, 1)), std::invalid_argument);
  EXPECT_THROW(run_procedure(fc.grid, sys, fc.stoch, sol, model_one(0.1, -1)), std::invalid_argument);
  DispatchSolution bare = sol;
  bare.A.reset();
  EXPECT_THROW(run_procedure(fc.grid, sys, fc.stoch, bare, model_one(0.1, 1)), std::invalid_argument);
}

TEST(Procedure, Figure1LimitedMonotone) {
  Figure1Params p;
  p.variant = Figure1Variant::kLimited;
  const Figure1Case fc = make_figure1_case(p);
  const SusceptanceSystem sys(fc.grid);
  OpfOptions o;
  o.pattern.nonnegative = true;
  const DispatchSolution sol = solve_safety_opf(fc.grid, sys, fc.stoch, o);
  ASSERT_TRUE(sol.optimal());
  ProcedureOptions po = model_one(0.05, 2);
  po.metric = parse_metric("I,weights=inverse_limit_squared");
  po.opf = o;
  po.vshift.pattern = o.pattern;
  const ShiftTrace tr = run_procedure(fc.grid, sys, fc.stoch, sol, po);
  EXPECT_NEAR(tr.records[0].delta, 1.0 / 81 + 1.0 / 40, 1e-9);
  for (std::size_t i = 1; i < tr.records.size(); ++i) {
    const auto& r = tr.records[i];
    EXPECT_TRUE(r.compatible);
    EXPECT_GE(r.cost, tr.records[0].cost - 1e-6);
    if (r.stop_reason.empty()) EXPECT_LT(r.delta, tr.records[i - 1].delta);
  }
  EXPECT_LT(metric_eval(po.metric, fc.grid, tr.final.f_bar, tr.final.s2), tr.records[0].delta);
}

TEST(Procedure, SelfAbsorptionThenCertificate) {
  Grid g = testing::three_cycle(50.0);
  g.buses[1].load = 5.0;
  g.generators.push_back(make_gen(0, 1.0, 100.0, -100.0));
  g.generators.push_back(make_gen(1, 2.0, 100.0, -100.0));
  g.generators.push_back(make_gen(2, 3.0, 100.0, -100.0));
  const SusceptanceSystem sys(g);
  const StochasticModel m = testing::single_source(0, {0, 1, 2}, 1.0);
  const DispatchSolution sol = solve_safety_opf(g, sys, m);
  ASSERT_TRUE(sol.optimal());
  const ShiftTrace tr = run_procedure(g, sys, m, sol, model_one(0.1, 2));
  ASSERT_EQ(tr.records.size(), 3u);
  EXPECT_TRUE(tr.records[1].stop_reason.empty());
  EXPECT_NEAR(tr.records[1].delta, 0.0, 1e-8);
  EXPECT_EQ(tr.records[2].stop_reason, "step5");
  const auto cert = certify_stop(tr);
  ASSERT_TRUE(cert);
  EXPECT_NEAR(cert->delta_stop, 0.0, 1e-8);
  const BruteForceResult bf = brute_force_delta_star(g, sys, m, parse_metric("I"), 0.25);
  EXPECT_NEAR(bf.delta_star, 0.0, 1e-12);
  EXPECT_EQ(bf.total_points, 15);
}

TEST(ProcedureProperty, ModelOneMonotoneOnRandomInstances) {
  std::mt19937_64 rng(77);
  int moved = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const auto inst = testing::random_limited_instance(rng);
    const SusceptanceSystem sys(inst.grid);
    const DispatchSolution sol = solve_safety_opf(inst.grid, sys, inst.stoch);
    if (!sol.optimal()) continue;
    const ShiftTrace tr = run_procedure(inst.grid, sys, inst.stoch, sol, model_one(0.1, 3));
    for (std::size_t i = 1; i < tr.records.size(); ++i) {
      const auto& r = tr.records[i];
      if (!r.stop_reason.empty()) continue;
      ++moved;
      EXPECT_LT(r.delta, tr.records[i - 1].delta) << trial;
      EXPECT_TRUE(r.compatible) << trial;
      EXPECT_GE(r.cost, tr.records[0].cost - 1e-6 * (1 + tr.records[0].cost));
    }
  }
  EXPECT_GT(moved, 0);
}

}  // namespace
}  // namespace vaopf
