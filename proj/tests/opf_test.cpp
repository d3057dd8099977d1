#include <gtest/gtest.h>

#include "test_util.hpp"
#include "vaopf/figure1.hpp"
#include "vaopf/metric.hpp"
#include "vaopf/opf.hpp"

namespace vaopf {
namespace {

using testing::make_gen;
using testing::participation;

OpfOptions nonneg() {
  OpfOptions o;
  o.pattern.nonnegative = true;
  return o;
}

TEST(DcOpf, TwoBusUniqueDispatch) {
  Grid g = testing::make_grid(2, {{0, 1, 1.0, 20.0}}, {0.0, 10.0});
  g.generators.push_back(make_gen(0, 1.0, 100.0));
  const SusceptanceSystem sys(g);
  const DispatchSolution sol = solve_dcopf(g, sys);
  ASSERT_TRUE(sol.optimal()) << sol.message;
  EXPECT_NEAR(sol.p_bar[0], 10.0, 1e-7);
  EXPECT_NEAR(sol.f_bar[0], 10.0, 1e-7);
  g.lines[0].limit = 5.0;
  const SusceptanceSystem sys2(g);
  EXPECT_EQ(solve_dcopf(g, sys2).status, conic::SolveStatus::kInfeasible);
}

TEST(DcOpf, ThreeCycleMeritOrder) {
  Grid g = testing::three_cycle(10.0);
  g.buses[2].load = 9.0;
  g.generators.push_back(make_gen(0, 1.0, 100.0));
  g.generators.push_back(make_gen(1, 2.0, 100.0));
  const SusceptanceSystem sys(g);
  const DispatchSolution sol = solve_dcopf(g, sys);
  ASSERT_TRUE(sol.optimal());
  EXPECT_NEAR(sol.p_bar[0], 9.0, 1e-7);
  EXPECT_NEAR(sol.p_bar[1], 0.0, 1e-7);
  const Eigen::MatrixXd Bb = testing::dense_breve(g);
  const Eigen::Vector3d inj(9.0, 0.0, -9.0);
  for (int l = 0; l < 3; ++l) {
    const auto& ln = g.lines[l];
    EXPECT_NEAR(sol.f_bar[l], (Bb.row(ln.from_bus) - Bb.row(ln.to_bus)).dot(inj), 1e-7);
  }
  EXPECT_NEAR(sol.f_bar[0], 3.0, 1e-7);
  EXPECT_NEAR(sol.f_bar[1], 6.0, 1e-7);
  EXPECT_NEAR(sol.f_bar[2], 3.0, 1e-7);
}

TEST(SafetyOpf, Figure1MatchesCandidate) {
  const Figure1Params p;
  const Figure1Case fc = make_figure1_case(p);
  const SusceptanceSystem sys(fc.grid);
  const DispatchSolution sol = solve_safety_opf(fc.grid, sys, fc.stoch, nonneg());
  ASSERT_TRUE(sol.optimal()) << sol.message;
  EXPECT_NEAR(sol.p_bar[0], p.L - p.mu - 3 * p.sigma, 1e-4);
  for (int i = 1; i <= p.k; ++i) {
    EXPECT_NEAR(sol.p_bar[i], 3 * p.sigma / p.k, 1e-4);
    EXPECT_NEAR(sol.A->at(i, fc.bus_b), 1.0 / p.k, 1e-4);
  }
  EXPECT_NEAR(sol.p_bar[p.k + 1], 0.0, 1e-4);
  EXPECT_NEAR(sol.A->at(p.k + 1, fc.bus_b), 0.0, 1e-4);
  EXPECT_NEAR(sol.s2[fc.line_ab], p.sigma * p.sigma, 1e-6 * p.sigma * p.sigma);
  EXPECT_TRUE(check_compatible(sol.f_bar, *sol.A, fc.grid, sys, fc.stoch).compatible);
}

TEST(SafetyOpf, PinningTopUnitRaisesCost) {
  Figure1Params p;
  p.k = 4;
  p.D = 3;
  const Figure1Case fc = make_figure1_case(p);
  const SusceptanceSystem sys(fc.grid);
  const DispatchSolution base = solve_safety_opf(fc.grid, sys, fc.stoch, nonneg());
  ASSERT_TRUE(base.optimal());
  const int top = p.k + 1;
  for (int which = 0; which < 2; ++which) {
    SafetyProgram sp = build_safety_opf(fc.grid, sys, fc.stoch, nonneg().pattern);
    const int var = which == 0 ? sp.alpha[fc.stoch.participant_index(top) * sp.S]
                               : sp.p[fc.grid.generator_at(top)];
    sp.program.add_linear(conic::LinearExpr::var(var), conic::Sense::kGreaterEqual, 0.01);
    const DispatchSolution pinned = solve_safety_program(sp, fc.grid, sys, fc.stoch, nonneg());
    ASSERT_TRUE(pinned.optimal());
    EXPECT_GT(pinned.expected_cost, base.expected_cost + 1e-6) << which;
  }
}

TEST(SafetyOpf, ZeroVarianceReducesToDcOpf) {
  const Grid g = load_matpower(VAOPF_DATA_DIR "/case9.m");
  const SusceptanceSystem sys(g);
  StochasticModel m;
  m.sources = {4, 6};
  m.mu = Eigen::Vector2d(20.0, 10.0);
  m.omega = Eigen::Matrix2d::Zero();
  for (const auto& gen : g.generators) m.participants.push_back(gen.bus);
  const DispatchSolution a = solve_safety_opf(g, sys, m);
  const DispatchSolution b = solve_dcopf(g, sys, &m);
  ASSERT_TRUE(a.optimal() && b.optimal());
  EXPECT_NEAR(a.expected_cost, b.expected_cost, 1e-8 * (1.0 + std::abs(b.expected_cost)));
  EXPECT_TRUE(a.s2.isZero(1e-9));
}

TEST(SafetyOpfProperty, RestrictionAndRerouteFixedPoint) {
  std::mt19937_64 rng(41);
  int solved = 0;
  for (int trial = 0; trial < 12; ++trial) {
    Grid g = testing::random_grid(rng, 8, 4);
    std::uniform_real_distribution<double> load(5.0, 20.0), cost(1.0, 5.0);
    for (int i = 0; i < 8; ++i) g.buses[i].load = i % 2 ? load(rng) : 0.0;
    for (int i : {0, 2, 4, 6}) g.generators.push_back(make_gen(i, cost(rng), 100.0, 0.0, 0.01));
    for (auto& ln : g.lines) ln.limit = 60.0;
    const SusceptanceSystem sys(g);
    StochasticModel m = testing::random_model(rng, 8, 2, 1);
    m.participants = {0, 2, 4, 6};
    m.omega *= 4.0;
    const DispatchSolution safe = solve_safety_opf(g, sys, m);
    const DispatchSolution det = solve_dcopf(g, sys, &m);
    if (!det.optimal()) continue;
    ASSERT_NE(safe.status, conic::SolveStatus::kNumericFailure) << safe.message;
    if (!safe.optimal()) continue;
    ++solved;
    EXPECT_GE(safe.expected_cost, det.expected_cost - 1e-6 * (1.0 + det.expected_cost));
    EXPECT_TRUE(check_compatible(safe.f_bar, *safe.A, g, sys, m).compatible);
    const DispatchSolution rr = solve_reroute(g, sys, m, *safe.A, 0.0);
    ASSERT_TRUE(rr.optimal()) << rr.message;
    EXPECT_NEAR(rr.expected_cost, safe.expected_cost, 1e-6 * (1.0 + safe.expected_cost));
  }
  EXPECT_GE(solved, 6);
}

TEST(FormulationStats, CountsMatchShape) {
  Grid g = testing::three_cycle();
  g.generators.push_back(make_gen(0, 1.0));
  g.generators.push_back(make_gen(1, 1.0));
  const SusceptanceSystem sys(g);
  const StochasticModel m = testing::single_source(2, {0, 1}, 1.0);
  const FormulationStats st = formulation_stats(build_safety_opf(g, sys, m));
  EXPECT_EQ(st.n_A_vars, 2);
  EXPECT_EQ(st.n_D_vars, 3);
  EXPECT_EQ(st.n_gamma_vars, 3);
  EXPECT_EQ(st.nnz_D_constraints, 6);
  EXPECT_EQ(st.nnz_conic_constraints, 3);

  const Figure1Case fc = make_figure1_case({});
  const SusceptanceSystem fsys(fc.grid);
  const FormulationStats fs = formulation_stats(build_safety_opf(fc.grid, fsys, fc.stoch));
  EXPECT_EQ(fs.n_A_vars, 11);
  EXPECT_EQ(fs.n_D_vars, 24);
  EXPECT_EQ(fs.n_gamma_vars, 23);

  StochasticModel none;
  none.mu = Eigen::VectorXd(0);
  none.omega = Eigen::MatrixXd(0, 0);
  none.participants = {0, 1};
  const FormulationStats z = formulation_stats(build_safety_opf(g, sys, none));
  EXPECT_EQ(z.n_A_vars + z.n_D_vars + z.n_gamma_vars + z.nnz_D_constraints + z.nnz_conic_constraints, 0);
}

TEST(Reroute, LargeTauInfeasible) {
  Figure1Params p;
  p.variant = Figure1Variant::kLimited;
  const Figure1Case fc = make_figure1_case(p);
  const SusceptanceSystem sys(fc.grid);
  const Figure1Candidate cand = figure1_candidate(fc, p);
  EXPECT_EQ(solve_reroute(fc.grid, sys, fc.stoch, cand.A, 0.9).status, conic::SolveStatus::kInfeasible);
}

TEST(Reroute, Figure1LimitedCandidateExactlyTight) {
  Figure1Params p;
  p.variant = Figure1Variant::kLimited;
  const Figure1Case fc = make_figure1_case(p);
  const SusceptanceSystem sys(fc.grid);
  const Figure1Candidate cand = figure1_candidate(fc, p);
  const DispatchSolution rr = solve_reroute(fc.grid, sys, fc.stoch, cand.A, 0.0);
  ASSERT_TRUE(rr.optimal()) << rr.message;
  const auto& ab = fc.grid.lines[fc.line_ab];
  EXPECT_NEAR(std::abs(rr.f_bar[fc.line_ab]) + 3.0 * std::sqrt(rr.s2[fc.line_ab]), ab.limit, 1e-5 * ab.limit);

  // the candidate itself: compatible with zero margin on ab
  const CompatibilityReport rep = check_compatible(rr.f_bar, cand.A, fc.grid, sys, fc.stoch);
  EXPECT_TRUE(rep.compatible);
  EXPECT_NEAR(rep.min_line_margin, 0.0, 1e-6);
  EXPECT_EQ(rep.tightest_line, fc.line_ab);
  const auto T = tight_set(rr.f_bar, cand.A, fc.grid, sys, fc.stoch, 0.0);
  EXPECT_NE(std::find(T.begin(), T.end(), fc.line_ab), T.end());
}

TEST(Compatibility, HalvedLimitReported) {
  const Figure1Params p;
  Figure1Case fc = make_figure1_case(p);
  const SusceptanceSystem sys(fc.grid);
  const DispatchSolution sol = solve_safety_opf(fc.grid, sys, fc.stoch, nonneg());
  ASSERT_TRUE(sol.optimal());
  const double used = std::abs(sol.f_bar[fc.line_ab]) + 3.0 * std::sqrt(sol.s2[fc.line_ab]);
  fc.grid.lines[fc.line_ab].limit = used / 2.0;
  const CompatibilityReport rep = check_compatible(sol.f_bar, *sol.A, fc.grid, sys, fc.stoch);
  EXPECT_FALSE(rep.compatible);
  bool found = false;
  for (const auto& is : rep.issues) found |= is.code == "line_safety" && is.index == fc.line_ab && is.margin < 0.0;
  EXPECT_TRUE(found);
}

TEST(TightSet, Examples) {
  Grid g = testing::make_grid(4, {{0, 1, 1.0, 1.0}, {1, 2, 1.0, 1.0}, {2, 3, 1.0, 1.0}});
  for (auto& ln : g.lines) ln.safety_param = 0.0;
  const Eigen::Vector3d f(0.5, 0.95, 0.2);
  EXPECT_EQ(tight_lines(g, f, Eigen::Vector3d::Zero(), 0.1), std::vector<int>{1});
  EXPECT_EQ(tight_lines(g, f, Eigen::Vector3d::Zero(), 1.0 - 1e-9), (std::vector<int>{0, 1, 2}));
  EXPECT_EQ(tight_lines(g, Eigen::Vector3d(0.5, 0.0, 0.2), Eigen::Vector3d::Zero(), 1.0 - 1e-9),
            (std::vector<int>{0, 2}));
}

TEST(VShift, SelfAbsorptionWhenUnconstrained) {
  Grid g = testing::three_cycle();
  for (int i = 0; i < 3; ++i) g.generators.push_back(make_gen(i, 1.0));
  const SusceptanceSystem sys(g);
  StochasticModel m;
  m.sources = {0, 1};
  m.mu = Eigen::Vector2d::Zero();
  m.omega = Eigen::Matrix2d::Identity();
  m.participants = {0, 1, 2};
  const auto A0 = ParticipationMatrix::uniform(m);
  VShiftOptions vo;
  vo.tight_override = std::vector<int>{};
  const VShiftResult r =
      solve_vshift(g, sys, m, Eigen::Vector3d::Zero(), A0, 0.1, parse_metric("I"), vo);
  ASSERT_TRUE(r.optimal()) << r.message;
  EXPECT_LE(r.s2_hat.cwiseAbs().maxCoeff(), 1e-7);
  EXPECT_NEAR(r.A_hat.at(0, 0), 1.0, 1e-4);
  EXPECT_NEAR(r.A_hat.at(1, 1), 1.0, 1e-4);
}

TEST(VShift, ModelOneMatchesLeastSquaresOracle) {
  Grid g = testing::make_grid(3, {{0, 1, 1.0}, {0, 2, 0.5}, {1, 2, 2.0}});
  for (int i = 1; i < 3; ++i) g.generators.push_back(make_gen(i, 1.0));
  const SusceptanceSystem sys(g);
  const StochasticModel m = testing::single_source(0, {1, 2}, 2.0);
  // Sum of variances is a parabola in a = alpha_1 (alpha_2 = 1 - a).
  auto total = [&](double a) { return testing::oracle_variances(g, m, participation(m, Eigen::Vector2d(a, 1 - a))).sum(); };
  const double q0 = total(0.0), q1 = total(1.0), qh = total(0.5);
  const double c2 = 2 * q0 - 4 * qh + 2 * q1, c1 = -3 * q0 + 4 * qh - q1;
  const double a_star = -c1 / (2 * c2);
  VShiftOptions vo;
  vo.tight_override = std::vector<int>{};
  const VShiftResult r = solve_vshift(g, sys, m, Eigen::Vector3d::Zero(), ParticipationMatrix::uniform(m), 0.1,
                                      parse_metric("I"), vo);
  ASSERT_TRUE(r.optimal());
  EXPECT_NEAR(r.A_hat.alpha(0, 0), a_star, 1e-6);
  EXPECT_NEAR(r.s2_hat.sum(), total(a_star), 1e-6 * (1 + total(a_star)));
}

TEST(VShift, Figure1HalfVarianceCap) {
  const Figure1Params p;
  const Figure1Case fc = make_figure1_case(p);
  const SusceptanceSystem sys(fc.grid);
  const Figure1Candidate cand = figure1_candidate(fc, p);
  const Eigen::VectorXd f = sys.dc_flows(cand.p_bar + fc.stoch.mean_injection(fc.grid.num_buses()) -
                                         Eigen::Map<const Eigen::VectorXd>(fc.grid.loads().data(), fc.grid.num_buses()));
  VShiftOptions vo;
  vo.pattern.nonnegative = true;
  vo.tight_override = std::vector<int>{};
  vo.variance_caps[fc.line_ab] = 0.5 * p.sigma * p.sigma;
  const VShiftResult r = solve_vshift(fc.grid, sys, fc.stoch, f, cand.A, 0.1, parse_metric("I"), vo);
  ASSERT_TRUE(r.optimal()) << r.message;
  EXPECT_NEAR(r.A_hat.at(p.k + 1, fc.bus_b), 1.0 - std::sqrt(0.5), 1e-6);
  double head = 0.0;
  for (int i = 1; i <= p.k; ++i) head += r.A_hat.at(i, fc.bus_b);
  EXPECT_NEAR(head, std::sqrt(0.5), 1e-6);
}

TEST(VShift, GeneratorMarginsKeepSegmentFeasible) {
  Figure1Params p;
  p.k = 3;
  p.D = 2;
  const Figure1Case fc = make_figure1_case(p);
  const SusceptanceSystem sys(fc.grid);
  const DispatchSolution sol = solve_safety_opf(fc.grid, sys, fc.stoch, nonneg());
  ASSERT_TRUE(sol.optimal());
  VShiftOptions vo;
  vo.pattern.nonnegative = true;
  vo.generator_dispatch = sol.p_bar;
  const VShiftResult r = solve_vshift(fc.grid, sys, fc.stoch, sol.f_bar, *sol.A, 0.1, parse_metric("I"), vo);
  ASSERT_TRUE(r.optimal());
  for (const auto& gen : fc.grid.generators) {
    const int idx = fc.stoch.participant_index(gen.bus);
    if (idx < 0) continue;
    const double sd = std::sqrt(r.A_hat.alpha.row(idx).dot(fc.stoch.omega * r.A_hat.alpha.row(idx).transpose()));
    EXPECT_LE(sol.p_bar[gen.bus] + gen.safety_param * sd, gen.p_max + 1e-6);
    EXPECT_GE(sol.p_bar[gen.bus] - gen.safety_param * sd, gen.p_min - 1e-6);
  }
}

TEST(SolutionJson, RoundTrip) {
  const Figure1Case fc = make_figure1_case({});
  const SusceptanceSystem sys(fc.grid);
  const DispatchSolution sol = solve_safety_opf(fc.grid, sys, fc.stoch, nonneg());
  const DispatchSolution back = solution_from_json(solution_to_json(sol, fc.grid), fc.grid, fc.stoch);
  EXPECT_TRUE(back.p_bar.isApprox(sol.p_bar, 1e-12));
  EXPECT_TRUE(back.f_bar.isApprox(sol.f_bar, 1e-12));
  ASSERT_TRUE(back.A);
  EXPECT_TRUE(back.A->alpha.isApprox(sol.A->alpha, 1e-12));
  EXPECT_EQ(solution_to_json(back, fc.grid), solution_to_json(sol, fc.grid));
}

}  // namespace
}  // namespace vaopf
