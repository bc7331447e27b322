#include <gtest/gtest.h>

#include <cmath>

#include "gridlqr/dispatch_opt.hpp"
#include "gridlqr/errors.hpp"
#include "gridlqr/simulator.hpp"

using namespace gridlqr;

namespace {

struct Scenario {
  PowerSystem sys{load_case("case9", "typical")};
  StepLoad step = apply_step_load(sys.net(), sys.layout(), 0.1, 0.9);
  SystemPoint z0 = solve_equilibrium(sys, step.d0, case_setpoints(sys.net()));
  LinearizedSystem lin = linearize(sys, z0);
};

const Scenario& nine() {
  static const Scenario s;
  return s;
}

}  // namespace

TEST(LinOpf, ZeroControlTermEqualsPlainOpf) {
  const Scenario& s = nine();
  const DispatchConfig cfg;
  const SteadyStateDecision plain = solve_linopf(s.sys, s.lin, s.step.d_s, nullptr, cfg);
  const Matrix zero = Matrix::Zero(s.lin.A.rows(), s.lin.A.cols());
  const SteadyStateDecision with_zero = solve_linopf(s.sys, s.lin, s.step.d_s, &zero, cfg);
  EXPECT_LT((plain.a - with_zero.a).lpNorm<Eigen::Infinity>(), 1e-7);
  EXPECT_NEAR(plain.objective, with_zero.objective, 1e-6);
  EXPECT_LT(plain.eq9a_residual, 1e-8);
  EXPECT_LT(plain.eq9b_residual, 1e-8);
}

TEST(LinOpf, ControlTermLowersFullObjective) {
  const Scenario& s = nine();
  const DispatchConfig cfg;
  const WeightMatrices w = build_qr(s.sys, s.z0.a, cfg.weights);
  const Matrix P = solve_care(s.lin.A, s.lin.B, w.Q(), w.R()).P;
  const SteadyStateDecision plain = solve_linopf(s.sys, s.lin, s.step.d_s, nullptr, cfg);
  const SteadyStateDecision aware = solve_linopf(s.sys, s.lin, s.step.d_s, &P, cfg);
  const double plain_full =
      plain.steady_state_cost + estimate_control_cost(P, plain.x, s.z0.x, cfg.weights.t_lqr);
  EXPECT_LT(aware.objective, plain_full);
  EXPECT_GE(aware.steady_state_cost, plain.steady_state_cost - 1e-6);
}

TEST(LinOpf, OptimalBasePointIsFixed) {
  // Re-linearize at the plain OPF solution until the dispatch settles, then a
  // zero load change must return the base point.
  const Scenario& s = nine();
  const DispatchConfig cfg;
  SystemPoint z = s.z0;
  for (int it = 0; it < 6; ++it) z = baseline_opf(s.sys, linearize(s.sys, z), s.step.d0, cfg).z_eq;
  const DispatchSolution again = baseline_opf(s.sys, linearize(s.sys, z), s.step.d0, cfg);
  EXPECT_LT((again.z_eq.a - z.a).lpNorm<Eigen::Infinity>(), 1e-4);
}

TEST(Alqr, BestObjectiveNonIncreasing) {
  const Scenario& s = nine();
  DispatchConfig cfg;
  cfg.k_max = 4;
  const DispatchSolution sol = alqr_opf(s.sys, s.lin, s.step.d_s, cfg);
  ASSERT_EQ(sol.log.size(), 4u);
  for (size_t k = 1; k < sol.log.size(); ++k) {
    EXPECT_LE(sol.log[k].best_objective, sol.log[k - 1].best_objective);
  }
  EXPECT_DOUBLE_EQ(sol.objective, sol.log.back().best_objective);
  EXPECT_NE(format_iteration_log(sol).find("k=4"), std::string::npos);
}

TEST(Alqr, AlphaZeroIterationsCoincide) {
  const Scenario& s = nine();
  DispatchConfig cfg;
  cfg.weights.alpha = 0.0;
  const DispatchSolution sol = alqr_opf(s.sys, s.lin, s.step.d_s, cfg);
  ASSERT_EQ(sol.log.size(), 2u);
  EXPECT_NEAR(sol.log[0].objective, sol.log[1].objective, 1e-7 * std::abs(sol.log[0].objective));
}

TEST(Alqr, ExtractedEquilibrium) {
  const Scenario& s = nine();
  const DispatchConfig cfg;
  for (const DispatchSolution& sol :
       {alqr_opf(s.sys, s.lin, s.step.d_s, cfg), baseline_opf(s.sys, s.lin, s.step.d_s, cfg)}) {
    EXPECT_LT(equilibrium_residual(s.sys, sol.z_eq), 1e-8) << sol.method;
    EXPECT_LT((sol.z_eq.d - s.step.d_s).lpNorm<Eigen::Infinity>(), 1e-15) << sol.method;
    // Stator equations per machine after a fresh generator initialization.
    const GeneratorEquilibrium ge = init_generators(s.sys, sol.z_eq.a);
    const Vector h = eval_h(s.sys, ge.x, sol.z_eq.a);
    EXPECT_LT(h.head(2 * s.sys.layout().G).lpNorm<Eigen::Infinity>(), 1e-10) << sol.method;
    EXPECT_LT(sol.care_residual, 1e-8) << sol.method;
    EXPECT_LT(spectral_abscissa(s.lin.A + s.lin.B * sol.K), 0.0) << sol.method;
    EXPECT_NEAR(sol.steady_state_cost, generation_cost(s.sys, sol.z_eq.a), 1e-9) << sol.method;
    EXPECT_NEAR(sol.estimated_control_cost,
                estimate_control_cost(sol.P, sol.z_eq.x, s.z0.x, cfg.weights.t_lqr), 1e-9)
        << sol.method;
  }
}

TEST(Alqr, TradesGenerationCostForControlCost) {
  const Scenario& s = nine();
  const DispatchConfig cfg;
  const DispatchSolution alqr = alqr_opf(s.sys, s.lin, s.step.d_s, cfg);
  const DispatchSolution base = baseline_opf(s.sys, s.lin, s.step.d_s, cfg);
  EXPECT_LE(base.steady_state_cost, alqr.steady_state_cost);
  EXPECT_LT(alqr.estimated_control_cost, base.estimated_control_cost);
  EXPECT_LT(alqr.steady_state_cost + alqr.estimated_control_cost,
            base.steady_state_cost + base.estimated_control_cost);
}

TEST(Alqr, RejectsBadConfig) {
  const Scenario& s = nine();
  DispatchConfig cfg;
  cfg.k_max = 0;
  EXPECT_THROW(alqr_opf(s.sys, s.lin, s.step.d_s, cfg), ConfigError);
}
