#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gridlqr/linearizer.hpp"
#include "gridlqr/lqr_control.hpp"
#include "gridlqr/qp_solver.hpp"

namespace gridlqr {

struct DispatchConfig {
  CostWeightConfig weights;
  int k_max = 2;
  QpOptions qp;
};

// Solution of the linearized OPF: a steady-state decision z^s = (x, a, u).
struct SteadyStateDecision {
  Vector x, a, u;
  double objective = 0.0;         // c(a) [+ (T/2) dx'P dx]
  double steady_state_cost = 0.0; // c(a)
  int qp_iterations = 0;
  double eq9a_residual = 0.0;
  double eq9b_residual = 0.0;
  std::vector<std::string> warnings;
};

struct IterationRecord {
  int k = 0;
  double objective = 0.0;
  double best_objective = 0.0;
  double care_residual = 0.0;
  int qp_iterations = 0;
};

struct DispatchSolution {
  std::string method;
  SteadyStateDecision z_s;
  SystemPoint z_eq;
  Matrix P_opt;  // Riccati matrix inside the reported objective
  Matrix P;      // CARE at Q(z_eq), R(z_eq); used by the simulation controller
  Matrix K;
  WeightMatrices weights;  // at z_eq
  double objective = 0.0;
  double steady_state_cost = 0.0;       // c(a_eq) after setpoint extraction
  double estimated_control_cost = 0.0;  // (T/2)(x_eq - x0)' P (x_eq - x0)
  double care_residual = 0.0;
  std::vector<IterationRecord> log;
  std::vector<std::string> warnings;
};

// Sum of the quadratic generation costs at the algebraic point a.
double generation_cost(const PowerSystem& sys, const Vector& a);

// Linearized OPF around lin.z0 with load d_s. With P supplied the objective
// gains (T/2)(x - x0)' P (x - x0). Throws QpFailure.
SteadyStateDecision solve_linopf(const PowerSystem& sys, const LinearizedSystem& lin, const Vector& d_s,
                                 const Matrix* P, const DispatchConfig& cfg);

// Alternates QP solves and CARE updates, keeps the best objective, then
// extracts an exact equilibrium by load flow.
DispatchSolution alqr_opf(const PowerSystem& sys, const LinearizedSystem& lin, const Vector& d_s,
                          const DispatchConfig& cfg);

// Linearized OPF without the control term, followed by the same extraction.
DispatchSolution baseline_opf(const PowerSystem& sys, const LinearizedSystem& lin, const Vector& d_s,
                              const DispatchConfig& cfg);

// One line per iteration: "k=1 objective=... best=... care_residual=... qp_iterations=...".
std::string format_iteration_log(const DispatchSolution& sol);

}  // namespace gridlqr
