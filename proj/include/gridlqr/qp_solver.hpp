#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gridlqr/dae_model.hpp"

namespace gridlqr {

// min 1/2 x'Hx + f'x  s.t.  A_eq x = b_eq,  lb <= x <= ub.
// Infinite bounds are allowed.
struct QpProblem {
  Matrix H;
  Vector f;
  Matrix A_eq;
  Vector b_eq;
  Vector lb;
  Vector ub;
};

enum class QpStatus { kOptimal, kInfeasible, kMaxIterations };

const char* to_string(QpStatus s);

struct QpOptions {
  double tolerance = 1e-10;  // relative KKT residuals
  int max_iterations = 100;
  double rank_tolerance = 1e-10;
  std::optional<Vector> x_init;
};

struct QpResult {
  QpStatus status = QpStatus::kMaxIterations;
  Vector x;
  Vector y;  // multipliers of the retained equality rows
  double objective = 0.0;
  int iterations = 0;
  int dropped_rows = 0;
  double primal_residual = 0.0;  // ||A_eq x - b_eq||_inf over all rows
  double dual_residual = 0.0;
  double complementarity = 0.0;
  std::vector<std::string> warnings;
};

// Mehrotra predictor-corrector interior-point method. Dependent equality rows
// are removed by QR with column pivoting before the iteration starts.
QpResult solve_qp(const QpProblem& qp, const QpOptions& opts = {});

}  // namespace gridlqr
