#pragma once

#include "gridlqr/dae_model.hpp"

namespace gridlqr {

struct CostWeightConfig {
  double alpha = 0.6;   // coupling between dispatch and control weights, in [0, 1)
  double t_lqr = 1000;  // time-scale factor on the control cost
};

// Diagonal LQR weights evaluated at a steady-state point.
struct WeightMatrices {
  Vector q_diag;  // 4G, ordered like x
  Vector r_diag;  // 2G, ordered like u

  Matrix Q() const { return q_diag.asDiagonal(); }
  Matrix R() const { return r_diag.asDiagonal(); }
};

// Entries for delta, omega, m and r grow as 1/(1 - alpha pg/pmax); entries for
// e and f as 1/(1 - alpha qg/qmax). Ratios are clipped into [0, 1].
WeightMatrices build_qr(const PowerSystem& sys, const Vector& a_s, const CostWeightConfig& cfg);

struct RiccatiSolution {
  Matrix P;
  Matrix K;
  double residual = 0.0;           // ||A'P + PA - PBR^-1B'P + Q||_F / ||Q||_F
  double closed_loop_abscissa = 0.0;  // max Re eig(A + BK)
};

// Stabilizing CARE solution from the ordered real Schur form of the
// Hamiltonian. Throws UnstabilizablePair or IllConditionedU11.
RiccatiSolution solve_care(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R);

double care_residual(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                     const Matrix& P);

// Solves A'X + XA + C = 0 by Bartels-Stewart.
Matrix solve_lyapunov(const Matrix& A, const Matrix& C);

double spectral_abscissa(const Matrix& M);

// (T/2) (x_eq - x0)' P (x_eq - x0)
double estimate_control_cost(const Matrix& P, const Vector& x_eq, const Vector& x0, double t_lqr);

// u = u_eq + K (x - x_eq)
Vector feedback(const Vector& u_eq, const Vector& x_eq, const Matrix& K, const Vector& x);

}  // namespace gridlqr
