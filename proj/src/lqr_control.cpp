#include "gridlqr/lqr_control.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>

#include <lapacke.h>

#include "gridlqr/errors.hpp"

namespace gridlqr {
namespace {

lapack_logical stable_eigenvalue(const double* re, const double* /*im*/) { return *re < 0.0; }

struct RealSchur {
  Matrix T;
  Matrix Z;
  int sdim = 0;
};

// Real Schur form M = Z T Z', with stable eigenvalues leading when `order` is set.
RealSchur real_schur(const Matrix& M, bool order) {
  const lapack_int n = static_cast<lapack_int>(M.rows());
  RealSchur s{M, Matrix(n, n), 0};
  Vector wr(n), wi(n);
  lapack_int sdim = 0;
  const lapack_int info =
      LAPACKE_dgees(LAPACK_COL_MAJOR, 'V', order ? 'S' : 'N', order ? stable_eigenvalue : nullptr, n,
                    s.T.data(), n, &sdim, wr.data(), wi.data(), s.Z.data(), n);
  if (info != 0) {
    throw NonConvergence("real Schur decomposition failed (dgees info " + std::to_string(info) + ")");
  }
  s.sdim = static_cast<int>(sdim);
  return s;
}

}  // namespace

WeightMatrices build_qr(const PowerSystem& sys, const Vector& a_s, const CostWeightConfig& cfg) {
  if (!(cfg.alpha >= 0.0 && cfg.alpha < 1.0)) {
    throw ConfigError("alpha must lie in [0, 1), got " + std::to_string(cfg.alpha));
  }
  const Layout& lay = sys.layout();
  if (a_s.size() != lay.na()) throw ConfigError("build_qr: dimension mismatch");
  WeightMatrices w{Vector(lay.nx()), Vector(lay.nu())};
  auto ratio = [](double value, double limit) {
    return limit > 0.0 ? std::clamp(value / limit, 0.0, 1.0) : 0.0;
  };
  for (int i = 0; i < lay.G; ++i) {
    const GenCost& c = sys.net().generators[i].cost;
    const double wp = 1.0 / (1.0 - cfg.alpha * ratio(a_s[lay.pg(i)], c.p_max));
    const double wq = 1.0 / (1.0 - cfg.alpha * ratio(a_s[lay.qg(i)], c.q_max));
    w.q_diag[lay.delta(i)] = wp;
    w.q_diag[lay.omega(i)] = wp;
    w.q_diag[lay.mech(i)] = wp;
    w.q_diag[lay.emf(i)] = wq;
    w.r_diag[lay.ref(i)] = wp;
    w.r_diag[lay.field(i)] = wq;
  }
  return w;
}

double care_residual(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                     const Matrix& P) {
  const Matrix BtP = B.transpose() * P;
  const Matrix res = A.transpose() * P + P * A - BtP.transpose() * R.ldlt().solve(BtP) + Q;
  return res.norm() / Q.norm();
}

double spectral_abscissa(const Matrix& M) {
  Eigen::EigenSolver<Matrix> es(M, false);
  return es.eigenvalues().real().maxCoeff();
}

Matrix solve_lyapunov(const Matrix& A, const Matrix& C) {
  const int n = static_cast<int>(A.rows());
  // A = Z T Z'  =>  T' Y + Y T = -Z' C Z  with X = Z Y Z'
  RealSchur s = real_schur(A, false);
  Matrix Y = -(s.Z.transpose() * C * s.Z);
  double scale = 1.0;
  const lapack_int info = LAPACKE_dtrsyl(LAPACK_COL_MAJOR, 'T', 'N', 1, n, n, s.T.data(), n,
                                         s.T.data(), n, Y.data(), n, &scale);
  if (info < 0) throw NonConvergence("Sylvester solve failed");
  Matrix X = s.Z * (Y / scale) * s.Z.transpose();
  return 0.5 * (X + X.transpose());
}

namespace {

// Hautus test on every eigenvalue with nonnegative real part.
bool stabilizable(const Matrix& A, const Matrix& B) {
  const Eigen::Index n = A.rows();
  const Eigen::VectorXcd eig = A.eigenvalues();
  const double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
  for (Eigen::Index k = 0; k < n; ++k) {
    if (eig[k].real() < -1e-10 * scale) continue;
    Eigen::MatrixXcd M(n, n + B.cols());
    M.leftCols(n) = A.cast<std::complex<double>>() - eig[k] * Eigen::MatrixXcd::Identity(n, n);
    M.rightCols(B.cols()) = B.cast<std::complex<double>>();
    const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXcd>(M).singularValues();
    if (sv[n - 1] <= 1e-10 * std::max(scale, sv[0])) return false;
  }
  return true;
}

}  // namespace

RiccatiSolution solve_care(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R) {
  const Eigen::Index n = A.rows();
  if (A.cols() != n || B.rows() != n || Q.rows() != n || Q.cols() != n || R.rows() != B.cols() ||
      R.cols() != B.cols()) {
    throw ConfigError("solve_care: dimension mismatch");
  }
  Eigen::LLT<Matrix> r_llt(R);
  if (r_llt.info() != Eigen::Success) throw ConfigError("solve_care: R is not positive definite");

  Matrix H(2 * n, 2 * n);
  H.topLeftCorner(n, n) = A;
  H.topRightCorner(n, n) = -B * r_llt.solve(B.transpose());
  H.bottomLeftCorner(n, n) = -Q;
  H.bottomRightCorner(n, n) = -A.transpose();

  const RealSchur s = real_schur(H, true);
  if (s.sdim != n) {
    throw UnstabilizablePair("Hamiltonian has " + std::to_string(s.sdim) + " stable eigenvalues, expected " +
                             std::to_string(n));
  }
  const Matrix U11 = s.Z.topLeftCorner(n, n);
  const Matrix U21 = s.Z.bottomLeftCorner(n, n);
  Eigen::JacobiSVD<Matrix> svd(U11);
  const double smin = svd.singularValues().minCoeff();
  if (!(smin * 1e12 >= svd.singularValues().maxCoeff())) {
    if (!stabilizable(A, B)) throw UnstabilizablePair("an unstable mode of A is not reachable from B");
    throw IllConditionedU11("U11 condition number exceeds 1e12");
  }
  Matrix P = U11.transpose().partialPivLu().solve(U21.transpose()).transpose();
  P = 0.5 * (P + P.transpose());

  RiccatiSolution sol;
  sol.K = -r_llt.solve(B.transpose() * P);
  sol.residual = care_residual(A, B, Q, R, P);
  // One Newton step polishes the Schur solution when it lost digits.
  if (sol.residual > 1e-12) {
    const Matrix Acl = A + B * sol.K;
    Matrix P2 = solve_lyapunov(Acl, Q + sol.K.transpose() * R * sol.K);
    const double res2 = care_residual(A, B, Q, R, P2);
    if (res2 < sol.residual) {
      P = std::move(P2);
      sol.K = -r_llt.solve(B.transpose() * P);
      sol.residual = res2;
    }
  }
  sol.P = std::move(P);
  sol.closed_loop_abscissa = spectral_abscissa(A + B * sol.K);
  if (!(sol.closed_loop_abscissa < 0.0)) {
    throw UnstabilizablePair("closed loop A + BK is not Hurwitz");
  }
  return sol;
}

double estimate_control_cost(const Matrix& P, const Vector& x_eq, const Vector& x0, double t_lqr) {
  const Vector dx = x_eq - x0;
  return 0.5 * t_lqr * dx.dot(P * dx);
}

Vector feedback(const Vector& u_eq, const Vector& x_eq, const Matrix& K, const Vector& x) {
  return u_eq + K * (x - x_eq);
}

}  // namespace gridlqr
