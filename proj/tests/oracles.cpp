#include "oracles.hpp"

#include <cmath>
#include <complex>
#include <stdexcept>

#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

namespace oracle {

using cd = std::complex<double>;

Eigen::MatrixXcd ybus_incidence(const gridlqr::NetworkCase& net) {
  const int n = net.num_buses();
  const int nl = static_cast<int>(net.branches.size());
  Eigen::MatrixXcd cf = Eigen::MatrixXcd::Zero(nl, n), ct = Eigen::MatrixXcd::Zero(nl, n);
  Eigen::VectorXcd ytt(nl), yff(nl), yft(nl), ytf(nl);
  for (int l = 0; l < nl; ++l) {
    const auto& br = net.branches[l];
    const cd ys = cd(1.0, 0.0) / cd(br.series_r, br.series_x);
    const cd bc(0.0, br.charging_b);
    const cd t = br.tap_ratio * std::exp(cd(0.0, br.phase_shift));
    ytt[l] = ys + bc / 2.0;
    yff[l] = ytt[l] / (t * std::conj(t));
    yft[l] = -ys / std::conj(t);
    ytf[l] = -ys / t;
    cf(l, br.from) = 1.0;
    ct(l, br.to) = 1.0;
  }
  const Eigen::MatrixXcd yf = yff.asDiagonal() * cf + yft.asDiagonal() * ct;
  const Eigen::MatrixXcd yt = ytf.asDiagonal() * cf + ytt.asDiagonal() * ct;
  Eigen::MatrixXcd y = cf.transpose() * yf + ct.transpose() * yt;
  for (int i = 0; i < n; ++i) y(i, i) += cd(net.buses[i].shunt_g, net.buses[i].shunt_b);
  return y;
}

void polar_injections(const Eigen::MatrixXcd& y, const Vector& v, const Vector& theta, Vector& p, Vector& q) {
  const int n = static_cast<int>(v.size());
  p = Vector::Zero(n);
  q = Vector::Zero(n);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < n; ++k) {
      const double g = y(i, k).real(), b = y(i, k).imag();
      const double d = theta[i] - theta[k];
      p[i] += v[i] * v[k] * (g * std::cos(d) + b * std::sin(d));
      q[i] += v[i] * v[k] * (g * std::sin(d) - b * std::cos(d));
    }
  }
}

Matrix central_difference(const std::function<Vector(const Vector&)>& f, const Vector& z, double h) {
  const Vector f0 = f(z);
  Matrix J(f0.size(), z.size());
  for (Eigen::Index j = 0; j < z.size(); ++j) {
    Vector zp = z, zm = z;
    zp[j] += h;
    zm[j] -= h;
    J.col(j) = (f(zp) - f(zm)) / (2.0 * h);
  }
  return J;
}

double relative_error(const Matrix& analytic, const Matrix& fd) {
  if (analytic.size() == 0) return 0.0;
  const double scale = std::max(1.0, fd.cwiseAbs().maxCoeff());
  return (analytic - fd).cwiseAbs().maxCoeff() / scale;
}

GsResult gauss_seidel(const gridlqr::NetworkCase& net, const Eigen::MatrixXcd& y, double tol, int max_iter) {
  const int n = net.num_buses();
  const int ng = net.num_generators();
  Eigen::VectorXcd V(n);
  Eigen::VectorXcd S(n);
  for (int i = 0; i < n; ++i) {
    const auto& bus = net.buses[i];
    double vm = 1.0;
    double p = -bus.p_load0;
    if (i < ng) {
      vm = net.generators[i].v_set;
      p += net.generators[i].p_set;
    }
    const double th = i == net.slack ? bus.theta_init : 0.0;
    V[i] = std::polar(vm, th);
    S[i] = cd(p, -bus.q_load0);
  }
  GsResult out;
  for (int it = 1; it <= max_iter; ++it) {
    double change = 0.0;
    for (int i = 0; i < n; ++i) {
      if (i == net.slack) continue;
      const cd yv = y.row(i) * V;
      cd s = S[i];
      if (i < ng) s = cd(s.real(), (V[i] * std::conj(yv)).imag());
      const cd others = yv - y(i, i) * V[i];
      cd vi = (std::conj(s) / std::conj(V[i]) - others) / y(i, i);
      if (i < ng) vi *= net.generators[i].v_set / std::abs(vi);
      change = std::max(change, std::abs(vi - V[i]));
      V[i] = vi;
    }
    out.iterations = it;
    if (change < tol) break;
  }
  out.v = V.cwiseAbs();
  out.theta = V.unaryExpr([](cd c) { return cd(std::arg(c), 0.0); }).real();
  return out;
}

Matrix lyapunov_kron(const Matrix& A, const Matrix& C) {
  const Eigen::Index n = A.rows();
  const Matrix I = Matrix::Identity(n, n);
  const Matrix L = Eigen::kroneckerProduct(I, A.transpose()) + Eigen::kroneckerProduct(A.transpose(), I);
  const Vector c = Eigen::Map<const Vector>(C.data(), n * n);
  const Vector x = L.fullPivLu().solve(-c);
  Matrix X = Eigen::Map<const Matrix>(x.data(), n, n);
  return 0.5 * (X + X.transpose());
}

Matrix kleinman(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R, int max_iter) {
  const Eigen::Index n = A.rows();
  const Matrix Rinv = R.inverse();
  const double beta = A.cwiseAbs().rowwise().sum().maxCoeff() + 1.0;
  const Matrix Ab = -(A + beta * Matrix::Identity(n, n));
  // Ab Z + Z Ab' = -2 B B'  <=>  (Ab')' Z + Z (Ab') + 2BB' = 0
  const Matrix Z = lyapunov_kron(Ab.transpose(), 2.0 * B * B.transpose());
  Matrix K = -B.transpose() * Z.inverse();
  if (gridlqr::spectral_abscissa(A + B * K) >= 0.0) throw std::runtime_error("Bass gain not stabilizing");
  Matrix P = Matrix::Zero(n, n);
  for (int it = 0; it < max_iter; ++it) {
    const Matrix Ak = A + B * K;
    const Matrix Pn = lyapunov_kron(Ak, Q + K.transpose() * R * K);
    K = -Rinv * B.transpose() * Pn;
    const double step = (Pn - P).norm();
    P = Pn;
    if (step <= 1e-14 * std::max(1.0, P.norm())) break;
  }
  return P;
}

namespace {

// Solves the equality-constrained subproblem with `code[j]` = 0 free, 1 at lb,
// 2 at ub. Returns false when the KKT matrix is singular or the point fails a
// sign or feasibility test.
bool try_active_set(const gridlqr::QpProblem& qp, const std::vector<int>& code, Vector& x) {
  const Eigen::Index n = qp.H.rows(), m = qp.A_eq.rows();
  std::vector<int> free;
  x = Vector::Zero(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    if (code[j] == 0) free.push_back(static_cast<int>(j));
    else x[j] = code[j] == 1 ? qp.lb[j] : qp.ub[j];
  }
  const Eigen::Index nf = static_cast<Eigen::Index>(free.size());
  Matrix K = Matrix::Zero(nf + m, nf + m);
  Vector rhs(nf + m);
  const Vector hx_fixed = qp.H * x;
  const Vector ax_fixed = qp.A_eq * x;
  for (Eigen::Index a = 0; a < nf; ++a) {
    for (Eigen::Index b = 0; b < nf; ++b) K(a, b) = qp.H(free[a], free[b]);
    for (Eigen::Index r = 0; r < m; ++r) {
      K(a, nf + r) = qp.A_eq(r, free[a]);
      K(nf + r, a) = qp.A_eq(r, free[a]);
    }
    rhs[a] = -qp.f[free[a]] - hx_fixed[free[a]];
  }
  for (Eigen::Index r = 0; r < m; ++r) rhs[nf + r] = qp.b_eq[r] - ax_fixed[r];
  Eigen::FullPivLU<Matrix> lu(K);
  if (lu.rank() < nf + m) return false;
  const Vector sol = lu.solve(rhs);
  for (Eigen::Index a = 0; a < nf; ++a) x[free[a]] = sol[a];
  const double tol = 1e-9;
  for (Eigen::Index a = 0; a < nf; ++a) {
    const int j = free[a];
    if (x[j] < qp.lb[j] - tol || x[j] > qp.ub[j] + tol) return false;
  }
  const Vector grad = qp.H * x + qp.f + qp.A_eq.transpose() * sol.tail(m);
  for (Eigen::Index j = 0; j < n; ++j) {
    if (code[j] == 1 && grad[j] < -tol) return false;
    if (code[j] == 2 && grad[j] > tol) return false;
  }
  return true;
}

}  // namespace

bool qp_enumerate(const gridlqr::QpProblem& qp, Vector& x, double& objective) {
  const int n = static_cast<int>(qp.H.rows());
  long total = 1;
  for (int j = 0; j < n; ++j) total *= 3;
  std::vector<int> code(n);
  for (int active = 0; active <= n; ++active) {
    for (long c = 0; c < total; ++c) {
      long t = c;
      int count = 0;
      for (int j = 0; j < n; ++j) {
        code[j] = static_cast<int>(t % 3);
        t /= 3;
        count += code[j] != 0;
      }
      if (count != active) continue;
      if (try_active_set(qp, code, x)) {
        objective = 0.5 * x.dot(qp.H * x) + qp.f.dot(x);
        return true;
      }
    }
  }
  return false;
}

double linear_cost(const Matrix& A, const Matrix& B, const Matrix& K, const Matrix& Q, const Matrix& R,
                   const Vector& x0, double t_lqr, double dt, double t_final) {
  const Matrix Acl = A + B * K;
  const Matrix W = Q + K.transpose() * R * K;
  const Matrix Phi = (Acl * dt).exp();
  Vector x = x0;
  double l0 = x.dot(W * x);
  double cost = 0.0;
  const int steps = static_cast<int>(std::llround(t_final / dt));
  for (int s = 0; s < steps; ++s) {
    x = Phi * x;
    const double l1 = x.dot(W * x);
    cost += 0.5 * dt * (l0 + l1);
    l0 = l1;
  }
  return 0.5 * t_lqr * cost;
}

void random_pair(std::mt19937& rng, int n, int m, Matrix& A, Matrix& B) {
  std::normal_distribution<double> nd(0.0, 1.0);
  A = Matrix::NullaryExpr(n, n, [&] { return nd(rng); }) / std::sqrt(static_cast<double>(n));
  B = Matrix::NullaryExpr(n, m, [&] { return nd(rng); });
}

gridlqr::QpProblem random_qp(std::mt19937& rng, int n, int m_eq) {
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  gridlqr::QpProblem qp;
  const Matrix M = Matrix::NullaryExpr(n, n, [&] { return nd(rng); });
  qp.H = M.transpose() * M + 0.1 * Matrix::Identity(n, n);
  qp.f = 3.0 * Vector::NullaryExpr(n, [&] { return nd(rng); });
  qp.lb = Vector::NullaryExpr(n, [&] { return -0.2 - 0.8 * ud(rng); });
  qp.ub = Vector::NullaryExpr(n, [&] { return 0.2 + 0.8 * ud(rng); });
  const Vector inside = Vector::NullaryExpr(n, [&] { return 0.2 * (2.0 * ud(rng) - 1.0); });
  qp.A_eq = Matrix::NullaryExpr(m_eq, n, [&] { return nd(rng); });
  qp.b_eq = qp.A_eq * inside;
  return qp;
}

}  // namespace oracle
