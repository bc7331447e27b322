#include "gridlqr/qp_solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <utility>
#include <vector>

#include "gridlqr/errors.hpp"

namespace gridlqr {

const char* to_string(QpStatus s) {
  switch (s) {
    case QpStatus::kOptimal: return "optimal";
    case QpStatus::kInfeasible: return "infeasible";
    case QpStatus::kMaxIterations: return "max-iterations";
  }
  return "?";
}

namespace {

double max_step(const Vector& s, const Vector& ds, const std::vector<int>& idx) {
  double a = 1.0;
  for (int j : idx) {
    if (ds[j] < 0.0) a = std::min(a, -s[j] / ds[j]);
  }
  return a;
}

}  // namespace

QpResult solve_qp(const QpProblem& qp, const QpOptions& opts) {
  const Eigen::Index n = qp.H.rows();
  if (qp.H.cols() != n || qp.f.size() != n || qp.lb.size() != n || qp.ub.size() != n ||
      qp.A_eq.cols() != (qp.A_eq.rows() ? n : qp.A_eq.cols()) || qp.A_eq.rows() != qp.b_eq.size()) {
    throw ConfigError("solve_qp: dimension mismatch");
  }
  QpResult res;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (qp.lb[j] > qp.ub[j]) {
      res.status = QpStatus::kInfeasible;
      res.warnings.emplace_back("empty box interval");
      res.x = Vector::Zero(n);
      return res;
    }
  }

  // Fixed variables become equality rows; the rest keep their finite bounds.
  std::vector<int> fixed, lower, upper;
  for (int j = 0; j < n; ++j) {
    if (qp.lb[j] == qp.ub[j]) {
      fixed.push_back(j);
      continue;
    }
    if (std::isfinite(qp.lb[j])) lower.push_back(j);
    if (std::isfinite(qp.ub[j])) upper.push_back(j);
  }
  const Eigen::Index m_all = qp.A_eq.rows() + static_cast<Eigen::Index>(fixed.size());
  Matrix A_all = Matrix::Zero(m_all, n);
  Vector b_all(m_all);
  if (qp.A_eq.rows() > 0) {
    A_all.topRows(qp.A_eq.rows()) = qp.A_eq;
    b_all.head(qp.A_eq.rows()) = qp.b_eq;
  }
  for (size_t k = 0; k < fixed.size(); ++k) {
    A_all(qp.A_eq.rows() + k, fixed[k]) = 1.0;
    b_all[qp.A_eq.rows() + k] = qp.lb[fixed[k]];
  }
  for (Eigen::Index r = 0; r < m_all; ++r) {
    const double s = A_all.row(r).lpNorm<Eigen::Infinity>();
    if (s > 0.0) {
      A_all.row(r) /= s;
      b_all[r] /= s;
    }
  }

  std::vector<int> keep;
  if (m_all > 0) {
    Eigen::ColPivHouseholderQR<Matrix> qr(A_all.transpose());
    qr.setThreshold(opts.rank_tolerance);
    const Eigen::Index rank = qr.rank();
    for (Eigen::Index k = 0; k < rank; ++k) keep.push_back(qr.colsPermutation().indices()[k]);
    std::sort(keep.begin(), keep.end());
  }
  const Eigen::Index m = static_cast<Eigen::Index>(keep.size());
  res.dropped_rows = static_cast<int>(m_all - m);
  if (res.dropped_rows > 0) {
    res.warnings.emplace_back(std::to_string(res.dropped_rows) + " dependent equality rows dropped");
  }
  Matrix A(m, n);
  Vector b(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    A.row(k) = A_all.row(keep[k]);
    b[k] = b_all[keep[k]];
  }

  const double obj_scale = std::max({1.0, qp.f.lpNorm<Eigen::Infinity>(), qp.H.lpNorm<Eigen::Infinity>()});
  const Matrix H = qp.H / obj_scale;
  const Vector f = qp.f / obj_scale;

  Vector x = opts.x_init ? *opts.x_init : Vector::Zero(n);
  if (x.size() != n) throw ConfigError("solve_qp: x_init dimension mismatch");
  for (int j = 0; j < n; ++j) {
    const bool hl = std::isfinite(qp.lb[j]), hu = std::isfinite(qp.ub[j]);
    if (hl && hu) {
      const double w = qp.ub[j] - qp.lb[j];
      x[j] = std::clamp(x[j], qp.lb[j] + 0.1 * w, qp.ub[j] - 0.1 * w);
    } else if (hl) {
      x[j] = std::max(x[j], qp.lb[j] + 1.0);
    } else if (hu) {
      x[j] = std::min(x[j], qp.ub[j] - 1.0);
    }
  }
  for (int j : fixed) x[j] = qp.lb[j];

  Vector y = Vector::Zero(m);
  Vector zl = Vector::Zero(n), zu = Vector::Zero(n);
  Vector sl = Vector::Ones(n), su = Vector::Ones(n);
  for (int j : lower) zl[j] = 1.0;
  for (int j : upper) zu[j] = 1.0;
  const double n_bounds = static_cast<double>(lower.size() + upper.size());

  auto slacks = [&]() {
    for (int j : lower) sl[j] = x[j] - qp.lb[j];
    for (int j : upper) su[j] = qp.ub[j] - x[j];
  };
  auto complementarity = [&](const Vector& s_l, const Vector& z_l, const Vector& s_u, const Vector& z_u) {
    double acc = 0.0;
    for (int j : lower) acc += s_l[j] * z_l[j];
    for (int j : upper) acc += s_u[j] * z_u[j];
    return n_bounds > 0 ? acc / n_bounds : 0.0;
  };

  const double f_norm = 1.0 + f.lpNorm<Eigen::Infinity>();
  const double b_norm = 1.0 + b.lpNorm<Eigen::Infinity>();
  Matrix K(n + m, n + m);
  Vector rhs(n + m);

  for (res.iterations = 0;; ++res.iterations) {
    slacks();
    const Vector rd = H * x + f - A.transpose() * y - zl + zu;
    const Vector rp = A * x - b;
    const double mu = complementarity(sl, zl, su, zu);
    res.dual_residual = rd.lpNorm<Eigen::Infinity>() / f_norm;
    const double p_rel = m ? rp.lpNorm<Eigen::Infinity>() / b_norm : 0.0;
    res.complementarity = mu;
    if (res.dual_residual <= opts.tolerance && p_rel <= opts.tolerance && mu <= opts.tolerance) {
      res.status = QpStatus::kOptimal;
      break;
    }
    if (!std::isfinite(mu + res.dual_residual + p_rel) || x.lpNorm<Eigen::Infinity>() > 1e14) {
      res.status = QpStatus::kInfeasible;
      res.warnings.emplace_back("iterates diverged");
      break;
    }
    if (res.iterations >= opts.max_iterations) {
      res.status = mu < 1e-9 && p_rel > 1e-6 ? QpStatus::kInfeasible : QpStatus::kMaxIterations;
      break;
    }

    Vector sigma_diag = Vector::Zero(n);
    for (int j : lower) sigma_diag[j] += zl[j] / sl[j];
    for (int j : upper) sigma_diag[j] += zu[j] / su[j];
    K.setZero();
    K.topLeftCorner(n, n) = H;
    K.topLeftCorner(n, n).diagonal() += sigma_diag;
    K.topRightCorner(n, m) = A.transpose();
    K.bottomLeftCorner(m, n) = A;
    Eigen::PartialPivLU<Matrix> lu(K);

    // Solves for dx given complementarity targets rc_l, rc_u.
    auto direction = [&](const Vector& rcl, const Vector& rcu, Vector& dx, Vector& dy, Vector& dzl,
                         Vector& dzu) {
      rhs.head(n) = -rd;
      for (int j : lower) rhs[j] += rcl[j] / sl[j];
      for (int j : upper) rhs[j] -= rcu[j] / su[j];
      rhs.tail(m) = -rp;
      Vector sol = lu.solve(rhs);
      sol += lu.solve(rhs - K * sol);
      dx = sol.head(n);
      dy = -sol.tail(m);
      dzl.setZero(n);
      dzu.setZero(n);
      for (int j : lower) dzl[j] = (rcl[j] - zl[j] * dx[j]) / sl[j];
      for (int j : upper) dzu[j] = (rcu[j] + zu[j] * dx[j]) / su[j];
    };
    auto step_length = [&](const Vector& dx, const Vector& dzl, const Vector& dzu) {
      const Vector neg_dx = -dx;
      return std::min({max_step(sl, dx, lower), max_step(su, neg_dx, upper), max_step(zl, dzl, lower),
                       max_step(zu, dzu, upper)});
    };

    Vector rcl = Vector::Zero(n), rcu = Vector::Zero(n);
    for (int j : lower) rcl[j] = -sl[j] * zl[j];
    for (int j : upper) rcu[j] = -su[j] * zu[j];
    Vector dx, dy, dzl, dzu;
    direction(rcl, rcu, dx, dy, dzl, dzu);
    const double a_aff = step_length(dx, dzl, dzu);
    const Vector sl_aff = sl + a_aff * dx, su_aff = su - a_aff * dx;
    const double mu_aff = complementarity(sl_aff, zl + a_aff * dzl, su_aff, zu + a_aff * dzu);
    const double sigma = mu > 0.0 ? std::pow(mu_aff / mu, 3) : 0.0;

    for (int j : lower) rcl[j] += -dx[j] * dzl[j] + sigma * mu;
    for (int j : upper) rcu[j] += dx[j] * dzu[j] + sigma * mu;
    direction(rcl, rcu, dx, dy, dzl, dzu);
    const double eta = std::max(0.99, 1.0 - mu);
    const double a = std::min(1.0, eta * step_length(dx, dzl, dzu));
    x += a * dx;
    y += a * dy;
    zl += a * dzl;
    zu += a * dzu;
    for (int j : fixed) x[j] = qp.lb[j];
  }

  if (res.status == QpStatus::kOptimal) {
    // Active-set polish: re-solve the KKT system with the identified bounds
    // held as equalities and keep it when it stays primal and dual feasible.
    std::vector<std::pair<int, double>> active;  // (index, +1 lower / -1 upper)
    for (int j : lower) {
      if (sl[j] < zl[j]) active.emplace_back(j, 1.0);
    }
    for (int j : upper) {
      if (su[j] < zu[j]) active.emplace_back(j, -1.0);
    }
    const Eigen::Index na = static_cast<Eigen::Index>(active.size()), mc = m + na;
    Matrix C = Matrix::Zero(mc, n);
    Vector c(mc);
    C.topRows(m) = A;
    c.head(m) = b;
    for (Eigen::Index k = 0; k < na; ++k) {
      const auto [j, sgn] = active[k];
      C(m + k, j) = sgn;
      c[m + k] = sgn * (sgn > 0 ? qp.lb[j] : qp.ub[j]);
    }
    Matrix KKT = Matrix::Zero(n + mc, n + mc);
    KKT.topLeftCorner(n, n) = H;
    KKT.topRightCorner(n, mc) = -C.transpose();
    KKT.bottomLeftCorner(mc, n) = C;
    Vector r(n + mc);
    r << -f, c;
    const Eigen::FullPivLU<Matrix> lu(KKT);
    if (lu.isInvertible()) {
      const Vector sol = lu.solve(r);
      const Vector xp = sol.head(n);
      bool ok = (KKT * sol - r).lpNorm<Eigen::Infinity>() <= 1e-9 * (1.0 + r.lpNorm<Eigen::Infinity>());
      for (Eigen::Index k = 0; ok && k < na; ++k) ok = sol[n + m + k] >= -1e-9;
      for (Eigen::Index j = 0; ok && j < n; ++j) {
        ok = xp[j] >= qp.lb[j] - 1e-9 * (1.0 + std::abs(qp.lb[j])) &&
             xp[j] <= qp.ub[j] + 1e-9 * (1.0 + std::abs(qp.ub[j]));
      }
      if (ok) {
        x = xp;
        y = sol.segment(n, m);
      }
    }
  }

  res.x = x.cwiseMax(qp.lb).cwiseMin(qp.ub);
  res.y = y * obj_scale;
  res.objective = 0.5 * res.x.dot(qp.H * res.x) + qp.f.dot(res.x);
  res.primal_residual = m_all ? (A_all * res.x - b_all).lpNorm<Eigen::Infinity>() : 0.0;
  if (res.status == QpStatus::kOptimal && res.dropped_rows > 0 &&
      res.primal_residual > 1e3 * opts.tolerance * (1.0 + b_all.lpNorm<Eigen::Infinity>())) {
    res.status = QpStatus::kInfeasible;
    res.warnings.emplace_back("dropped equality rows are inconsistent");
  }
  return res;
}

}  // namespace gridlqr
