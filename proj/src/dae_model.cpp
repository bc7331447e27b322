#include "gridlqr/dae_model.hpp"

#include <cmath>
#include <string>

#include "gridlqr/errors.hpp"

namespace gridlqr {
namespace {

using cd = std::complex<double>;

void check_sizes(const Layout& lay, const Vector& x, const Vector& a) {
  if (x.size() != lay.nx() || a.size() != lay.na()) {
    throw ConfigError("dimension mismatch: x has " + std::to_string(x.size()) + " (expected " +
                      std::to_string(lay.nx()) + "), a has " + std::to_string(a.size()) +
                      " (expected " + std::to_string(lay.na()) + ")");
  }
}

// Coefficients of the salient-pole stator equations.
struct StatorCoeffs {
  double inv_xdp;  // 1 / x'd
  double c_sal;    // (x'd - xq) / (2 xq x'd)
  double c_avg;    // (x'd + xq) / (2 xq x'd)
};

StatorCoeffs stator_coeffs(const MachineParams& m) {
  const double denom = 2.0 * m.x_q * m.x_d_prime;
  return {1.0 / m.x_d_prime, (m.x_d_prime - m.x_q) / denom, (m.x_d_prime + m.x_q) / denom};
}

}  // namespace

PowerSystem::PowerSystem(NetworkCase net, BaseFrequency freq)
    : net_(std::move(net)), freq_(freq), ybus_(build_ybus(net_)) {
  y_.resize(ybus_.size(), ybus_.size());
  y_.real() = ybus_.g;
  y_.imag() = ybus_.b;
  layout_.G = net_.num_generators();
  layout_.N = net_.num_buses();
}

Injections bus_injections(const Eigen::MatrixXcd& y, const Vector& v, const Vector& theta) {
  const Eigen::Index n = v.size();
  Eigen::VectorXcd volt(n);
  for (Eigen::Index k = 0; k < n; ++k) volt[k] = std::polar(v[k], theta[k]);
  const Eigen::VectorXcd current = y * volt;
  Injections s{Vector(n), Vector(n)};
  for (Eigen::Index k = 0; k < n; ++k) {
    const cd sk = volt[k] * std::conj(current[k]);
    s.p[k] = sk.real();
    s.q[k] = sk.imag();
  }
  return s;
}

InjectionJacobian injection_jacobian(const Eigen::MatrixXcd& y, const Vector& v, const Vector& theta) {
  const Eigen::Index n = v.size();
  Eigen::VectorXcd volt(n), unit(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    unit[k] = std::polar(1.0, theta[k]);
    volt[k] = v[k] * unit[k];
  }
  const Eigen::VectorXcd current = y * volt;
  InjectionJacobian jac{Matrix(n, n), Matrix(n, n), Matrix(n, n), Matrix(n, n)};
  const cd j(0.0, 1.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < n; ++k) {
      cd ds_dtheta = -j * volt[i] * std::conj(y(i, k) * volt[k]);
      cd ds_dv = volt[i] * std::conj(y(i, k) * unit[k]);
      if (i == k) {
        ds_dtheta += j * volt[i] * std::conj(current[i]);
        ds_dv += std::conj(current[i]) * unit[i];
      }
      jac.dp_dtheta(i, k) = ds_dtheta.real();
      jac.dq_dtheta(i, k) = ds_dtheta.imag();
      jac.dp_dv(i, k) = ds_dv.real();
      jac.dq_dv(i, k) = ds_dv.imag();
    }
  }
  return jac;
}

Vector load_vector(const Layout& lay, const Vector& p_load, const Vector& q_load) {
  Vector d = Vector::Zero(lay.nh());
  for (int k = 0; k < lay.N; ++k) {
    d[lay.bus_p(k)] = -p_load[k];
    d[lay.bus_q(k)] = -q_load[k];
  }
  return d;
}

Vector base_load_vector(const NetworkCase& net) {
  const Layout lay{net.num_generators(), net.num_buses()};
  Vector p(lay.N), q(lay.N);
  for (int k = 0; k < lay.N; ++k) {
    p[k] = net.buses[k].p_load0;
    q[k] = net.buses[k].q_load0;
  }
  return load_vector(lay, p, q);
}

Vector eval_g(const PowerSystem& sys, const Vector& x, const Vector& a, const Vector& u) {
  const Layout& lay = sys.layout();
  check_sizes(lay, x, a);
  if (u.size() != lay.nu()) throw ConfigError("dimension mismatch: u");
  const double ws = sys.omega_s();
  Vector xdot(lay.nx());
  for (int i = 0; i < lay.G; ++i) {
    const MachineParams& mp = sys.net().generators[i].machine;
    const double dw = x[lay.omega(i)] - ws;
    const double phi = x[lay.delta(i)] - a[lay.theta(i)];
    xdot[lay.delta(i)] = dw;
    xdot[lay.omega(i)] = (x[lay.mech(i)] - mp.damping * dw - a[lay.pg(i)]) / mp.inertia;
    xdot[lay.emf(i)] = (-(mp.x_d / mp.x_d_prime) * x[lay.emf(i)] +
                        ((mp.x_d - mp.x_d_prime) / mp.x_d_prime) * a[lay.v(i)] * std::cos(phi) +
                        u[lay.field(i)]) /
                       mp.tau_d;
    // Droop R is in Hz/pu, so the speed deviation is converted to Hz first.
    xdot[lay.mech(i)] = (u[lay.ref(i)] - (dw / (2.0 * std::numbers::pi)) / mp.droop - x[lay.mech(i)]) / mp.tau_c;
  }
  return xdot;
}

Vector eval_h(const PowerSystem& sys, const Vector& x, const Vector& a) {
  const Layout& lay = sys.layout();
  check_sizes(lay, x, a);
  Vector h(lay.nh());
  for (int i = 0; i < lay.G; ++i) {
    const StatorCoeffs c = stator_coeffs(sys.net().generators[i].machine);
    const double phi = x[lay.delta(i)] - a[lay.theta(i)];
    const double e = x[lay.emf(i)];
    const double v = a[lay.v(i)];
    h[lay.stator_p(i)] = -a[lay.pg(i)] + e * v * c.inv_xdp * std::sin(phi) + c.c_sal * v * v * std::sin(2 * phi);
    h[lay.stator_q(i)] = -a[lay.qg(i)] + e * v * c.inv_xdp * std::cos(phi) - c.c_avg * v * v +
                         c.c_sal * v * v * std::cos(2 * phi);
  }
  const Injections s = bus_injections(sys.ybus_complex(), a.segment(lay.v(0), lay.N), a.segment(lay.theta(0), lay.N));
  for (int k = 0; k < lay.N; ++k) {
    h[lay.bus_p(k)] = s.p[k] - (k < lay.G ? a[lay.pg(k)] : 0.0);
    h[lay.bus_q(k)] = s.q[k] - (k < lay.G ? a[lay.qg(k)] : 0.0);
  }
  return h;
}

ModelJacobians model_jacobians(const PowerSystem& sys, const Vector& x, const Vector& a) {
  const Layout& lay = sys.layout();
  check_sizes(lay, x, a);
  ModelJacobians J{Matrix::Zero(lay.nx(), lay.nx()), Matrix::Zero(lay.nx(), lay.na()),
                   Matrix::Zero(lay.nx(), lay.nu()), Matrix::Zero(lay.nh(), lay.nx()),
                   Matrix::Zero(lay.nh(), lay.na())};
  for (int i = 0; i < lay.G; ++i) {
    const MachineParams& mp = sys.net().generators[i].machine;
    const StatorCoeffs c = stator_coeffs(mp);
    const double phi = x[lay.delta(i)] - a[lay.theta(i)];
    const double e = x[lay.emf(i)];
    const double v = a[lay.v(i)];
    const double sp = std::sin(phi), cp = std::cos(phi);
    const double s2 = std::sin(2 * phi), c2 = std::cos(2 * phi);
    const double gain_e = (mp.x_d - mp.x_d_prime) / mp.x_d_prime;

    J.g_x(lay.delta(i), lay.omega(i)) = 1.0;
    J.g_x(lay.omega(i), lay.omega(i)) = -mp.damping / mp.inertia;
    J.g_x(lay.omega(i), lay.mech(i)) = 1.0 / mp.inertia;
    J.g_x(lay.emf(i), lay.emf(i)) = -(mp.x_d / mp.x_d_prime) / mp.tau_d;
    J.g_x(lay.emf(i), lay.delta(i)) = -gain_e * v * sp / mp.tau_d;
    J.g_x(lay.mech(i), lay.omega(i)) = -1.0 / (2.0 * std::numbers::pi * mp.droop * mp.tau_c);
    J.g_x(lay.mech(i), lay.mech(i)) = -1.0 / mp.tau_c;

    J.g_a(lay.omega(i), lay.pg(i)) = -1.0 / mp.inertia;
    J.g_a(lay.emf(i), lay.v(i)) = gain_e * cp / mp.tau_d;
    J.g_a(lay.emf(i), lay.theta(i)) = gain_e * v * sp / mp.tau_d;

    J.g_u(lay.emf(i), lay.field(i)) = 1.0 / mp.tau_d;
    J.g_u(lay.mech(i), lay.ref(i)) = 1.0 / mp.tau_c;

    const double dsp_dphi = e * v * c.inv_xdp * cp + 2.0 * c.c_sal * v * v * c2;
    const double dsq_dphi = -e * v * c.inv_xdp * sp - 2.0 * c.c_sal * v * v * s2;
    J.h_x(lay.stator_p(i), lay.delta(i)) = dsp_dphi;
    J.h_x(lay.stator_p(i), lay.emf(i)) = v * c.inv_xdp * sp;
    J.h_x(lay.stator_q(i), lay.delta(i)) = dsq_dphi;
    J.h_x(lay.stator_q(i), lay.emf(i)) = v * c.inv_xdp * cp;

    J.h_a(lay.stator_p(i), lay.pg(i)) = -1.0;
    J.h_a(lay.stator_p(i), lay.v(i)) = e * c.inv_xdp * sp + 2.0 * c.c_sal * v * s2;
    J.h_a(lay.stator_p(i), lay.theta(i)) = -dsp_dphi;
    J.h_a(lay.stator_q(i), lay.qg(i)) = -1.0;
    J.h_a(lay.stator_q(i), lay.v(i)) = e * c.inv_xdp * cp - 2.0 * c.c_avg * v + 2.0 * c.c_sal * v * c2;
    J.h_a(lay.stator_q(i), lay.theta(i)) = -dsq_dphi;
  }
  const InjectionJacobian inj = injection_jacobian(sys.ybus_complex(), a.segment(lay.v(0), lay.N),
                                                   a.segment(lay.theta(0), lay.N));
  for (int k = 0; k < lay.N; ++k) {
    for (int j = 0; j < lay.N; ++j) {
      J.h_a(lay.bus_p(k), lay.v(j)) = inj.dp_dv(k, j);
      J.h_a(lay.bus_p(k), lay.theta(j)) = inj.dp_dtheta(k, j);
      J.h_a(lay.bus_q(k), lay.v(j)) = inj.dq_dv(k, j);
      J.h_a(lay.bus_q(k), lay.theta(j)) = inj.dq_dtheta(k, j);
    }
    if (k < lay.G) {
      J.h_a(lay.bus_p(k), lay.pg(k)) = -1.0;
      J.h_a(lay.bus_q(k), lay.qg(k)) = -1.0;
    }
  }
  return J;
}

Matrix algebraic_jacobian(const PowerSystem& sys, const Vector& x, const Vector& a) {
  return model_jacobians(sys, x, a).h_a;
}

AlgebraicSolution solve_algebraic(const PowerSystem& sys, const Vector& x, const Vector& d,
                                  const Vector& a_guess, const AlgebraicOptions& opts) {
  AlgebraicSolution sol{a_guess, 0, 0.0};
  Vector r = eval_h(sys, x, sol.a) - d;
  sol.residual = r.lpNorm<Eigen::Infinity>();
  while (!(sol.residual <= opts.tolerance)) {
    if (sol.iterations >= opts.max_iterations || !std::isfinite(sol.residual)) {
      throw NonConvergence("algebraic Newton did not converge in " + std::to_string(sol.iterations) +
                           " iterations (residual " + std::to_string(sol.residual) + ")");
    }
    Eigen::PartialPivLU<Matrix> lu(algebraic_jacobian(sys, x, sol.a));
    const double rcond = lu.rcond();
    if (!(rcond * opts.max_condition >= 1.0)) {
      throw SingularMatrix("algebraic Jacobian h_a is singular (condition estimate " +
                           std::to_string(1.0 / rcond) + ")");
    }
    const Vector step = -lu.solve(r);
    double t = 1.0;
    Vector trial = sol.a + step;
    Vector r_trial = eval_h(sys, x, trial) - d;
    double norm_trial = r_trial.lpNorm<Eigen::Infinity>();
    for (int h = 0; h < opts.max_halvings && !(norm_trial < sol.residual); ++h) {
      t *= 0.5;
      trial = sol.a + t * step;
      r_trial = eval_h(sys, x, trial) - d;
      norm_trial = r_trial.lpNorm<Eigen::Infinity>();
    }
    sol.a = std::move(trial);
    r = std::move(r_trial);
    sol.residual = norm_trial;
    ++sol.iterations;
  }
  return sol;
}

AlgebraicSolver::AlgebraicSolver(const PowerSystem& sys, AlgebraicOptions opts)
    : sys_(sys), opts_(opts) {}

void AlgebraicSolver::refactor(const Vector& x, const Vector& a) {
  lu_.compute(algebraic_jacobian(sys_, x, a));
  if (!(lu_.rcond() * opts_.max_condition >= 1.0)) {
    have_factor_ = false;
    throw SingularMatrix("algebraic Jacobian h_a is singular along the trajectory");
  }
  have_factor_ = true;
  ++factorizations_;
}

AlgebraicSolution AlgebraicSolver::solve(const Vector& x, const Vector& d, const Vector& a_guess) {
  constexpr int kChordIterations = 12;
  constexpr double kMinContraction = 0.25;

  AlgebraicSolution sol{a_guess, 0, 0.0};
  Vector r = eval_h(sys_, x, sol.a) - d;
  sol.residual = r.lpNorm<Eigen::Infinity>();
  if (sol.residual <= opts_.tolerance) return sol;
  if (!have_factor_) refactor(x, sol.a);

  bool refreshed = false;
  while (sol.iterations < kChordIterations) {
    Vector trial = sol.a - lu_.solve(r);
    Vector r_trial = eval_h(sys_, x, trial) - d;
    const double norm_trial = r_trial.lpNorm<Eigen::Infinity>();
    ++sol.iterations;
    if (!std::isfinite(norm_trial) || norm_trial > kMinContraction * sol.residual) {
      if (norm_trial < sol.residual) {
        sol.a = std::move(trial);
        r = std::move(r_trial);
        sol.residual = norm_trial;
        if (sol.residual <= opts_.tolerance) return sol;
      }
      // Stale factor: refresh once at the current iterate, then fall back.
      if (refreshed) break;
      refactor(x, sol.a);
      refreshed = true;
      continue;
    }
    sol.a = std::move(trial);
    r = std::move(r_trial);
    sol.residual = norm_trial;
    if (sol.residual <= opts_.tolerance) return sol;
  }
  AlgebraicSolution full = solve_algebraic(sys_, x, d, a_guess, opts_);
  full.iterations += sol.iterations;
  refactor(x, full.a);
  return full;
}

}  // namespace gridlqr
