#include "gridlqr/steady_state.hpp"

#include <cmath>
#include <string>

#include "gridlqr/errors.hpp"

namespace gridlqr {
namespace {

struct FlowUnknowns {
  std::vector<int> theta_buses;  // every bus except the slack
  std::vector<int> v_buses;      // load buses
};

FlowUnknowns flow_unknowns(const Layout& lay, int slack) {
  FlowUnknowns u;
  for (int k = 0; k < lay.N; ++k) {
    if (k != slack) u.theta_buses.push_back(k);
    if (k >= lay.G) u.v_buses.push_back(k);
  }
  return u;
}

Vector newton_load_flow(const PowerSystem& sys, const Vector& d, const Setpoints& sp, Vector v,
                        Vector theta, const LoadFlowOptions& opts, bool damped) {
  const Layout& lay = sys.layout();
  const int slack = sys.net().slack;
  const FlowUnknowns unk = flow_unknowns(lay, slack);
  const int np = static_cast<int>(unk.theta_buses.size());
  const int nq = static_cast<int>(unk.v_buses.size());

  Vector p_spec(lay.N), q_spec(lay.N);
  for (int k = 0; k < lay.N; ++k) {
    p_spec[k] = (k < lay.G ? sp.p_gen[k] : 0.0) + d[lay.bus_p(k)];
    q_spec[k] = d[lay.bus_q(k)];
  }

  auto mismatch = [&](const Vector& vv, const Vector& tt) {
    const Injections s = bus_injections(sys.ybus_complex(), vv, tt);
    Vector f(np + nq);
    for (int r = 0; r < np; ++r) f[r] = s.p[unk.theta_buses[r]] - p_spec[unk.theta_buses[r]];
    for (int r = 0; r < nq; ++r) f[np + r] = s.q[unk.v_buses[r]] - q_spec[unk.v_buses[r]];
    return f;
  };

  Vector f = mismatch(v, theta);
  double norm = f.lpNorm<Eigen::Infinity>();
  int it = 0;
  while (!(norm <= opts.tolerance)) {
    if (it >= opts.max_iterations || !std::isfinite(norm)) {
      throw NonConvergence("load flow did not converge (mismatch " + std::to_string(norm) + ")");
    }
    const InjectionJacobian jac = injection_jacobian(sys.ybus_complex(), v, theta);
    Matrix J(np + nq, np + nq);
    for (int r = 0; r < np; ++r) {
      const int k = unk.theta_buses[r];
      for (int c = 0; c < np; ++c) J(r, c) = jac.dp_dtheta(k, unk.theta_buses[c]);
      for (int c = 0; c < nq; ++c) J(r, np + c) = jac.dp_dv(k, unk.v_buses[c]);
    }
    for (int r = 0; r < nq; ++r) {
      const int k = unk.v_buses[r];
      for (int c = 0; c < np; ++c) J(np + r, c) = jac.dq_dtheta(k, unk.theta_buses[c]);
      for (int c = 0; c < nq; ++c) J(np + r, np + c) = jac.dq_dv(k, unk.v_buses[c]);
    }
    Eigen::PartialPivLU<Matrix> lu(J);
    if (!(lu.rcond() * 1e12 >= 1.0)) throw SingularMatrix("load-flow Jacobian is singular");
    const Vector step = -lu.solve(f);
    double t = 1.0;
    for (int attempt = 0;; ++attempt) {
      Vector v_try = v, t_try = theta;
      for (int r = 0; r < np; ++r) t_try[unk.theta_buses[r]] += t * step[r];
      for (int r = 0; r < nq; ++r) v_try[unk.v_buses[r]] += t * step[np + r];
      Vector f_try = mismatch(v_try, t_try);
      const double n_try = f_try.lpNorm<Eigen::Infinity>();
      if (!damped || n_try < norm || attempt >= 8) {
        v = std::move(v_try);
        theta = std::move(t_try);
        f = std::move(f_try);
        norm = n_try;
        break;
      }
      t *= 0.5;
    }
    ++it;
  }

  const Injections s = bus_injections(sys.ybus_complex(), v, theta);
  Vector a(lay.na());
  for (int i = 0; i < lay.G; ++i) {
    a[lay.pg(i)] = i == slack ? s.p[i] - d[lay.bus_p(i)] : sp.p_gen[i];
    a[lay.qg(i)] = s.q[i] - d[lay.bus_q(i)];
  }
  a.segment(lay.v(0), lay.N) = v;
  a.segment(lay.theta(0), lay.N) = theta;
  return a;
}

}  // namespace

Setpoints case_setpoints(const NetworkCase& net) {
  const int G = net.num_generators();
  Setpoints sp{Vector(G), Vector(G), net.buses[net.slack].theta_init};
  for (int i = 0; i < G; ++i) {
    sp.v_gen[i] = net.generators[i].v_set;
    sp.p_gen[i] = net.generators[i].p_set;
  }
  return sp;
}

Setpoints setpoints_from(const Layout& lay, int slack, const Vector& a) {
  Setpoints sp{a.segment(lay.v(0), lay.G), a.segment(lay.pg(0), lay.G), a[lay.theta(slack)]};
  return sp;
}

Vector load_flow(const PowerSystem& sys, const Vector& d, const Setpoints& sp,
                 const LoadFlowOptions& opts) {
  const Layout& lay = sys.layout();
  if (sp.v_gen.size() != lay.G || sp.p_gen.size() != lay.G || d.size() != lay.nh()) {
    throw ConfigError("load flow: setpoint or load dimension mismatch");
  }
  Vector v_flat = Vector::Ones(lay.N);
  v_flat.head(lay.G) = sp.v_gen;
  const Vector theta_flat = Vector::Constant(lay.N, sp.theta_slack);

  Vector v0 = v_flat, t0 = theta_flat;
  if (opts.a_guess) {
    v0 = opts.a_guess->segment(lay.v(0), lay.N);
    v0.head(lay.G) = sp.v_gen;
    t0 = opts.a_guess->segment(lay.theta(0), lay.N);
    t0[sys.net().slack] = sp.theta_slack;
  }
  try {
    return newton_load_flow(sys, d, sp, v0, t0, opts, false);
  } catch (const NonConvergence&) {
    return newton_load_flow(sys, d, sp, v_flat, theta_flat, opts, true);
  }
}

GeneratorEquilibrium init_generators(const PowerSystem& sys, const Vector& a) {
  const Layout& lay = sys.layout();
  if (a.size() != lay.na()) throw ConfigError("init_generators: dimension mismatch");
  GeneratorEquilibrium eq{Vector(lay.nx()), Vector(lay.nu())};
  for (int i = 0; i < lay.G; ++i) {
    const MachineParams& mp = sys.net().generators[i].machine;
    const double pg = a[lay.pg(i)], qg = a[lay.qg(i)];
    const double v = a[lay.v(i)], theta = a[lay.theta(i)];
    const double inv_xdp = 1.0 / mp.x_d_prime;
    const double c_sal = (mp.x_d_prime - mp.x_q) / (2.0 * mp.x_q * mp.x_d_prime);
    const double c_avg = (mp.x_d_prime + mp.x_q) / (2.0 * mp.x_q * mp.x_d_prime);

    // Salient-pole seed for the load angle, then e from the reactive equation.
    double phi = std::atan2(pg * mp.x_q, v * v + qg * mp.x_q);
    double e = (qg + c_avg * v * v - c_sal * v * v * std::cos(2 * phi)) / (v * inv_xdp * std::cos(phi));

    int it = 0;
    for (;; ++it) {
      const double sp = std::sin(phi), cp = std::cos(phi);
      const double s2 = std::sin(2 * phi), c2 = std::cos(2 * phi);
      const double f1 = -pg + e * v * inv_xdp * sp + c_sal * v * v * s2;
      const double f2 = -qg + e * v * inv_xdp * cp - c_avg * v * v + c_sal * v * v * c2;
      if (std::abs(f1) + std::abs(f2) <= 1e-14 * (1.0 + std::abs(pg) + std::abs(qg))) break;
      if (it >= 50 || !std::isfinite(f1 + f2)) {
        throw NonConvergence("generator " + std::to_string(sys.net().buses[i].id) +
                             ": stator equations did not converge (infeasible machine loading)");
      }
      const double j11 = e * v * inv_xdp * cp + 2.0 * c_sal * v * v * c2;
      const double j12 = v * inv_xdp * sp;
      const double j21 = -e * v * inv_xdp * sp - 2.0 * c_sal * v * v * s2;
      const double j22 = v * inv_xdp * cp;
      const double det = j11 * j22 - j12 * j21;
      if (det == 0.0) throw NonConvergence("generator stator Jacobian is singular");
      phi -= (j22 * f1 - j12 * f2) / det;
      e -= (-j21 * f1 + j11 * f2) / det;
    }
    eq.x[lay.delta(i)] = theta + phi;
    eq.x[lay.omega(i)] = sys.omega_s();
    eq.x[lay.emf(i)] = e;
    eq.x[lay.mech(i)] = pg;
    eq.u[lay.ref(i)] = pg;
    eq.u[lay.field(i)] = (mp.x_d / mp.x_d_prime) * e -
                         ((mp.x_d - mp.x_d_prime) / mp.x_d_prime) * v * std::cos(phi);
  }
  return eq;
}

SystemPoint solve_equilibrium(const PowerSystem& sys, const Vector& d, const Setpoints& sp,
                              const LoadFlowOptions& opts) {
  SystemPoint z;
  z.a = load_flow(sys, d, sp, opts);
  GeneratorEquilibrium gen = init_generators(sys, z.a);
  z.x = std::move(gen.x);
  z.u = std::move(gen.u);
  z.d = d;
  return z;
}

double equilibrium_residual(const PowerSystem& sys, const SystemPoint& z) {
  return eval_g(sys, z.x, z.a, z.u).lpNorm<Eigen::Infinity>() +
         (eval_h(sys, z.x, z.a) - z.d).lpNorm<Eigen::Infinity>();
}

}  // namespace gridlqr
