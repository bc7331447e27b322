#include "gridlqr/dispatch_opt.hpp"

#include <cstdio>
#include <limits>

#include "gridlqr/errors.hpp"

namespace gridlqr {

double generation_cost(const PowerSystem& sys, const Vector& a) {
  const Layout& lay = sys.layout();
  double c = 0.0;
  for (int i = 0; i < lay.G; ++i) c += sys.net().generators[i].cost(a[lay.pg(i)]);
  return c;
}

SteadyStateDecision solve_linopf(const PowerSystem& sys, const LinearizedSystem& lin, const Vector& d_s,
                                 const Matrix* P, const DispatchConfig& cfg) {
  const Layout& lay = sys.layout();
  const NetworkCase& net = sys.net();
  const int nx = lay.nx(), na = lay.na(), nu = lay.nu();
  const int n = nx + na + nu;
  const int ox = 0, oa = nx, ou = nx + na;
  const SystemPoint& z0 = lin.z0;
  if (d_s.size() != lay.nh()) throw ConfigError("solve_linopf: load dimension mismatch");

  Vector w0(n);
  w0 << z0.x, z0.a, z0.u;

  // Equality rows: g linearized (4G), h linearized (2G+2N), slack angle.
  const int m = nx + lay.nh() + 1;
  QpProblem qp;
  qp.A_eq = Matrix::Zero(m, n);
  qp.A_eq.block(0, ox, nx, nx) = lin.g_x;
  qp.A_eq.block(0, oa, nx, na) = lin.g_a;
  qp.A_eq.block(0, ou, nx, nu) = lin.g_u;
  qp.A_eq.block(nx, ox, lay.nh(), nx) = lin.h_x;
  qp.A_eq.block(nx, oa, lay.nh(), na) = lin.h_a;
  qp.A_eq(m - 1, oa + lay.theta(net.slack)) = 1.0;
  qp.b_eq = qp.A_eq * w0;
  qp.b_eq.head(nx) -= eval_g(sys, z0.x, z0.a, z0.u);
  qp.b_eq.segment(nx, lay.nh()) += d_s - eval_h(sys, z0.x, z0.a);

  constexpr double inf = std::numeric_limits<double>::infinity();
  qp.lb = Vector::Constant(n, -inf);
  qp.ub = Vector::Constant(n, inf);
  qp.H = Matrix::Zero(n, n);
  qp.f = Vector::Zero(n);
  for (int i = 0; i < lay.G; ++i) {
    const GenCost& c = net.generators[i].cost;
    qp.lb[oa + lay.pg(i)] = c.p_min;
    qp.ub[oa + lay.pg(i)] = c.p_max;
    qp.lb[oa + lay.qg(i)] = c.q_min;
    qp.ub[oa + lay.qg(i)] = c.q_max;
    qp.H(oa + lay.pg(i), oa + lay.pg(i)) = 2.0 * c.c2;
    qp.f[oa + lay.pg(i)] = c.c1;
  }
  for (int k = 0; k < lay.N; ++k) {
    qp.lb[oa + lay.v(k)] = net.buses[k].v_min;
    qp.ub[oa + lay.v(k)] = net.buses[k].v_max;
  }
  const double t = cfg.weights.t_lqr;
  if (P) {
    if (P->rows() != nx || P->cols() != nx) throw ConfigError("solve_linopf: P dimension mismatch");
    qp.H.block(ox, ox, nx, nx) += t * (*P);
    qp.f.segment(ox, nx) -= t * ((*P) * z0.x);
  }

  QpOptions qopts = cfg.qp;
  if (!qopts.x_init) qopts.x_init = w0;
  const QpResult r = solve_qp(qp, qopts);
  if (r.status != QpStatus::kOptimal) {
    throw QpFailure(std::string("linearized OPF: QP ") + to_string(r.status) + " after " +
                    std::to_string(r.iterations) + " iterations");
  }

  SteadyStateDecision dec;
  dec.x = r.x.segment(ox, nx);
  dec.a = r.x.segment(oa, na);
  dec.u = r.x.segment(ou, nu);
  dec.qp_iterations = r.iterations;
  dec.warnings = r.warnings;
  dec.steady_state_cost = generation_cost(sys, dec.a);
  dec.objective = dec.steady_state_cost;
  if (P) {
    const Vector dx = dec.x - z0.x;
    dec.objective += 0.5 * t * dx.dot((*P) * dx);
  }
  const Vector res = qp.A_eq * r.x - qp.b_eq;
  dec.eq9a_residual = res.head(nx).lpNorm<Eigen::Infinity>();
  dec.eq9b_residual = res.segment(nx, lay.nh()).lpNorm<Eigen::Infinity>();
  return dec;
}

namespace {

RiccatiSolution care_at(const PowerSystem& sys, const LinearizedSystem& lin, const Vector& a,
                        const CostWeightConfig& wcfg, WeightMatrices* w_out = nullptr) {
  WeightMatrices w = build_qr(sys, a, wcfg);
  RiccatiSolution s = solve_care(lin.A, lin.B, w.Q(), w.R());
  if (w_out) *w_out = std::move(w);
  return s;
}

void extract_equilibrium(const PowerSystem& sys, const LinearizedSystem& lin, const Vector& d_s,
                         const DispatchConfig& cfg, DispatchSolution& sol) {
  LoadFlowOptions lf;
  lf.a_guess = sol.z_s.a;
  sol.z_eq = solve_equilibrium(sys, d_s, setpoints_from(sys.layout(), sys.net().slack, sol.z_s.a), lf);
  const RiccatiSolution care = care_at(sys, lin, sol.z_eq.a, cfg.weights, &sol.weights);
  sol.P = care.P;
  sol.K = care.K;
  sol.care_residual = care.residual;
  sol.steady_state_cost = generation_cost(sys, sol.z_eq.a);
  sol.estimated_control_cost = estimate_control_cost(sol.P, sol.z_eq.x, lin.z0.x, cfg.weights.t_lqr);
}

}  // namespace

DispatchSolution alqr_opf(const PowerSystem& sys, const LinearizedSystem& lin, const Vector& d_s,
                          const DispatchConfig& cfg) {
  if (cfg.k_max < 1) throw ConfigError("k_max must be at least 1");
  DispatchSolution sol;
  sol.method = "ALQR-OPF";
  RiccatiSolution care = care_at(sys, lin, lin.z0.a, cfg.weights);
  double best = std::numeric_limits<double>::infinity();
  bool have_best = false;
  for (int k = 1; k <= cfg.k_max; ++k) {
    SteadyStateDecision dec;
    try {
      dec = solve_linopf(sys, lin, d_s, &care.P, cfg);
    } catch (const Error& e) {
      if (!have_best) throw;
      sol.warnings.push_back("iteration " + std::to_string(k) + " aborted: " + e.what());
      break;
    }
    IterationRecord rec{k, dec.objective, 0.0, care.residual, dec.qp_iterations};
    if (dec.objective < best) {
      best = dec.objective;
      sol.z_s = dec;
      sol.P_opt = care.P;
      have_best = true;
    }
    rec.best_objective = best;
    sol.log.push_back(rec);
    if (k == cfg.k_max) break;
    try {
      care = care_at(sys, lin, dec.a, cfg.weights);
    } catch (const Error& e) {
      sol.warnings.push_back("iteration " + std::to_string(k) + " CARE failed: " + e.what());
      break;
    }
  }
  sol.objective = best;
  extract_equilibrium(sys, lin, d_s, cfg, sol);
  return sol;
}

DispatchSolution baseline_opf(const PowerSystem& sys, const LinearizedSystem& lin, const Vector& d_s,
                              const DispatchConfig& cfg) {
  DispatchSolution sol;
  sol.method = "OPF";
  sol.z_s = solve_linopf(sys, lin, d_s, nullptr, cfg);
  const RiccatiSolution care = care_at(sys, lin, sol.z_s.a, cfg.weights);
  sol.P_opt = care.P;
  sol.objective = sol.z_s.steady_state_cost +
                  estimate_control_cost(care.P, sol.z_s.x, lin.z0.x, cfg.weights.t_lqr);
  sol.log.push_back({1, sol.objective, sol.objective, care.residual, sol.z_s.qp_iterations});
  extract_equilibrium(sys, lin, d_s, cfg, sol);
  return sol;
}

std::string format_iteration_log(const DispatchSolution& sol) {
  std::string out;
  char buf[192];
  for (const IterationRecord& r : sol.log) {
    std::snprintf(buf, sizeof buf, "%s k=%d objective=%.10g best=%.10g care_residual=%.3e qp_iterations=%d\n",
                  sol.method.c_str(), r.k, r.objective, r.best_objective, r.care_residual, r.qp_iterations);
    out += buf;
  }
  return out;
}

}  // namespace gridlqr
