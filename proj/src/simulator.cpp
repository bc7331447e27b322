#include "gridlqr/simulator.hpp"

#include <chrono>
#include <cmath>
#include <future>

#include "gridlqr/errors.hpp"

namespace gridlqr {

const char* to_string(ControllerKind k) {
  switch (k) {
    case ControllerKind::kLqr: return "LQR";
    case ControllerKind::kAgc: return "AGC";
    case ControllerKind::kOpen: return "open";
  }
  return "?";
}

ControllerKind parse_controller(const std::string& s) {
  if (s == "lqr") return ControllerKind::kLqr;
  if (s == "agc") return ControllerKind::kAgc;
  if (s == "open") return ControllerKind::kOpen;
  throw ConfigError("unknown controller '" + s + "' (expected lqr, agc or open)");
}

MethodChoice parse_method(const std::string& s) {
  if (s == "alqr") return MethodChoice::kAlqr;
  if (s == "baseline") return MethodChoice::kBaseline;
  if (s == "both") return MethodChoice::kBoth;
  throw ConfigError("unknown method '" + s + "' (expected alqr, baseline or both)");
}

StepLoad apply_step_load(const NetworkCase& net, const Layout& lay, double fraction, double pf) {
  if (!(fraction >= 0.0)) throw ConfigError("step fraction must be nonnegative");
  if (!(pf > 0.0 && pf <= 1.0)) throw ConfigError("power factor must lie in (0, 1]");
  const double tan_ref = std::sqrt(1.0 - 0.81) / 0.9;
  const double q_factor = fraction * 0.484 * (std::sqrt(1.0 - pf * pf) / pf) / tan_ref;
  StepLoad s;
  s.d0 = base_load_vector(net);
  s.delta = Vector::Zero(s.d0.size());
  for (int k = 0; k < lay.N; ++k) {
    s.delta[lay.bus_p(k)] = fraction * s.d0[lay.bus_p(k)];
    s.delta[lay.bus_q(k)] = q_factor * s.d0[lay.bus_q(k)];
    s.dp_total -= s.delta[lay.bus_p(k)];
    s.dq_total -= s.delta[lay.bus_q(k)];
  }
  s.d_s = s.d0 + s.delta;
  return s;
}

Controller make_lqr_controller(const DispatchSolution& sol) {
  Controller c;
  c.kind = ControllerKind::kLqr;
  c.z_eq = sol.z_eq;
  c.K = sol.K;
  return c;
}

Controller make_agc_controller(const PowerSystem& sys, const DispatchSolution& sol,
                               const std::vector<int>& bus_area_ids, double k_a) {
  Controller c;
  c.kind = ControllerKind::kAgc;
  c.z_eq = sol.z_eq;
  c.K = sol.K;
  c.areas = make_area_config(sys, bus_area_ids, sol.z_eq.a, k_a);
  c.tie_eq = tie_exports(sys, c.areas, sol.z_eq.a);
  return c;
}

Controller make_open_controller(const DispatchSolution& sol) {
  Controller c;
  c.kind = ControllerKind::kOpen;
  c.z_eq = sol.z_eq;
  return c;
}

SimulationResult simulate(const PowerSystem& sys, const Vector& x_init, const Vector& a_init,
                          const Controller& ctl, const Vector& d_s, const WeightMatrices& w,
                          double t_lqr, double t_final, double dt, int output_every) {
  if (!(dt > 0.0) || !(t_final >= dt)) throw ConfigError("simulation needs dt > 0 and t_f >= dt");
  if (output_every < 1) throw ConfigError("output decimation must be positive");
  const auto wall0 = std::chrono::steady_clock::now();
  const Layout& lay = sys.layout();
  const int nx = lay.nx();
  const bool agc = ctl.kind == ControllerKind::kAgc;
  const int n_areas = agc ? ctl.areas.num_areas() : 0;
  const Vector& x_eq = ctl.z_eq.x;
  const Vector& u_eq = ctl.z_eq.u;
  const double two_pi = 2.0 * std::numbers::pi;

  SimulationResult res;
  res.trajectory.num_areas = n_areas;
  AlgebraicSolver solver(sys);

  struct Eval {
    Vector a, u, ace, dX;
  };
  auto evaluate = [&](const Vector& X, const Vector& a_guess) {
    Eval e;
    const Vector x = X.head(nx);
    e.a = solver.solve(x, d_s, a_guess).a;
    e.u = u_eq;
    e.dX.resize(X.size());
    switch (ctl.kind) {
      case ControllerKind::kLqr: e.u = feedback(u_eq, x_eq, ctl.K, x); break;
      case ControllerKind::kAgc: {
        e.ace = ace(sys, ctl.areas, x, e.a, ctl.tie_eq);
        const AgcUpdate up = agc_step(ctl.areas, X.tail(n_areas), e.ace);
        e.u = feedback(u_eq, x_eq, ctl.K, x);
        e.u.head(lay.G) = up.r;
        e.dX.tail(n_areas) = up.y_dot;
        break;
      }
      case ControllerKind::kOpen: break;
    }
    e.dX.head(nx) = eval_g(sys, x, e.a, e.u);
    if (!e.dX.allFinite()) throw NonConvergence("non-finite state derivative");
    return e;
  };
  auto running_cost = [&](const Vector& x, const Vector& u) {
    const Vector dx = x - x_eq, du = u - u_eq;
    return 0.5 * t_lqr * (dx.dot(w.q_diag.cwiseProduct(dx)) + du.dot(w.r_diag.cwiseProduct(du)));
  };

  Vector X(nx + n_areas);
  X.head(nx) = x_init;
  if (agc) X.tail(n_areas) = ctl.areas.pg_eq_sum;
  const int steps = static_cast<int>(std::llround(t_final / dt));

  auto record = [&](int n, const Vector& Xn, const Eval& e) {
    const Vector x = Xn.head(nx);
    for (int i = 0; i < lay.G; ++i) {
      res.max_freq_dev_hz = std::max(res.max_freq_dev_hz, std::abs(x[lay.omega(i)] - sys.omega_s()) / two_pi);
    }
    for (int k = 0; k < lay.N; ++k) {
      res.max_volt_dev_pu = std::max(res.max_volt_dev_pu, std::abs(e.a[lay.v(k)] - ctl.z_eq.a[lay.v(k)]));
    }
    res.max_algebraic_residual =
        std::max(res.max_algebraic_residual, (eval_h(sys, x, e.a) - d_s).lpNorm<Eigen::Infinity>());
    if (n % output_every == 0 || n == steps) {
      res.trajectory.samples.push_back({n * dt, x, e.a, e.u, e.ace});
    }
  };

  try {
    Eval e0 = evaluate(X, a_init);
    double l0 = running_cost(X.head(nx), e0.u);
    record(0, X, e0);
    for (int n = 0; n < steps; ++n) {
      const Eval e2 = evaluate(X + 0.5 * dt * e0.dX, e0.a);
      const Eval e3 = evaluate(X + 0.5 * dt * e2.dX, e2.a);
      const Eval e4 = evaluate(X + dt * e3.dX, e3.a);
      X += (dt / 6.0) * (e0.dX + 2.0 * e2.dX + 2.0 * e3.dX + e4.dX);
      if (!X.allFinite()) throw NonConvergence("non-finite state");
      Eval e1 = evaluate(X, e4.a);
      const double l1 = running_cost(X.head(nx), e1.u);
      res.control_cost += 0.5 * dt * (l0 + l1);
      res.steps = n + 1;
      record(n + 1, X, e1);
      e0 = std::move(e1);
      l0 = l1;
    }
    res.completed = true;
    res.final_state_dev = (X.head(nx) - x_eq).lpNorm<Eigen::Infinity>();
    if (agc && e0.ace.size()) res.final_ace = e0.ace.lpNorm<Eigen::Infinity>();
  } catch (const Error& e) {
    res.failure = "t = " + std::to_string(res.steps * dt) + " s: " + e.what();
  }
  res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
  return res;
}

namespace {

template <class F>
auto staged(const char* stage, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw Error(std::string(stage) + ": " + e.what());
  }
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

ScenarioRun run_scenario(const PowerSystem& sys, const ScenarioConfig& cfg) {
  ScenarioRun run;
  const Layout& lay = sys.layout();
  run.step = apply_step_load(sys.net(), lay, cfg.step_fraction, cfg.power_factor);
  run.z0 = staged("base equilibrium",
                  [&] { return solve_equilibrium(sys, run.step.d0, case_setpoints(sys.net())); });
  run.lin = staged("linearization", [&] { return linearize(sys, run.z0); });

  std::vector<double> dispatch_time;
  if (cfg.method != MethodChoice::kBaseline) {
    const auto t0 = std::chrono::steady_clock::now();
    run.dispatch.push_back(staged("ALQR-OPF", [&] { return alqr_opf(sys, run.lin, run.step.d_s, cfg.dispatch); }));
    dispatch_time.push_back(seconds_since(t0));
  }
  if (cfg.method != MethodChoice::kAlqr) {
    const auto t0 = std::chrono::steady_clock::now();
    run.dispatch.push_back(staged("baseline OPF", [&] { return baseline_opf(sys, run.lin, run.step.d_s, cfg.dispatch); }));
    dispatch_time.push_back(seconds_since(t0));
  }
  for (double t : dispatch_time) run.dispatch_seconds += t;

  std::vector<std::future<SimulationResult>> jobs;
  for (const DispatchSolution& sol : run.dispatch) {
    for (ControllerKind kind : cfg.controllers) {
      Controller ctl = kind == ControllerKind::kLqr   ? make_lqr_controller(sol)
                       : kind == ControllerKind::kAgc ? make_agc_controller(sys, sol, cfg.bus_area_ids, cfg.k_a)
                                                      : make_open_controller(sol);
      jobs.push_back(std::async(std::launch::async, [&sys, &run, &sol, &cfg, ctl = std::move(ctl)] {
        return simulate(sys, run.z0.x, run.z0.a, ctl, run.step.d_s, sol.weights, cfg.dispatch.weights.t_lqr,
                        cfg.t_final, cfg.dt, cfg.output_every);
      }));
    }
  }
  for (auto& j : jobs) run.simulations.push_back(j.get());

  size_t s = 0;
  for (size_t m = 0; m < run.dispatch.size(); ++m) {
    const DispatchSolution& sol = run.dispatch[m];
    for (ControllerKind kind : cfg.controllers) {
      const SimulationResult& sim = run.simulations[s++];
      ScenarioReport r;
      r.network = sys.net().name;
      r.method = sol.method;
      r.controller = to_string(kind);
      r.steady_state_cost = sol.steady_state_cost;
      r.estimated_control_cost = sol.estimated_control_cost;
      r.simulated_control_cost = sim.control_cost;
      r.total = r.steady_state_cost + r.simulated_control_cost;
      r.max_freq_dev_hz = sim.max_freq_dev_hz;
      r.max_volt_dev_pu = sim.max_volt_dev_pu;
      r.completed = sim.completed;
      r.failure = sim.failure;
      r.dispatch_seconds = dispatch_time[m];
      r.simulation_seconds = sim.wall_seconds;
      run.reports.push_back(std::move(r));
    }
  }
  return run;
}

}  // namespace gridlqr
