#pragma once

#include <string>
#include <vector>

#include "gridlqr/agc.hpp"
#include "gridlqr/dispatch_opt.hpp"

namespace gridlqr {

enum class ControllerKind { kLqr, kAgc, kOpen };
enum class MethodChoice { kAlqr, kBaseline, kBoth };

const char* to_string(ControllerKind k);
ControllerKind parse_controller(const std::string& s);
MethodChoice parse_method(const std::string& s);

struct ScenarioConfig {
  double step_fraction = 0.1;
  double power_factor = 0.9;
  double t_final = 60.0;  // s
  double dt = 0.005;      // s
  int output_every = 20;  // trajectory decimation in steps
  std::vector<ControllerKind> controllers{ControllerKind::kLqr};
  MethodChoice method = MethodChoice::kBoth;
  DispatchConfig dispatch;
  double k_a = 1.0;
  std::vector<int> bus_area_ids;  // empty: one area
};

struct StepLoad {
  Vector d0;
  Vector d_s;
  Vector delta;
  double dp_total = 0.0;  // pu, positive for a load increase
  double dq_total = 0.0;
};

// Real demand grows by fraction p0; reactive demand by
// fraction * 0.484 * tan(acos pf) / tan(acos 0.9) * q0.
StepLoad apply_step_load(const NetworkCase& net, const Layout& lay, double fraction, double pf);

struct Controller {
  ControllerKind kind = ControllerKind::kLqr;
  SystemPoint z_eq;
  Matrix K;               // LQR gain; under AGC only its field-voltage rows are used
  AreaConfig areas;       // AGC
  Vector tie_eq;          // AGC tie exports at z_eq
};

Controller make_lqr_controller(const DispatchSolution& sol);
Controller make_agc_controller(const PowerSystem& sys, const DispatchSolution& sol,
                               const std::vector<int>& bus_area_ids, double k_a);
Controller make_open_controller(const DispatchSolution& sol);

struct Sample {
  double t = 0.0;
  Vector x, a, u, ace;
};

struct Trajectory {
  std::vector<Sample> samples;
  int num_areas = 0;
};

struct SimulationResult {
  Trajectory trajectory;
  double control_cost = 0.0;     // (T/2) integral of dx'Q dx + du'R du
  double max_freq_dev_hz = 0.0;
  double max_volt_dev_pu = 0.0;
  double max_algebraic_residual = 0.0;
  double final_state_dev = 0.0;  // ||x(t_f) - x_eq||_inf
  double final_ace = 0.0;        // max |ACE(t_f)|
  int steps = 0;
  bool completed = false;
  std::string failure;
  double wall_seconds = 0.0;
};

// Fixed-step RK4 on the states (and AGC integrators) with the algebraic layer
// solved at every stage. The load is d_s from t = 0 onwards.
SimulationResult simulate(const PowerSystem& sys, const Vector& x_init, const Vector& a_init,
                          const Controller& ctl, const Vector& d_s, const WeightMatrices& w,
                          double t_lqr, double t_final, double dt, int output_every);

struct ScenarioReport {
  std::string network;
  std::string method;
  std::string controller;
  double steady_state_cost = 0.0;
  double estimated_control_cost = 0.0;
  double simulated_control_cost = 0.0;
  double total = 0.0;
  double max_freq_dev_hz = 0.0;
  double max_volt_dev_pu = 0.0;
  bool completed = false;
  std::string failure;
  double dispatch_seconds = 0.0;
  double simulation_seconds = 0.0;
};

struct ScenarioRun {
  StepLoad step;
  SystemPoint z0;
  LinearizedSystem lin;
  std::vector<DispatchSolution> dispatch;
  std::vector<SimulationResult> simulations;  // dispatch-major, then controller
  std::vector<ScenarioReport> reports;
  double dispatch_seconds = 0.0;
};

// Base equilibrium, linearization, dispatch for the selected methods and one
// closed-loop simulation per (method, controller). Simulations run
// concurrently. Errors are rethrown with a stage label.
ScenarioRun run_scenario(const PowerSystem& sys, const ScenarioConfig& cfg);

}  // namespace gridlqr
