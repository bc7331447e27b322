#pragma once

#include <string>
#include <vector>

#include "gridlqr/simulator.hpp"

namespace gridlqr {

// Table-I shaped report. Wall-times are kept out so repeated runs produce
// identical files; they go to the timing table instead.
std::string report_csv(const std::vector<ScenarioReport>& rows);
std::string report_table(const std::vector<ScenarioReport>& rows);
std::string timing_csv(const std::vector<ScenarioReport>& rows);

// Header: t, delta_1..G, freq_hz_dev_1..G, emf_1..G, mech_1..G, r_1..G,
// f_1..G, v_1..N, theta_1..N, ace_1..A
std::string trajectory_csv(const PowerSystem& sys, const Trajectory& traj);

// Internal index to original bus id.
std::string bus_map_csv(const NetworkCase& net);

struct CouplingPoint {
  double alpha = 0.0;
  double alqr_estimated = 0.0;
  double alqr_simulated = 0.0;
  double baseline_estimated = 0.0;
  double baseline_simulated = 0.0;
  bool completed = false;
};

// One LQR scenario per alpha, both methods.
std::vector<CouplingPoint> sweep_alpha(const PowerSystem& sys, const std::vector<double>& alphas,
                                       ScenarioConfig cfg);
std::string coupling_csv(const std::vector<CouplingPoint>& points);

void write_text_file(const std::string& path, const std::string& text);

}  // namespace gridlqr
