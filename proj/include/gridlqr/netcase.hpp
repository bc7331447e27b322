#pragma once

#include <complex>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace gridlqr {

enum class BusKind { kSlack, kGenerator, kLoad };

// All electrical quantities are per-unit on the case MVA base.
struct Bus {
  int id = 0;  // original 1-based bus number from the case file
  BusKind kind = BusKind::kLoad;
  double v_min = 0.9;
  double v_max = 1.1;
  double p_load0 = 0.0;
  double q_load0 = 0.0;
  double shunt_g = 0.0;
  double shunt_b = 0.0;
  double v_init = 1.0;      // Vm column, informational
  double theta_init = 0.0;  // Va column in radians
  double base_kv = 0.0;

  bool operator==(const Bus&) const = default;
};

// from/to are internal (reordered, 0-based) bus indices.
struct Branch {
  int from = 0;
  int to = 0;
  double series_r = 0.0;
  double series_x = 0.0;
  double charging_b = 0.0;
  double tap_ratio = 1.0;
  double phase_shift = 0.0;  // radians

  bool operator==(const Branch&) const = default;
};

struct MachineParams {
  double inertia = 0.2;    // M, pu s^2
  double damping = 0.0;    // D, pu s
  double tau_d = 5.0;      // s
  double tau_c = 0.2;      // s
  double x_d = 0.7;        // pu
  double x_q = 0.5;        // pu
  double x_d_prime = 0.07; // pu
  double droop = 0.02;     // R, Hz/pu

  static MachineParams typical() { return {}; }
  void validate() const;

  bool operator==(const MachineParams&) const = default;
};

// Quadratic cost c2 p^2 + c1 p + c0 with p in per-unit.
struct GenCost {
  double c2 = 0.0;
  double c1 = 0.0;
  double c0 = 0.0;
  double p_min = 0.0;
  double p_max = 0.0;
  double q_min = 0.0;
  double q_max = 0.0;

  double operator()(double p) const { return (c2 * p + c1) * p + c0; }

  bool operator==(const GenCost&) const = default;
};

// Generator i always sits on internal bus i.
struct Generator {
  double p_set = 0.0;  // scheduled Pg
  double q_set = 0.0;  // scheduled Qg
  double v_set = 1.0;  // Vg
  MachineParams machine;
  GenCost cost;

  bool operator==(const Generator&) const = default;
};

// Static grid description. Buses are stored in internal order: generator
// buses 0..G-1 (in generator-table order), then load buses in ascending id.
struct NetworkCase {
  std::string name;
  double base_mva = 100.0;
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<Generator> generators;
  int slack = 0;  // internal index of the slack bus, always < G

  int num_buses() const { return static_cast<int>(buses.size()); }
  int num_generators() const { return static_cast<int>(generators.size()); }
  int num_loads() const { return num_buses() - num_generators(); }

  // Internal index of an original bus id, or -1.
  int index_of(int bus_id) const;

  double total_p_load() const;
  double total_q_load() const;

  bool operator==(const NetworkCase&) const = default;
};

// Y = G + jB, stored as separate real and imaginary parts.
struct AdmittanceMatrix {
  Eigen::MatrixXd g;
  Eigen::MatrixXd b;

  int size() const { return static_cast<int>(g.rows()); }
  std::complex<double> operator()(int i, int j) const { return {g(i, j), b(i, j)}; }
};

// Parses the MATPOWER-compatible case subset plus the machine-parameter text.
// An empty machine text is equivalent to "typical = true".
NetworkCase parse_case(std::string_view case_text, std::string_view machine_text);

// Inverse of parse_case. Values are written with full precision and
// original bus numbering.
std::string serialize_case(const NetworkCase& net);
std::string serialize_machines(const NetworkCase& net);

AdmittanceMatrix build_ybus(const NetworkCase& net);

// Reads the files and calls parse_case. `case_ref` may be a path or a bundled
// case name such as "case9"; `machine_ref` may be a path or "typical".
NetworkCase load_case(const std::string& case_ref, const std::string& machine_ref);

// Directory holding the bundled case files; GRIDLQR_DATA overrides it.
std::string data_directory();

std::string read_text_file(const std::string& path);

}  // namespace gridlqr
