#include "gridlqr/report.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "gridlqr/errors.hpp"

namespace gridlqr {
namespace {

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

const char* status_of(const ScenarioReport& r) { return r.completed ? "ok" : "failed"; }

const std::vector<std::string> kColumns = {
    "Network", "Method", "Controller", "Steady-state cost ($)", "Control est. cost ($)",
    "Control cost ($)", "Total ($)", "Max freq. dev. (Hz)", "Max volt. dev. (pu)", "Status"};

std::vector<std::string> row_cells(const ScenarioReport& r) {
  return {r.network,
          r.method,
          r.controller,
          fmt("%.2f", r.steady_state_cost),
          fmt("%.2f", r.estimated_control_cost),
          fmt("%.2f", r.simulated_control_cost),
          fmt("%.2f", r.total),
          fmt("%.5f", r.max_freq_dev_hz),
          fmt("%.5f", r.max_volt_dev_pu),
          status_of(r)};
}

}  // namespace

std::string report_csv(const std::vector<ScenarioReport>& rows) {
  std::string out =
      "network,method,controller,steady_state_cost,control_est_cost,control_cost,total_cost,"
      "max_freq_dev_hz,max_volt_dev_pu,status,failure\n";
  for (const ScenarioReport& r : rows) {
    out += r.network + ',' + r.method + ',' + r.controller + ',' + fmt("%.10g", r.steady_state_cost) + ',' +
           fmt("%.10g", r.estimated_control_cost) + ',' + fmt("%.10g", r.simulated_control_cost) + ',' +
           fmt("%.10g", r.total) + ',' + fmt("%.10g", r.max_freq_dev_hz) + ',' +
           fmt("%.10g", r.max_volt_dev_pu) + ',' + status_of(r) + ",\"" + r.failure + "\"\n";
  }
  return out;
}

std::string report_table(const std::vector<ScenarioReport>& rows) {
  std::vector<std::vector<std::string>> cells{kColumns};
  for (const ScenarioReport& r : rows) cells.push_back(row_cells(r));
  std::vector<size_t> width(kColumns.size(), 0);
  for (const auto& row : cells) {
    for (size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::string out;
  for (size_t i = 0; i < cells.size(); ++i) {
    for (size_t c = 0; c < cells[i].size(); ++c) {
      const std::string& s = cells[i][c];
      const std::string pad(width[c] - s.size(), ' ');
      out += c < 3 ? s + pad : pad + s;  // text left, numbers right
      if (c + 1 < cells[i].size()) out += "  ";
    }
    out += '\n';
    if (i == 0) {
      for (size_t c = 0; c < width.size(); ++c) out += std::string(width[c], '-') + (c + 1 < width.size() ? "  " : "");
      out += '\n';
    }
  }
  for (const ScenarioReport& r : rows) {
    if (!r.completed) out += r.method + "/" + r.controller + " failed: " + r.failure + '\n';
  }
  return out;
}

std::string timing_csv(const std::vector<ScenarioReport>& rows) {
  std::string out = "network,method,controller,dispatch_seconds,simulation_seconds\n";
  for (const ScenarioReport& r : rows) {
    out += r.network + ',' + r.method + ',' + r.controller + ',' + fmt("%.4f", r.dispatch_seconds) + ',' +
           fmt("%.4f", r.simulation_seconds) + '\n';
  }
  return out;
}

std::string trajectory_csv(const PowerSystem& sys, const Trajectory& traj) {
  const Layout& lay = sys.layout();
  std::string out = "t";
  auto header = [&](const char* name, int n) {
    for (int i = 1; i <= n; ++i) out += std::string(",") + name + "_" + std::to_string(i);
  };
  header("delta", lay.G);
  header("freq_hz_dev", lay.G);
  header("emf", lay.G);
  header("mech", lay.G);
  header("r", lay.G);
  header("f", lay.G);
  header("v", lay.N);
  header("theta", lay.N);
  header("ace", traj.num_areas);
  out += '\n';
  const double two_pi = 2.0 * std::numbers::pi;
  for (const Sample& s : traj.samples) {
    out += fmt("%.6g", s.t);
    auto put = [&](double v) { out += ',' + fmt("%.12g", v); };
    for (int i = 0; i < lay.G; ++i) put(s.x[lay.delta(i)]);
    for (int i = 0; i < lay.G; ++i) put((s.x[lay.omega(i)] - sys.omega_s()) / two_pi);
    for (int i = 0; i < lay.G; ++i) put(s.x[lay.emf(i)]);
    for (int i = 0; i < lay.G; ++i) put(s.x[lay.mech(i)]);
    for (int i = 0; i < lay.G; ++i) put(s.u[lay.ref(i)]);
    for (int i = 0; i < lay.G; ++i) put(s.u[lay.field(i)]);
    for (int k = 0; k < lay.N; ++k) put(s.a[lay.v(k)]);
    for (int k = 0; k < lay.N; ++k) put(s.a[lay.theta(k)]);
    for (int a = 0; a < traj.num_areas; ++a) put(s.ace.size() ? s.ace[a] : 0.0);
    out += '\n';
  }
  return out;
}

std::string bus_map_csv(const NetworkCase& net) {
  std::string out = "index,bus_id,kind\n";
  for (int k = 0; k < net.num_buses(); ++k) {
    const char* kind = net.buses[k].kind == BusKind::kSlack       ? "slack"
                       : net.buses[k].kind == BusKind::kGenerator ? "generator"
                                                                  : "load";
    out += std::to_string(k + 1) + ',' + std::to_string(net.buses[k].id) + ',' + kind + '\n';
  }
  return out;
}

std::vector<CouplingPoint> sweep_alpha(const PowerSystem& sys, const std::vector<double>& alphas,
                                       ScenarioConfig cfg) {
  cfg.controllers = {ControllerKind::kLqr};
  cfg.method = MethodChoice::kBoth;
  std::vector<CouplingPoint> out;
  for (double alpha : alphas) {
    cfg.dispatch.weights.alpha = alpha;
    const ScenarioRun run = run_scenario(sys, cfg);
    CouplingPoint p;
    p.alpha = alpha;
    p.alqr_estimated = run.reports[0].estimated_control_cost;
    p.alqr_simulated = run.reports[0].simulated_control_cost;
    p.baseline_estimated = run.reports[1].estimated_control_cost;
    p.baseline_simulated = run.reports[1].simulated_control_cost;
    p.completed = run.reports[0].completed && run.reports[1].completed;
    out.push_back(p);
  }
  return out;
}

std::string coupling_csv(const std::vector<CouplingPoint>& points) {
  std::string out =
      "alpha,alqr_control_cost,opf_control_cost,alqr_control_est_cost,opf_control_est_cost,status\n";
  for (const CouplingPoint& p : points) {
    out += fmt("%.6g", p.alpha) + ',' + fmt("%.10g", p.alqr_simulated) + ',' + fmt("%.10g", p.baseline_simulated) +
           ',' + fmt("%.10g", p.alqr_estimated) + ',' + fmt("%.10g", p.baseline_estimated) + ',' +
           (p.completed ? "ok" : "failed") + '\n';
  }
  return out;
}

void write_text_file(const std::string& path, const std::string& text) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out || !(out << text)) throw ConfigError("cannot write '" + path + "'");
}

}  // namespace gridlqr
