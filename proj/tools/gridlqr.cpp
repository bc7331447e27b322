// gridlqr: stability-aware OPF scenarios from the command line.
#include <algorithm>
#include <cctype>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gridlqr/errors.hpp"
#include "gridlqr/report.hpp"

namespace {

using namespace gridlqr;

struct Options {
  std::string case_ref;
  std::string machines = "typical";
  double alpha = 0.6;
  double t_lqr = 1000.0;
  int k_max = 2;
  std::vector<std::string> controllers{"lqr"};
  std::string method = "both";
  double step_frac = 0.1;
  double pf = 0.9;
  double t_final = 60.0;
  double dt = 0.005;
  int output_every = 20;
  double k_a = 1.0;
  double f_s = 60.0;
  std::string areas;
  std::string out = "gridlqr_out";
  bool dump_matrices = false;
  std::vector<double> alphas{0.0, 0.2, 0.4, 0.6, 0.8};
  std::string config;
};

// Expands "--config FILE" into flags. Keys already given on the command line
// win over the file, which wins over the defaults.
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::string path;
  for (size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty() || args.empty()) return args;
  auto given = [&](const std::string& flag) {
    for (const std::string& a : args) {
      if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
    }
    return false;
  };
  std::vector<std::string> from_file;
  std::istringstream in(read_text_file(path));
  std::string line;
  while (std::getline(in, line)) {
    if (const auto cut = line.find_first_of("#;"); cut != std::string::npos) line.erase(cut);
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      if (line.find_first_not_of(" \t\r") != std::string::npos) {
        throw ConfigError("scenario file: expected 'key = value', got '" + line + "'");
      }
      continue;
    }
    auto trim = [](std::string t) {
      const auto b = t.find_first_not_of(" \t\r");
      const auto e = t.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : t.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const std::string flag = "--" + key;
    if (key == "config" || given(flag)) continue;
    if (key == "dump-matrices") {
      if (value == "true" || value == "1" || value == "yes") from_file.push_back(flag);
      continue;
    }
    from_file.push_back(flag);
    from_file.push_back(value);
  }
  args.insert(args.begin() + 1, from_file.begin(), from_file.end());
  return args;
}

void add_common(CLI::App* app, Options& o) {
  app->add_option("--config", o.config, "Scenario file with 'key = value' lines named like the flags");
  app->add_option("--case", o.case_ref, "Case file path or bundled name (case9, case14, case39, case57)")
      ->required();
  app->add_option("--machines", o.machines, "Machine file path, bundled name, or 'typical'")
      ->capture_default_str();
  app->add_option("--alpha", o.alpha, "Coupling coefficient in [0, 1)")->capture_default_str();
  app->add_option("--tlqr", o.t_lqr, "Control-cost time-scale factor")->capture_default_str();
  app->add_option("--kmax", o.k_max, "ALQR-OPF iterations")->capture_default_str()->check(CLI::PositiveNumber);
  app->add_option("--controller", o.controllers, "lqr, agc or open (comma-separated for several)")
      ->delimiter(',')
      ->check(CLI::IsMember({"lqr", "agc", "open"}))
      ->capture_default_str();
  app->add_option("--method", o.method, "alqr, baseline or both")
      ->check(CLI::IsMember({"alqr", "baseline", "both"}))
      ->capture_default_str();
  app->add_option("--step-frac", o.step_frac, "Load step as a fraction of base real demand")->capture_default_str();
  app->add_option("--pf", o.pf, "Power factor of the load step")->capture_default_str();
  app->add_option("--tf", o.t_final, "Simulation horizon (s)")->capture_default_str();
  app->add_option("--dt", o.dt, "Integration step (s)")->capture_default_str();
  app->add_option("--output-every", o.output_every, "Trajectory decimation in steps")->capture_default_str();
  app->add_option("--ka", o.k_a, "AGC integrator gain (1/s)")->capture_default_str();
  app->add_option("--fs", o.f_s, "Base frequency (Hz)")->capture_default_str();
  app->add_option("--areas", o.areas, "Area partition file ('bus_id area_id' lines)");
  app->add_option("--out", o.out, "Output directory")->capture_default_str();
  app->add_flag("--dump-matrices", o.dump_matrices, "Write the linearization matrices to OUT/matrices");
}

ScenarioConfig scenario_config(const Options& o, const PowerSystem& sys) {
  ScenarioConfig cfg;
  cfg.step_fraction = o.step_frac;
  cfg.power_factor = o.pf;
  cfg.t_final = o.t_final;
  cfg.dt = o.dt;
  cfg.output_every = o.output_every;
  cfg.controllers.clear();
  for (const std::string& c : o.controllers) cfg.controllers.push_back(parse_controller(c));
  cfg.method = parse_method(o.method);
  cfg.dispatch.weights.alpha = o.alpha;
  cfg.dispatch.weights.t_lqr = o.t_lqr;
  cfg.dispatch.k_max = o.k_max;
  cfg.k_a = o.k_a;
  if (!o.areas.empty()) cfg.bus_area_ids = parse_area_file(read_text_file(o.areas), sys.net());
  if (!(o.alpha >= 0.0 && o.alpha < 1.0)) throw ConfigError("--alpha must lie in [0, 1)");
  if (!(o.dt > 0.0) || !(o.t_final >= o.dt)) throw ConfigError("--dt must be positive and at most --tf");
  return cfg;
}

std::string file_tag(const std::string& method, const std::string& controller) {
  std::string tag = (method == "OPF" ? "opf" : "alqr") + std::string("_");
  for (char ch : controller) tag += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return tag;
}

int run_command(const Options& o, const PowerSystem& sys, const ScenarioConfig& cfg) {
  const ScenarioRun run = run_scenario(sys, cfg);
  const std::string dir = o.out + "/";
  write_text_file(dir + "report.csv", report_csv(run.reports));
  write_text_file(dir + "report.txt", report_table(run.reports));
  write_text_file(dir + "timing.csv", timing_csv(run.reports));
  write_text_file(dir + "buses.csv", bus_map_csv(sys.net()));
  std::string log;
  for (const DispatchSolution& sol : run.dispatch) {
    log += format_iteration_log(sol);
    for (const std::string& w : sol.warnings) log += sol.method + " warning: " + w + '\n';
  }
  write_text_file(dir + "iterations.log", log);
  for (size_t i = 0; i < run.reports.size(); ++i) {
    const ScenarioReport& r = run.reports[i];
    write_text_file(dir + "traj_" + file_tag(r.method, r.controller) + ".csv",
                    trajectory_csv(sys, run.simulations[i].trajectory));
  }
  if (o.dump_matrices) dump_linearization(dir + "matrices", run.lin);
  std::cout << report_table(run.reports);
  for (const ScenarioReport& r : run.reports) {
    if (!r.completed) return 2;
  }
  return 0;
}

int sweep_command(const Options& o, const PowerSystem& sys, const ScenarioConfig& cfg) {
  for (double a : o.alphas) {
    if (!(a >= 0.0 && a < 1.0)) throw ConfigError("--alphas entries must lie in [0, 1)");
  }
  const std::vector<CouplingPoint> points = sweep_alpha(sys, o.alphas, cfg);
  const std::string text = coupling_csv(points);
  write_text_file(o.out + "/coupling.csv", text);
  std::cout << text;
  for (const CouplingPoint& p : points) {
    if (!p.completed) return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stability-aware optimal power flow with LQR and AGC load following"};
  app.require_subcommand(1);
  Options o;
  CLI::App* run = app.add_subcommand("run", "Dispatch, simulate and report one step-load scenario");
  CLI::App* sweep = app.add_subcommand("sweep", "Control cost of both methods over a range of alpha");
  add_common(run, o);
  add_common(sweep, o);
  sweep->add_option("--alphas", o.alphas, "Comma-separated coupling coefficients")
      ->delimiter(',')
      ->capture_default_str();

  try {
    std::vector<std::string> args = expand_config(argc, argv);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  CLI::App* active = run->parsed() ? run : sweep;
  std::unique_ptr<PowerSystem> sys;
  ScenarioConfig cfg;
  try {
    sys = std::make_unique<PowerSystem>(load_case(o.case_ref, o.machines), BaseFrequency{o.f_s});
    cfg = scenario_config(o, *sys);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n\n" << active->help();
    return 1;
  }

  try {
    return active == run ? run_command(o, *sys, cfg) : sweep_command(o, *sys, cfg);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const Error& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return 2;
  }
}
