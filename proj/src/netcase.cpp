#include "gridlqr/netcase.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <regex>
#include <set>
#include <sstream>

#include "gridlqr/errors.hpp"

#ifndef GRIDLQR_DATA_DIR
#define GRIDLQR_DATA_DIR "data"
#endif

namespace gridlqr {
namespace {

using Table = std::vector<std::vector<double>>;

constexpr double kDegToRad = std::numbers::pi / 180.0;

std::string strip_comments(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool in_comment = false;
  bool in_string = false;
  for (char c : text) {
    if (in_comment) {
      if (c == '\n') {
        in_comment = false;
        out.push_back(c);
      }
      continue;
    }
    if (c == '\'') in_string = !in_string;
    if (c == '%' && !in_string) {
      in_comment = true;
      continue;
    }
    if (c == '\n') in_string = false;
    out.push_back(c);
  }
  return out;
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

double parse_number(std::string_view token, std::string_view context) {
  double value = 0.0;
  const char* begin = token.data();
  const char* end = begin + token.size();
  if (!token.empty() && *begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    if (token == "Inf" || token == "inf") return std::numeric_limits<double>::infinity();
    if (token == "-Inf" || token == "-inf") return -std::numeric_limits<double>::infinity();
    throw ParseError("invalid number '" + std::string(token) + "' in " + std::string(context));
  }
  return value;
}

Table parse_matrix_body(std::string_view body, const std::string& name) {
  Table rows;
  std::string current;
  auto flush = [&] {
    std::string row = current;
    current.clear();
    std::replace(row.begin(), row.end(), ',', ' ');
    std::istringstream in(row);
    std::vector<double> values;
    std::string token;
    while (in >> token) values.push_back(parse_number(token, name));
    if (!values.empty()) rows.push_back(std::move(values));
  };
  for (char c : body) {
    if (c == ';' || c == '\n') {
      flush();
    } else {
      current.push_back(c);
    }
  }
  flush();
  if (rows.empty()) return rows;
  const std::size_t width = rows.front().size();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != width) {
      throw ParseError("malformed row " + std::to_string(r + 1) + " in matrix '" + name +
                       "': expected " + std::to_string(width) + " columns, got " +
                       std::to_string(rows[r].size()));
    }
  }
  return rows;
}

struct RawCase {
  std::string name;
  std::map<std::string, Table> matrices;
  std::map<std::string, std::string> scalars;
};

RawCase scan_case(std::string_view case_text) {
  RawCase raw;
  const std::string text = strip_comments(case_text);
  static const std::regex fn_re(R"(function\s+\w+\s*=\s*(\w+))");
  std::smatch fn_match;
  if (std::regex_search(text, fn_match, fn_re)) raw.name = fn_match[1];

  static const std::regex assign_re(R"((?:\b\w+\.)?\b(\w+)\s*=\s*)");
  auto it = text.cbegin();
  std::smatch m;
  while (std::regex_search(it, text.cend(), m, assign_re)) {
    const std::string key = m[1];
    auto rhs = m.suffix().first;
    if (key == "function" || key == "mpc" ) {
      it = rhs;
      continue;
    }
    if (rhs != text.cend() && *rhs == '[') {
      const auto close = std::find(rhs, text.cend(), ']');
      if (close == text.cend()) throw ParseError("unterminated matrix '" + key + "'");
      raw.matrices[key] = parse_matrix_body(std::string_view(&*(rhs + 1), close - rhs - 1), key);
      it = close + 1;
    } else {
      auto stop = rhs;
      while (stop != text.cend() && *stop != ';' && *stop != '\n') ++stop;
      raw.scalars[key] = trim(std::string_view(&*rhs, stop - rhs));
      it = stop;
    }
  }
  return raw;
}

const Table& require_matrix(const RawCase& raw, const std::string& name, std::size_t min_cols) {
  const auto found = raw.matrices.find(name);
  if (found == raw.matrices.end() || found->second.empty()) {
    throw ParseError("case file has no '" + name + "' matrix");
  }
  if (found->second.front().size() < min_cols) {
    throw ParseError("matrix '" + name + "' needs at least " + std::to_string(min_cols) +
                     " columns");
  }
  return found->second;
}

struct MachineSpec {
  bool typical = false;
  std::map<int, std::map<std::string, double>> sections;
};

MachineSpec scan_machines(std::string_view text) {
  MachineSpec spec;
  std::istringstream in{std::string(text)};
  std::string line;
  std::optional<int> section;
  int line_no = 0;
  static const std::regex header_re(R"(\[\s*(?:bus\s+)?(\d+)\s*\])");
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find_first_of("#%"); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    std::smatch m;
    if (std::regex_match(line, m, header_re)) {
      section = std::stoi(m[1]);
      if (spec.sections.contains(*section)) {
        throw ParseError("duplicate machine section for bus " + m[1].str());
      }
      spec.sections[*section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError("machine file line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!section) {
      if (key != "typical") throw ParseError("machine file: unknown global key '" + key + "'");
      spec.typical = (value == "true" || value == "1" || value == "yes");
      continue;
    }
    spec.sections[*section][key] = parse_number(value, "machine file key " + key);
  }
  return spec;
}

MachineParams machine_from_section(const std::map<std::string, double>& keys, int bus_id) {
  MachineParams p = MachineParams::typical();
  for (const auto& [key, value] : keys) {
    if (key == "M") p.inertia = value;
    else if (key == "D") p.damping = value;
    else if (key == "tau_d") p.tau_d = value;
    else if (key == "tau_c") p.tau_c = value;
    else if (key == "x_d") p.x_d = value;
    else if (key == "x_q") p.x_q = value;
    else if (key == "x_d_prime") p.x_d_prime = value;
    else if (key == "R_droop") p.droop = value;
    else throw ParseError("machine file: unknown key '" + key + "' for bus " + std::to_string(bus_id));
  }
  return p;
}

std::string format_double(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

}  // namespace

void MachineParams::validate() const {
  if (!(inertia > 0)) throw ParseError("machine inertia M must be positive");
  if (!(tau_d > 0) || !(tau_c > 0)) throw ParseError("nonpositive machine time constant");
  if (!(x_d_prime > 0) || !(x_d >= x_d_prime)) throw ParseError("machine reactances need x_d >= x_d' > 0");
  if (!(x_q > 0)) throw ParseError("machine reactance x_q must be positive");
  if (!(droop > 0)) throw ParseError("governor droop R must be positive");
  if (!(damping >= 0)) throw ParseError("machine damping D must be nonnegative");
}

int NetworkCase::index_of(int bus_id) const {
  for (int i = 0; i < num_buses(); ++i) {
    if (buses[i].id == bus_id) return i;
  }
  return -1;
}

double NetworkCase::total_p_load() const {
  double s = 0.0;
  for (const auto& b : buses) s += b.p_load0;
  return s;
}

double NetworkCase::total_q_load() const {
  double s = 0.0;
  for (const auto& b : buses) s += b.q_load0;
  return s;
}

NetworkCase parse_case(std::string_view case_text, std::string_view machine_text) {
  const RawCase raw = scan_case(case_text);
  NetworkCase net;
  net.name = raw.name;
  if (const auto it = raw.scalars.find("baseMVA"); it != raw.scalars.end()) {
    net.base_mva = parse_number(it->second, "baseMVA");
    if (!(net.base_mva > 0)) throw ParseError("baseMVA must be positive");
  }
  const double base = net.base_mva;

  const Table& bus_rows = require_matrix(raw, "bus", 13);
  const Table& gen_rows = require_matrix(raw, "gen", 10);
  const Table& branch_rows = require_matrix(raw, "branch", 10);
  const Table* cost_rows = nullptr;
  if (const auto it = raw.matrices.find("gencost"); it != raw.matrices.end()) {
    cost_rows = &it->second;
    if (cost_rows->size() < gen_rows.size()) {
      throw ParseError("gencost has " + std::to_string(cost_rows->size()) + " rows but gen has " +
                       std::to_string(gen_rows.size()));
    }
  }

  // Original bus table keyed by id, in file order.
  std::map<int, std::size_t> row_of_id;
  int slack_id = -1;
  for (std::size_t r = 0; r < bus_rows.size(); ++r) {
    const int id = static_cast<int>(bus_rows[r][0]);
    if (id <= 0) throw ParseError("bus ids must be positive");
    if (!row_of_id.emplace(id, r).second) {
      throw ParseError("duplicate bus id " + std::to_string(id));
    }
    const int type = static_cast<int>(bus_rows[r][1]);
    if (type == 3) {
      if (slack_id >= 0) throw ParseError("multiple slack buses (" + std::to_string(slack_id) + ", " + std::to_string(id) + ")");
      slack_id = id;
    } else if (type == 4) {
      throw ParseError("isolated bus " + std::to_string(id) + " is not supported");
    }
  }
  if (slack_id < 0) throw ParseError("no slack bus (type 3) in case");

  // Generators in table order; out-of-service or zero-capacity units are dropped.
  std::vector<int> gen_bus_ids;
  std::vector<Generator> gens;
  for (std::size_t r = 0; r < gen_rows.size(); ++r) {
    const auto& row = gen_rows[r];
    const int bus_id = static_cast<int>(row[0]);
    const double status = row[7];
    const double p_max = row[8];
    if (status <= 0 || p_max <= 0) continue;
    if (!row_of_id.contains(bus_id)) throw ParseError("generator on unknown bus " + std::to_string(bus_id));
    if (std::find(gen_bus_ids.begin(), gen_bus_ids.end(), bus_id) != gen_bus_ids.end()) {
      throw ParseError("multiple generators on bus " + std::to_string(bus_id));
    }
    Generator g;
    g.p_set = row[1] / base;
    g.q_set = row[2] / base;
    g.cost.q_max = row[3] / base;
    g.cost.q_min = row[4] / base;
    g.v_set = row[5];
    g.cost.p_max = p_max / base;
    g.cost.p_min = row[9] / base;
    if (cost_rows) {
      const auto& c = (*cost_rows)[r];
      if (c.size() < 4 || static_cast<int>(c[0]) != 2) {
        throw ParseError("gencost row " + std::to_string(r + 1) + ": only polynomial (model 2) costs are supported");
      }
      const int n = static_cast<int>(c[3]);
      if (n < 1 || c.size() < static_cast<std::size_t>(4 + n)) {
        throw ParseError("gencost row " + std::to_string(r + 1) + " is malformed");
      }
      for (int k = 0; k < n - 3; ++k) {
        if (c[4 + k] != 0.0) throw ParseError("gencost row " + std::to_string(r + 1) + ": polynomial degree above 2");
      }
      // Coefficients are listed highest order first, ending with c0.
      auto coef = [&](int power) { return power < n ? c[4 + (n - 1 - power)] : 0.0; };
      g.cost.c2 = coef(2) * base * base;
      g.cost.c1 = coef(1) * base;
      g.cost.c0 = coef(0);
    }
    if (g.cost.c2 < 0) throw ParseError("negative quadratic cost coefficient");
    if (g.cost.p_min > g.cost.p_max) throw ParseError("generator on bus " + std::to_string(bus_id) + " has Pmin > Pmax");
    if (g.cost.q_min > g.cost.q_max) throw ParseError("generator on bus " + std::to_string(bus_id) + " has Qmin > Qmax");
    gen_bus_ids.push_back(bus_id);
    gens.push_back(g);
  }
  if (std::find(gen_bus_ids.begin(), gen_bus_ids.end(), slack_id) == gen_bus_ids.end()) {
    throw ParseError("slack bus " + std::to_string(slack_id) + " has no in-service generator");
  }

  std::vector<int> order = gen_bus_ids;
  for (const auto& [id, r] : row_of_id) {
    if (std::find(gen_bus_ids.begin(), gen_bus_ids.end(), id) == gen_bus_ids.end()) order.push_back(id);
  }
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto& row = bus_rows[row_of_id.at(order[k])];
    Bus b;
    b.id = order[k];
    b.kind = k < gen_bus_ids.size() ? (b.id == slack_id ? BusKind::kSlack : BusKind::kGenerator)
                                    : BusKind::kLoad;
    b.p_load0 = row[2] / base;
    b.q_load0 = row[3] / base;
    b.shunt_g = row[4] / base;
    b.shunt_b = row[5] / base;
    b.v_init = row[7];
    b.theta_init = row[8] * kDegToRad;
    b.base_kv = row[9];
    b.v_max = row[11];
    b.v_min = row[12];
    if (b.v_min > b.v_max) throw ParseError("bus " + std::to_string(b.id) + " has Vmin > Vmax");
    if (b.kind == BusKind::kSlack) net.slack = static_cast<int>(k);
    net.buses.push_back(b);
  }

  std::map<int, int> internal;
  for (std::size_t k = 0; k < order.size(); ++k) internal[order[k]] = static_cast<int>(k);
  for (std::size_t r = 0; r < branch_rows.size(); ++r) {
    const auto& row = branch_rows[r];
    if (row.size() > 10 && row[10] <= 0) continue;
    const int from_id = static_cast<int>(row[0]);
    const int to_id = static_cast<int>(row[1]);
    if (!internal.contains(from_id) || !internal.contains(to_id)) {
      throw ParseError("branch " + std::to_string(r + 1) + " references an unknown bus");
    }
    if (from_id == to_id) throw ParseError("branch " + std::to_string(r + 1) + " connects a bus to itself");
    Branch br;
    br.from = internal[from_id];
    br.to = internal[to_id];
    br.series_r = row[2];
    br.series_x = row[3];
    br.charging_b = row[4];
    br.tap_ratio = row[8] == 0.0 ? 1.0 : row[8];
    br.phase_shift = row[9] * kDegToRad;
    net.branches.push_back(br);
  }

  const MachineSpec machines = scan_machines(machine_text);
  for (const auto& [bus_id, keys] : machines.sections) {
    if (std::find(gen_bus_ids.begin(), gen_bus_ids.end(), bus_id) == gen_bus_ids.end()) {
      throw ParseError("machine section for bus " + std::to_string(bus_id) + " which has no generator");
    }
  }
  for (std::size_t i = 0; i < gens.size(); ++i) {
    const auto it = machines.sections.find(gen_bus_ids[i]);
    gens[i].machine = it == machines.sections.end() ? MachineParams::typical()
                                                    : machine_from_section(it->second, gen_bus_ids[i]);
    gens[i].machine.validate();
  }
  net.generators = std::move(gens);
  if (net.name.empty()) net.name = "case";
  return net;
}

std::string serialize_case(const NetworkCase& net) {
  const double base = net.base_mva;
  std::ostringstream out;
  out << "function mpc = " << net.name << "\n\n";
  out << "mpc.version = '2';\n";
  out << "mpc.baseMVA = " << format_double(base) << ";\n\n";
  out << "%\tbus_i\ttype\tPd\tQd\tGs\tBs\tarea\tVm\tVa\tbaseKV\tzone\tVmax\tVmin\n";
  out << "mpc.bus = [\n";
  for (const auto& b : net.buses) {
    const int type = b.kind == BusKind::kSlack ? 3 : (b.kind == BusKind::kGenerator ? 2 : 1);
    out << '\t' << b.id << '\t' << type << '\t' << format_double(b.p_load0 * base) << '\t'
        << format_double(b.q_load0 * base) << '\t' << format_double(b.shunt_g * base) << '\t'
        << format_double(b.shunt_b * base) << "\t1\t" << format_double(b.v_init) << '\t'
        << format_double(b.theta_init / kDegToRad) << '\t' << format_double(b.base_kv) << "\t1\t"
        << format_double(b.v_max) << '\t' << format_double(b.v_min) << ";\n";
  }
  out << "];\n\n";
  out << "%\tbus\tPg\tQg\tQmax\tQmin\tVg\tmBase\tstatus\tPmax\tPmin\n";
  out << "mpc.gen = [\n";
  for (int i = 0; i < net.num_generators(); ++i) {
    const auto& g = net.generators[i];
    out << '\t' << net.buses[i].id << '\t' << format_double(g.p_set * base) << '\t'
        << format_double(g.q_set * base) << '\t' << format_double(g.cost.q_max * base) << '\t'
        << format_double(g.cost.q_min * base) << '\t' << format_double(g.v_set) << '\t'
        << format_double(base) << "\t1\t" << format_double(g.cost.p_max * base) << '\t'
        << format_double(g.cost.p_min * base) << ";\n";
  }
  out << "];\n\n";
  out << "%\tfbus\ttbus\tr\tx\tb\trateA\trateB\trateC\tratio\tangle\tstatus\n";
  out << "mpc.branch = [\n";
  for (const auto& br : net.branches) {
    out << '\t' << net.buses[br.from].id << '\t' << net.buses[br.to].id << '\t'
        << format_double(br.series_r) << '\t' << format_double(br.series_x) << '\t'
        << format_double(br.charging_b) << "\t0\t0\t0\t"
        << format_double(br.tap_ratio == 1.0 ? 0.0 : br.tap_ratio) << '\t'
        << format_double(br.phase_shift / kDegToRad) << "\t1;\n";
  }
  out << "];\n\n";
  out << "%\t2\tstartup\tshutdown\tn\tc2\tc1\tc0\n";
  out << "mpc.gencost = [\n";
  for (const auto& g : net.generators) {
    out << "\t2\t0\t0\t3\t" << format_double(g.cost.c2 / (base * base)) << '\t'
        << format_double(g.cost.c1 / base) << '\t' << format_double(g.cost.c0) << ";\n";
  }
  out << "];\n";
  return out.str();
}

std::string serialize_machines(const NetworkCase& net) {
  std::ostringstream out;
  for (int i = 0; i < net.num_generators(); ++i) {
    const auto& m = net.generators[i].machine;
    out << "[bus " << net.buses[i].id << "]\n"
        << "M = " << format_double(m.inertia) << '\n'
        << "D = " << format_double(m.damping) << '\n'
        << "tau_d = " << format_double(m.tau_d) << '\n'
        << "tau_c = " << format_double(m.tau_c) << '\n'
        << "x_d = " << format_double(m.x_d) << '\n'
        << "x_q = " << format_double(m.x_q) << '\n'
        << "x_d_prime = " << format_double(m.x_d_prime) << '\n'
        << "R_droop = " << format_double(m.droop) << "\n\n";
  }
  return out.str();
}

AdmittanceMatrix build_ybus(const NetworkCase& net) {
  using cd = std::complex<double>;
  const int n = net.num_buses();
  Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(n, n);
  for (const auto& br : net.branches) {
    const cd z(br.series_r, br.series_x);
    if (std::abs(z) == 0.0) {
      throw ConfigError("zero series impedance on branch " + std::to_string(net.buses[br.from].id) +
                        "-" + std::to_string(net.buses[br.to].id));
    }
    const cd ys = 1.0 / z;
    const cd tap = std::polar(br.tap_ratio, br.phase_shift);
    const cd ytt = ys + cd(0.0, br.charging_b / 2.0);
    const cd yff = ytt / (tap * std::conj(tap));
    y(br.from, br.from) += yff;
    y(br.to, br.to) += ytt;
    y(br.from, br.to) += -ys / std::conj(tap);
    y(br.to, br.from) += -ys / tap;
  }
  for (int i = 0; i < n; ++i) y(i, i) += cd(net.buses[i].shunt_g, net.buses[i].shunt_b);
  return {y.real(), y.imag()};
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string data_directory() {
  if (const char* env = std::getenv("GRIDLQR_DATA"); env && *env) return env;
  return GRIDLQR_DATA_DIR;
}

namespace {

// A path, or a name inside the data directory with an optional extension.
std::string resolve_data_file(const std::string& ref, const char* extension, const char* what) {
  namespace fs = std::filesystem;
  if (fs::is_regular_file(ref)) return ref;
  const fs::path bundled = fs::path(data_directory()) / ref;
  if (fs::is_regular_file(bundled)) return bundled.string();
  if (fs::is_regular_file(fs::path(bundled).concat(extension))) return fs::path(bundled).concat(extension).string();
  throw ConfigError(std::string(what) + " '" + ref + "' not found");
}

}  // namespace

NetworkCase load_case(const std::string& case_ref, const std::string& machine_ref) {
  namespace fs = std::filesystem;
  const std::string case_path = resolve_data_file(case_ref, ".m", "case file");
  const std::string machine_text =
      (machine_ref.empty() || machine_ref == "typical")
          ? std::string("typical = true\n")
          : read_text_file(resolve_data_file(machine_ref, ".machines", "machine file"));
  NetworkCase net = parse_case(read_text_file(case_path), machine_text);
  if (net.name == "case") net.name = fs::path(case_path).stem().string();
  return net;
}

}  // namespace gridlqr
