#include "gridlqr/agc.hpp"

#include <algorithm>
#include <complex>
#include <map>
#include <sstream>

#include "gridlqr/errors.hpp"

namespace gridlqr {

std::vector<int> parse_area_file(std::string_view text, const NetworkCase& net) {
  std::vector<int> area(net.num_buses(), 0);
  std::vector<bool> seen(net.num_buses(), false);
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto cut = line.find_first_of("#%");
    if (cut != std::string::npos) line.erase(cut);
    std::istringstream ls(line);
    int bus_id = 0, area_id = 0;
    if (!(ls >> bus_id)) continue;
    std::string extra;
    if (!(ls >> area_id) || (ls >> extra)) {
      throw ParseError("area file line " + std::to_string(line_no) + ": expected 'bus_id area_id'");
    }
    const int k = net.index_of(bus_id);
    if (k < 0) throw ParseError("area file line " + std::to_string(line_no) + ": unknown bus " + std::to_string(bus_id));
    if (seen[k]) throw ParseError("area file: bus " + std::to_string(bus_id) + " listed twice");
    seen[k] = true;
    area[k] = area_id;
  }
  for (int k = 0; k < net.num_buses(); ++k) {
    if (!seen[k]) throw ParseError("area file: bus " + std::to_string(net.buses[k].id) + " has no area");
  }
  return area;
}

AreaConfig make_area_config(const PowerSystem& sys, const std::vector<int>& bus_area_ids,
                            const Vector& a_eq, double k_a) {
  const NetworkCase& net = sys.net();
  const Layout& lay = sys.layout();
  if (!bus_area_ids.empty() && static_cast<int>(bus_area_ids.size()) != lay.N) {
    throw ConfigError("area assignment must cover every bus");
  }
  AreaConfig cfg;
  cfg.k_a = k_a;
  std::map<int, int> index;
  for (int k = 0; k < lay.N; ++k) index.emplace(bus_area_ids.empty() ? 1 : bus_area_ids[k], 0);
  for (auto& [id, idx] : index) {
    idx = static_cast<int>(cfg.area_ids.size());
    cfg.area_ids.push_back(id);
  }
  const int A = cfg.num_areas();
  cfg.bus_area.resize(lay.N);
  for (int k = 0; k < lay.N; ++k) cfg.bus_area[k] = index.at(bus_area_ids.empty() ? 1 : bus_area_ids[k]);

  cfg.area_generators.assign(A, {});
  cfg.bias = Vector::Zero(A);
  cfg.pg_eq_sum = Vector::Zero(A);
  cfg.participation = Vector::Zero(lay.G);
  for (int i = 0; i < lay.G; ++i) {
    const int ar = cfg.bus_area[i];
    const MachineParams& mp = net.generators[i].machine;
    cfg.area_generators[ar].push_back(i);
    cfg.bias[ar] += 1.0 / mp.droop + mp.damping;
    cfg.pg_eq_sum[ar] += a_eq[lay.pg(i)];
  }
  for (int ar = 0; ar < A; ++ar) {
    const auto& gens = cfg.area_generators[ar];
    if (gens.empty()) continue;
    for (int i : gens) {
      cfg.participation[i] = cfg.pg_eq_sum[ar] != 0.0 ? a_eq[lay.pg(i)] / cfg.pg_eq_sum[ar]
                                                      : 1.0 / static_cast<double>(gens.size());
    }
  }
  for (int b = 0; b < static_cast<int>(net.branches.size()); ++b) {
    const Branch& br = net.branches[b];
    if (cfg.bus_area[br.from] != cfg.bus_area[br.to]) {
      cfg.ties.push_back({b, cfg.bus_area[br.from], cfg.bus_area[br.to]});
    }
  }
  return cfg;
}

BranchFlow branch_flow(const Branch& br, const Vector& v, const Vector& theta) {
  using C = std::complex<double>;
  const C ys = 1.0 / C(br.series_r, br.series_x);
  const C tap = std::polar(br.tap_ratio, br.phase_shift);
  const C yff = (ys + C(0.0, br.charging_b / 2.0)) / (br.tap_ratio * br.tap_ratio);
  const C yft = -ys / std::conj(tap);
  const C ytf = -ys / tap;
  const C ytt = ys + C(0.0, br.charging_b / 2.0);
  const C vf = std::polar(v[br.from], theta[br.from]);
  const C vt = std::polar(v[br.to], theta[br.to]);
  return {(vf * std::conj(yff * vf + yft * vt)).real(), (vt * std::conj(ytf * vf + ytt * vt)).real()};
}

Vector tie_exports(const PowerSystem& sys, const AreaConfig& cfg, const Vector& a) {
  const Layout& lay = sys.layout();
  const Vector v = a.segment(lay.v(0), lay.N);
  const Vector theta = a.segment(lay.theta(0), lay.N);
  Vector out = Vector::Zero(cfg.num_areas());
  for (const TieLine& t : cfg.ties) {
    const BranchFlow f = branch_flow(sys.net().branches[t.branch], v, theta);
    out[t.from_area] += f.p_from;
    out[t.to_area] += f.p_to;
  }
  return out;
}

Vector ace(const PowerSystem& sys, const AreaConfig& cfg, const Vector& x, const Vector& a,
           const Vector& tie_eq) {
  const Layout& lay = sys.layout();
  Vector e = tie_exports(sys, cfg, a) - tie_eq;
  for (int ar = 0; ar < cfg.num_areas(); ++ar) {
    const auto& gens = cfg.area_generators[ar];
    if (gens.empty()) continue;
    double mean = 0.0;
    for (int i : gens) mean += x[lay.omega(i)];
    mean /= static_cast<double>(gens.size());
    e[ar] += cfg.bias[ar] * (mean - sys.omega_s()) / (2.0 * std::numbers::pi);
  }
  return e;
}

AgcUpdate agc_step(const AreaConfig& cfg, const Vector& y, const Vector& ace_value) {
  AgcUpdate up;
  up.y_dot = cfg.k_a * (-y - ace_value + cfg.pg_eq_sum);
  up.r.resize(cfg.participation.size());
  for (int ar = 0; ar < cfg.num_areas(); ++ar) {
    for (int i : cfg.area_generators[ar]) up.r[i] = cfg.participation[i] * y[ar];
  }
  return up;
}

}  // namespace gridlqr
