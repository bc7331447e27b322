#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "gridlqr/dae_model.hpp"

namespace gridlqr {

struct TieLine {
  int branch = 0;     // index into NetworkCase::branches
  int from_area = 0;  // area of the branch's from-bus
  int to_area = 0;
};

struct AreaConfig {
  std::vector<int> bus_area;                     // internal bus -> area index
  std::vector<int> area_ids;                     // area index -> user-facing id
  std::vector<std::vector<int>> area_generators;
  std::vector<TieLine> ties;
  Vector bias;           // b_a = sum over the area of 1/R_i + D_i
  Vector participation;  // K_i per generator, sums to one per area
  Vector pg_eq_sum;      // sum of p_g^eq per area
  double k_a = 1.0;      // integrator gain (1/s)

  int num_areas() const { return static_cast<int>(area_ids.size()); }
};

// Reads "bus_id area_id" lines; '#' and '%' start comments. Returns the area
// id of every internal bus. Throws ParseError.
std::vector<int> parse_area_file(std::string_view text, const NetworkCase& net);

// Builds the area configuration. `bus_area_ids` holds one area id per internal
// bus; empty means a single area. Participation factors are p_g^eq / sum.
AreaConfig make_area_config(const PowerSystem& sys, const std::vector<int>& bus_area_ids,
                            const Vector& a_eq, double k_a = 1.0);

// Real power leaving each area through its tie-lines (pi-model sending end).
Vector tie_exports(const PowerSystem& sys, const AreaConfig& cfg, const Vector& a);

// Real power entering a branch at its from and to ends.
struct BranchFlow {
  double p_from = 0.0;
  double p_to = 0.0;
};
BranchFlow branch_flow(const Branch& br, const Vector& v, const Vector& theta);

// Area control error: tie-line deviations plus frequency bias (Hz).
Vector ace(const PowerSystem& sys, const AreaConfig& cfg, const Vector& x, const Vector& a,
           const Vector& tie_eq);

struct AgcUpdate {
  Vector y_dot;  // per area
  Vector r;      // governor references per generator
};
AgcUpdate agc_step(const AreaConfig& cfg, const Vector& y, const Vector& ace_value);

}  // namespace gridlqr
