#pragma once

#include <optional>

#include "gridlqr/dae_model.hpp"

namespace gridlqr {

// A full operating point z = (x, a, u) and the load vector it balances.
struct SystemPoint {
  Vector x;
  Vector a;
  Vector u;
  Vector d;
};

// Load-flow specification: voltage magnitude at every generator bus, real
// power at non-slack generators (the slack entry is ignored) and the slack
// bus angle.
struct Setpoints {
  Vector v_gen;
  Vector p_gen;
  double theta_slack = 0.0;
};

struct LoadFlowOptions {
  double tolerance = 1e-10;
  int max_iterations = 30;
  std::optional<Vector> a_guess;  // warm start; flat start when empty
};

// Setpoints stored in the case file (Vg, Pg, Va of the slack bus).
Setpoints case_setpoints(const NetworkCase& net);

// Extracts load-flow setpoints from an algebraic vector.
Setpoints setpoints_from(const Layout& layout, int slack, const Vector& a);

// Newton-Raphson load flow. Returns the complete algebraic vector with the
// slack real power and all generator reactive powers filled in.
// Throws NonConvergence (after one flat-start retry) or SingularMatrix.
Vector load_flow(const PowerSystem& sys, const Vector& d, const Setpoints& sp,
                 const LoadFlowOptions& opts = {});

// Generator states and controls that make the point an equilibrium for `a`.
struct GeneratorEquilibrium {
  Vector x;
  Vector u;
};
GeneratorEquilibrium init_generators(const PowerSystem& sys, const Vector& a);

// load_flow followed by init_generators.
SystemPoint solve_equilibrium(const PowerSystem& sys, const Vector& d, const Setpoints& sp,
                              const LoadFlowOptions& opts = {});

// ||g(z)||_inf + ||h(x, a) - d||_inf.
double equilibrium_residual(const PowerSystem& sys, const SystemPoint& z);

}  // namespace gridlqr
