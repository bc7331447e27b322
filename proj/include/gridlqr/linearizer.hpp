#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "gridlqr/steady_state.hpp"

namespace gridlqr {

// Jacobians of (g, h) at a base point z0 and the reduced state-space model
//   x' = A x' + B u' + E d'.
struct LinearizedSystem {
  Matrix g_x, g_a, g_u, h_x, h_a;
  Matrix A, B, E;
  SystemPoint z0;
  double h_a_rcond = 0.0;      // reciprocal condition estimate of h_a
  double base_residual = 0.0;  // ||g(z0)||_inf
  std::vector<std::string> warnings;

  bool reduced() const { return A.size() > 0; }

  // Algebraic deviation solving h_x dx + h_a da = dd.
  Vector algebraic_response(const Vector& dx, const Vector& dd) const;

  Eigen::PartialPivLU<Matrix> h_a_lu;
};

// Fills the Jacobian blocks. A base point that is not an equilibrium is
// accepted with a warning.
LinearizedSystem jacobians(const PowerSystem& sys, const SystemPoint& z0);

// Fills A, B and E. Throws SingularMatrix if cond(h_a) > 1e12.
void reduce(LinearizedSystem& lin);

LinearizedSystem linearize(const PowerSystem& sys, const SystemPoint& z0);

// Row-major, space-separated, full precision.
void write_matrix(std::ostream& os, const Matrix& m);
void dump_linearization(const std::string& directory, const LinearizedSystem& lin);

}  // namespace gridlqr
