#include "gridlqr/linearizer.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "gridlqr/errors.hpp"

namespace gridlqr {
namespace {

// Solves M' X = C from the factorization P M = L U.
Matrix solve_transposed(const Eigen::PartialPivLU<Matrix>& lu, const Matrix& C) {
  Matrix X = lu.matrixLU().triangularView<Eigen::Upper>().transpose().solve(C);
  lu.matrixLU().triangularView<Eigen::UnitLower>().transpose().solveInPlace(X);
  return lu.permutationP().transpose() * X;
}

}  // namespace

LinearizedSystem jacobians(const PowerSystem& sys, const SystemPoint& z0) {
  LinearizedSystem lin;
  ModelJacobians j = model_jacobians(sys, z0.x, z0.a);
  lin.g_x = std::move(j.g_x);
  lin.g_a = std::move(j.g_a);
  lin.g_u = std::move(j.g_u);
  lin.h_x = std::move(j.h_x);
  lin.h_a = std::move(j.h_a);
  lin.z0 = z0;
  lin.base_residual = eval_g(sys, z0.x, z0.a, z0.u).lpNorm<Eigen::Infinity>();
  if (!(lin.base_residual < 1e-8)) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "base point is not an equilibrium (||g||_inf = %.3e)",
                  lin.base_residual);
    lin.warnings.emplace_back(buf);
  }
  return lin;
}

void reduce(LinearizedSystem& lin) {
  lin.h_a_lu.compute(lin.h_a);
  lin.h_a_rcond = lin.h_a_lu.rcond();
  if (!(lin.h_a_rcond * 1e12 >= 1.0)) {
    throw SingularMatrix("algebraic Jacobian h_a is singular (condition estimate " +
                         std::to_string(1.0 / lin.h_a_rcond) + ")");
  }
  // E = g_a h_a^{-1}  <=>  h_a^T E^T = g_a^T
  lin.E = solve_transposed(lin.h_a_lu, lin.g_a.transpose()).transpose();
  lin.A = lin.g_x - lin.E * lin.h_x;
  lin.B = lin.g_u;
}

LinearizedSystem linearize(const PowerSystem& sys, const SystemPoint& z0) {
  LinearizedSystem lin = jacobians(sys, z0);
  reduce(lin);
  return lin;
}

Vector LinearizedSystem::algebraic_response(const Vector& dx, const Vector& dd) const {
  return h_a_lu.solve(dd - h_x * dx);
}

void write_matrix(std::ostream& os, const Matrix& m) {
  char buf[32];
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", m(r, c));
      if (c) os << ' ';
      os << buf;
    }
    os << '\n';
  }
}

void dump_linearization(const std::string& directory, const LinearizedSystem& lin) {
  std::filesystem::create_directories(directory);
  const std::pair<const char*, const Matrix*> blocks[] = {
      {"g_x", &lin.g_x}, {"g_a", &lin.g_a}, {"g_u", &lin.g_u}, {"h_x", &lin.h_x},
      {"h_a", &lin.h_a}, {"A", &lin.A},     {"B", &lin.B},     {"E", &lin.E}};
  for (const auto& [name, mat] : blocks) {
    std::ofstream out(std::filesystem::path(directory) / (std::string(name) + ".txt"));
    if (!out) throw ConfigError("cannot write matrix dump to " + directory);
    write_matrix(out, *mat);
  }
}

}  // namespace gridlqr
