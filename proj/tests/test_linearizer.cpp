#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "gridlqr/errors.hpp"
#include "gridlqr/linearizer.hpp"
#include "oracles.hpp"

using namespace gridlqr;

namespace {

struct Fixture {
  PowerSystem sys{load_case("case9", "typical")};
  SystemPoint z0 = solve_equilibrium(sys, base_load_vector(sys.net()), case_setpoints(sys.net()));
};

const Fixture& nine() {
  static const Fixture f;
  return f;
}

}  // namespace

TEST(Linearize, ReducedMatricesFromBlocks) {
  const LinearizedSystem lin = linearize(nine().sys, nine().z0);
  ASSERT_TRUE(lin.reduced());
  const Matrix ha_inv = lin.h_a.inverse();
  EXPECT_LT((lin.A - (lin.g_x - lin.g_a * ha_inv * lin.h_x)).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT((lin.B - lin.g_u).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((lin.E - lin.g_a * ha_inv).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_TRUE(lin.warnings.empty());
  EXPECT_LT(lin.base_residual, 1e-10);
  EXPECT_GT(lin.h_a_rcond, 1e-12);
}

TEST(Linearize, AlgebraicResponseResidual) {
  const LinearizedSystem lin = linearize(nine().sys, nine().z0);
  std::mt19937 rng(5);
  std::normal_distribution<double> nd(0.0, 0.1);
  const Vector dx = Vector::NullaryExpr(lin.A.rows(), [&] { return nd(rng); });
  const Vector dd = Vector::Zero(lin.h_a.rows());
  const Vector da = lin.algebraic_response(dx, dd);
  EXPECT_LT((lin.h_x * dx + lin.h_a * da).lpNorm<Eigen::Infinity>(), 1e-10);
}

TEST(Linearize, ReducedModelMatchesNonlinearFlow) {
  // Directional derivative of x -> g(x, a(x), u) with a solved exactly.
  const Fixture& f = nine();
  const LinearizedSystem lin = linearize(f.sys, f.z0);
  std::mt19937 rng(9);
  std::normal_distribution<double> nd(0.0, 1.0);
  const Vector dir = Vector::NullaryExpr(lin.A.rows(), [&] { return nd(rng); });
  const double h = 1e-6;
  auto flow = [&](double s) {
    const Vector x = f.z0.x + s * dir;
    const Vector a = solve_algebraic(f.sys, x, f.z0.d, f.z0.a).a;
    return eval_g(f.sys, x, a, f.z0.u);
  };
  const Vector fd = (flow(h) - flow(-h)) / (2 * h);
  EXPECT_LT((fd - lin.A * dir).lpNorm<Eigen::Infinity>() / std::max(1.0, fd.lpNorm<Eigen::Infinity>()), 1e-6);
}

TEST(Linearize, NonEquilibriumWarns) {
  SystemPoint z = nine().z0;
  z.u[0] += 0.1;
  const LinearizedSystem lin = linearize(nine().sys, z);
  EXPECT_FALSE(lin.warnings.empty());
  EXPECT_TRUE(lin.reduced());
}

TEST(Linearize, SingularAlgebraicJacobian) {
  SystemPoint z = nine().z0;
  const Layout& lay = nine().sys.layout();
  for (int k = 0; k < lay.N; ++k) z.a[lay.v(k)] = 0.0;
  for (int i = 0; i < lay.G; ++i) z.x[lay.emf(i)] = 0.0;
  EXPECT_THROW(linearize(nine().sys, z), SingularMatrix);
}

TEST(Linearize, DumpRoundTrip) {
  const LinearizedSystem lin = linearize(nine().sys, nine().z0);
  const auto dir = std::filesystem::temp_directory_path() / "gridlqr_dump_test";
  std::filesystem::remove_all(dir);
  dump_linearization(dir.string(), lin);
  std::ifstream in(dir / "A.txt");
  ASSERT_TRUE(in.good());
  Matrix A(lin.A.rows(), lin.A.cols());
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    for (Eigen::Index j = 0; j < A.cols(); ++j) in >> A(i, j);
  }
  EXPECT_EQ(A, lin.A);
  for (const char* f : {"g_x.txt", "g_a.txt", "g_u.txt", "h_x.txt", "h_a.txt", "B.txt", "E.txt"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  }
  std::filesystem::remove_all(dir);
}
