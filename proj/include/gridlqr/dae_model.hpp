#pragma once

#include <numbers>

#include <Eigen/Dense>

#include "gridlqr/netcase.hpp"

namespace gridlqr {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct BaseFrequency {
  double f_s = 60.0;  // Hz
  double omega_s() const { return 2.0 * std::numbers::pi * f_s; }
};

// Index map for the block-stacked vectors of the DAE model.
//   x = [delta, omega, e, m]            (4G)
//   a = [p_g, q_g, v, theta]            (2G + 2N)
//   u = [r, f]                          (2G)
//   h = [stator P, stator Q, P_G, Q_G, P_L, Q_L]   (2G + 2N)
struct Layout {
  int G = 0;
  int N = 0;

  int L() const { return N - G; }
  int nx() const { return 4 * G; }
  int na() const { return 2 * G + 2 * N; }
  int nu() const { return 2 * G; }
  int nh() const { return 2 * G + 2 * N; }

  int delta(int i) const { return i; }
  int omega(int i) const { return G + i; }
  int emf(int i) const { return 2 * G + i; }
  int mech(int i) const { return 3 * G + i; }

  int pg(int i) const { return i; }
  int qg(int i) const { return G + i; }
  int v(int k) const { return 2 * G + k; }
  int theta(int k) const { return 2 * G + N + k; }

  int ref(int i) const { return i; }
  int field(int i) const { return G + i; }

  int stator_p(int i) const { return i; }
  int stator_q(int i) const { return G + i; }
  int bus_p(int k) const { return k < G ? 2 * G + k : 4 * G + (k - G); }
  int bus_q(int k) const { return k < G ? 3 * G + k : 4 * G + L() + (k - G); }
};

// Immutable model bundle shared by every solver stage.
class PowerSystem {
 public:
  explicit PowerSystem(NetworkCase net, BaseFrequency freq = {});

  const NetworkCase& net() const { return net_; }
  const AdmittanceMatrix& ybus() const { return ybus_; }
  const Eigen::MatrixXcd& ybus_complex() const { return y_; }
  const Layout& layout() const { return layout_; }
  const BaseFrequency& frequency() const { return freq_; }
  double omega_s() const { return freq_.omega_s(); }

 private:
  NetworkCase net_;
  BaseFrequency freq_;
  AdmittanceMatrix ybus_;
  Eigen::MatrixXcd y_;
  Layout layout_;
};

// Complex power injections S = V conj(Y V) at every bus.
struct Injections {
  Vector p;
  Vector q;
};
Injections bus_injections(const Eigen::MatrixXcd& y, const Vector& v, const Vector& theta);

struct InjectionJacobian {
  Matrix dp_dv, dp_dtheta, dq_dv, dq_dtheta;
};
InjectionJacobian injection_jacobian(const Eigen::MatrixXcd& y, const Vector& v, const Vector& theta);

// d = [0_2G, -p_l(G), -q_l(G), -p_l(L), -q_l(L)].
Vector load_vector(const Layout& layout, const Vector& p_load, const Vector& q_load);
Vector base_load_vector(const NetworkCase& net);

Vector eval_g(const PowerSystem& sys, const Vector& x, const Vector& a, const Vector& u);
Vector eval_h(const PowerSystem& sys, const Vector& x, const Vector& a);

// Analytic partial derivatives of g and h.
struct ModelJacobians {
  Matrix g_x, g_a, g_u, h_x, h_a;
};
ModelJacobians model_jacobians(const PowerSystem& sys, const Vector& x, const Vector& a);
Matrix algebraic_jacobian(const PowerSystem& sys, const Vector& x, const Vector& a);

struct AlgebraicOptions {
  double tolerance = 1e-10;
  int max_iterations = 50;
  int max_halvings = 8;
  double max_condition = 1e12;
};

struct AlgebraicSolution {
  Vector a;
  int iterations = 0;
  double residual = 0.0;
};

// Damped Newton on h(x, a) = d for the algebraic variables.
// Throws NonConvergence or SingularMatrix.
AlgebraicSolution solve_algebraic(const PowerSystem& sys, const Vector& x, const Vector& d,
                                  const Vector& a_guess, const AlgebraicOptions& opts = {});

// Warm-started algebraic solver for repeated calls along a trajectory. Keeps
// the last factorization of h_a and only refreshes it when the simplified
// Newton iteration stops contracting. Not thread-safe; one per simulation.
class AlgebraicSolver {
 public:
  explicit AlgebraicSolver(const PowerSystem& sys, AlgebraicOptions opts = {});

  AlgebraicSolution solve(const Vector& x, const Vector& d, const Vector& a_guess);

  int factorizations() const { return factorizations_; }

 private:
  void refactor(const Vector& x, const Vector& a);

  const PowerSystem& sys_;
  AlgebraicOptions opts_;
  Eigen::PartialPivLU<Matrix> lu_;
  bool have_factor_ = false;
  int factorizations_ = 0;
};

}  // namespace gridlqr
