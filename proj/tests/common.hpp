#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>
#include <string>

#include "spoc/spoc.hpp"
#include "spoc_fixtures.hpp"

namespace spoc::testing {

inline SpocProblem fixture(const std::string& name) { return load_problem(builtin_fixtures().at(name)); }

/// m = n = k = 1 problem with constant data.
inline SpocProblem scalar_problem(double a11, double a12, double a21, double a22, double b1, double b2,
                                  double lo, double hi, double z10 = 1.0, double z20 = -0.5, double T = 1.0) {
  Eigen::MatrixXd A(2, 2), b(2, 1);
  A << a11, a12, a21, a22;
  b << b1, b2;
  return constant_problem(1, 1, A, b, Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Ones(1),
                          Eigen::MatrixXd::Identity(1, 1), Eigen::MatrixXd::Identity(1, 1),
                          Eigen::VectorXd::Constant(1, lo), Eigen::VectorXd::Constant(1, hi),
                          Eigen::Vector2d(z10, z20), T);
}

/// Unconstrained LQ oracle in standard form z' = At z + Bt u, At = I^{-eps} A, Bt = b.
/// P(t) from the Hamiltonian flow backwards from P(T) = pi; returns P at t.
struct RiccatiOracle {
  Eigen::MatrixXd At, Bt, Q, Rinv, Pi;
  double T;

  RiccatiOracle(const SpocProblem& p, double eps) : T(p.T) {
    const Eigen::VectorXd Ie = p.Ieps(eps);
    At = Ie.cwiseInverse().asDiagonal() * p.A(0.0, eps);
    Bt = p.b(0.0, eps);
    Q = p.Q(0.0, eps);
    Rinv = p.Rdiag(0.0, eps).cwiseInverse().asDiagonal();
    Pi = p.pi(eps);
  }

  Eigen::MatrixXd P(double t) const {
    const Eigen::Index d = At.rows();
    Eigen::MatrixXd H(2 * d, 2 * d);
    H << At, -Bt * Rinv * Bt.transpose(), -Q, -At.transpose();
    const Eigen::MatrixXd Phi = (H * (t - T)).exp();
    Eigen::MatrixXd XY(2 * d, d);
    XY << Eigen::MatrixXd::Identity(d, d), Pi;
    const Eigen::MatrixXd S = Phi * XY;
    return S.bottomRows(d) * S.topRows(d).inverse();
  }

  double value(const Eigen::VectorXd& z0) const { return 0.5 * z0.dot(P(0.0) * z0); }
};

}  // namespace spoc::testing
