#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "problem.hpp"
#include "trajectory.hpp"

namespace spoc {

enum class ClampSign { Primal, Dual };

/// Componentwise median(alpha_j(t), +-s_j, beta_j(t)); Primal negates s.
inline Eigen::VectorXd clamp_projection(const Eigen::VectorXd& s, double t, const SpocProblem& p, ClampSign sign) {
  const Eigen::VectorXd lo = p.lower(t), hi = p.upper(t);
  Eigen::VectorXd out(s.size());
  for (Eigen::Index j = 0; j < s.size(); ++j) {
    const double v = sign == ClampSign::Primal ? -s(j) : s(j);
    out(j) = std::min(std::max(v, lo(j)), hi(j));
  }
  return out;
}

/// Pre-clamp vector R^{-1} b' I^eps x.
inline Eigen::VectorXd preclamp(const Eigen::VectorXd& x, double t, double eps, const SpocProblem& p) {
  const Eigen::VectorXd s = p.b(t, eps).transpose() * p.Ieps(eps).cwiseProduct(x);
  return s.cwiseQuotient(p.Rdiag(t, eps));
}

/// PMP control clamp(-R^{-1} b' I^eps chi).
inline Eigen::VectorXd pmp_control(const Eigen::VectorXd& chi, double t, double eps, const SpocProblem& p) {
  return clamp_projection(preclamp(chi, t, eps, p), t, p, ClampSign::Primal);
}

/// Dual control clamp(R^{-1} b' I^eps gamma).
inline Eigen::VectorXd dual_control(const Eigen::VectorXd& gamma, double t, double eps, const SpocProblem& p) {
  return clamp_projection(preclamp(gamma, t, eps, p), t, p, ClampSign::Dual);
}

/// sum_j sup_{lo<=u<=hi} s_j u - R_j u^2 / 2, with s = b' I^eps gamma already formed.
inline double theta_of_s(const Eigen::VectorXd& s, const Eigen::VectorXd& R, const Eigen::VectorXd& lo,
                         const Eigen::VectorXd& hi) {
  double total = 0.0;
  for (Eigen::Index j = 0; j < s.size(); ++j) {
    const double v = s(j) / R(j);
    if (v < lo(j)) total += lo(j) * s(j) - 0.5 * lo(j) * lo(j) * R(j);
    else if (v > hi(j)) total += hi(j) * s(j) - 0.5 * hi(j) * hi(j) * R(j);
    else total += 0.5 * s(j) * s(j) / R(j);
  }
  return total;
}

/// Conjugate of the control cost plus box indicator, evaluated at b' I^eps gamma.
inline double theta(const Eigen::VectorXd& gamma, double t, double eps, const SpocProblem& p) {
  const Eigen::VectorXd s = p.b(t, eps).transpose() * p.Ieps(eps).cwiseProduct(gamma);
  return theta_of_s(s, p.Rdiag(t, eps), p.lower(t), p.upper(t));
}

/// d(I^eps gamma)/dt = -A' gamma + rho.
inline Eigen::VectorXd dual_dynamics_rhs(const Eigen::VectorXd& gamma, const Eigen::VectorXd& rho, double t,
                                         double eps, const SpocProblem& p) {
  return -p.A(t, eps).transpose() * gamma + rho;
}

/// Dual problem data at a fixed eps, with Q factorizations cached when Q is time invariant.
class DualProblem {
 public:
  DualProblem(const SpocProblem& p, double eps) : p_(&p), eps_(eps) {
    if (!(eps > 0.0)) throw Error(ErrorCode::InvalidArgument, "dual problem needs eps > 0");
    constant_q_ = p.Q11.time_invariant() && p.Q12.time_invariant() && p.Q21.time_invariant() &&
                  p.Q22.time_invariant();
    if (constant_q_) {
      qfac_.compute(p.Q(0.0, eps));
      if (qfac_.info() != Eigen::Success) throw Error(ErrorCode::SingularData, "Q is not positive definite");
    }
    const Eigen::MatrixXd p11 = p.pi11.eval(0.0, eps), p22 = p.pi22.eval(0.0, eps);
    Eigen::LLT<Eigen::MatrixXd> l11(p11), l22(p22);
    if (l11.info() != Eigen::Success || l22.info() != Eigen::Success)
      throw Error(ErrorCode::SingularData, "pi11/pi22 not positive definite");
    terminal_ = Eigen::MatrixXd::Zero(p.dim(), p.dim());
    terminal_.topLeftCorner(p.m, p.m) = l11.solve(Eigen::MatrixXd::Identity(p.m, p.m));
    terminal_.bottomRightCorner(p.n, p.n) = eps * l22.solve(Eigen::MatrixXd::Identity(p.n, p.n));
  }

  const SpocProblem& problem() const { return *p_; }
  double eps() const { return eps_; }

  Eigen::VectorXd Qinv(double t, const Eigen::VectorXd& rho) const {
    if (constant_q_) return qfac_.solve(rho);
    Eigen::LLT<Eigen::MatrixXd> f(p_->Q(t, eps_));
    if (f.info() != Eigen::Success) throw Error(ErrorCode::SingularData, "Q is not positive definite");
    return f.solve(rho);
  }

  /// I^eps pi^{-1} I^eps = blockdiag(pi11^{-1}, eps pi22^{-1}); no 1/eps is formed.
  const Eigen::MatrixXd& terminal_weight() const { return terminal_; }

  /// Integrand -1/2 rho'Q^{-1}rho - theta(gamma).
  double integrand(double t, const Eigen::VectorXd& rho, const Eigen::VectorXd& gamma) const {
    return -0.5 * rho.dot(Qinv(t, rho)) - theta(gamma, t, eps_, *p_);
  }

  double boundary_terms(const Eigen::VectorXd& gamma0, const Eigen::VectorXd& gammaT) const {
    return -gamma0.dot(p_->Ieps(eps_).cwiseProduct(p_->z0)) - 0.5 * gammaT.dot(terminal_ * gammaT);
  }

 private:
  const SpocProblem* p_;
  double eps_;
  bool constant_q_ = false;
  Eigen::LLT<Eigen::MatrixXd> qfac_;
  Eigen::MatrixXd terminal_;
};

/// Trapezoidal quadrature of the dual integrand plus the two boundary terms.
inline double dual_objective(const Channel& rho, const Channel& gamma, double eps, const SpocProblem& p) {
  if (rho.t != gamma.t) throw Error(ErrorCode::MeshMismatch, "rho and gamma live on different meshes");
  if (rho.t.empty()) throw Error(ErrorCode::MeshMismatch, "empty channel");
  const DualProblem dp(p, eps);
  double integral = 0.0;
  double prev = 0.0;
  for (size_t i = 0; i < rho.t.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const double f = dp.integrand(rho.t[i], rho.v.row(r).transpose(), gamma.v.row(r).transpose());
    if (i > 0) integral += 0.5 * (rho.t[i] - rho.t[i - 1]) * (f + prev);
    prev = f;
  }
  return integral + dp.boundary_terms(gamma.v.row(0).transpose(), gamma.v.bottomRows(1).transpose());
}

/// gamma = -chi, mu = z, rho = Qz. Throws ResidualTooLarge when the pair is far from the adjoint equation.
///
/// The residual is the trapezoidal defect of d(I^eps gamma)/dt = -A'gamma + rho summed over intervals,
/// relative to the size of rho times the horizon.
inline Trajectory construct_dual_from_primal(const Trajectory& primal, double eps, const SpocProblem& p,
                                             double tol = 1e-2) {
  primal.check();
  const Eigen::MatrixXd& z = primal.get("z");
  const Eigen::MatrixXd& chi = primal.get("chi");
  const size_t N = primal.nodes();
  Eigen::MatrixXd rho(z.rows(), z.cols());
  for (size_t i = 0; i < N; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    rho.row(r) = (p.Q(primal.t[i], eps) * z.row(r).transpose()).transpose();
  }
  const Eigen::MatrixXd gamma = -chi;
  const Eigen::VectorXd Ie = p.Ieps(eps);
  double defect = 0.0, scale = 0.0;
  for (size_t i = 0; i + 1 < N; ++i) {
    const auto a = static_cast<Eigen::Index>(i), b = a + 1;
    const double h = primal.t[i + 1] - primal.t[i];
    const Eigen::VectorXd ga = gamma.row(a).transpose(), gb = gamma.row(b).transpose();
    const Eigen::VectorXd fa = dual_dynamics_rhs(ga, rho.row(a).transpose(), primal.t[i], eps, p);
    const Eigen::VectorXd fb = dual_dynamics_rhs(gb, rho.row(b).transpose(), primal.t[i + 1], eps, p);
    defect += (Ie.cwiseProduct(gb - ga) - 0.5 * h * (fa + fb)).lpNorm<Eigen::Infinity>();
    scale = std::max(scale, rho.row(a).lpNorm<Eigen::Infinity>());
  }
  scale = std::max(scale, 1.0) * p.T;
  if (defect > tol * scale)
    throw Error(ErrorCode::ResidualTooLarge,
                "adjoint defect " + std::to_string(defect) + " exceeds " + std::to_string(tol * scale));
  Trajectory out{primal.t, {}};
  out.set("gamma", gamma);
  out.set("mu", z);
  out.set("rho", rho);
  return out;
}

}  // namespace spoc
