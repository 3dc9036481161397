#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <unsupported/Eigen/MatrixFunctions>
#include <utility>
#include <vector>

#include "problem.hpp"
#include "trajectory.hpp"

namespace spoc {

/// The eps -> 0 limit problem on the slow state x = z1:
///   x' = Acal x + b1^0 u,  cost 1/2 int x'Qcal x + u'R^0 u + 1/2 x(T)' pi11^0 x(T).
class ReducedProblem {
 public:
  ReducedProblem() = default;
  explicit ReducedProblem(SpocProblem parent) : p_(std::move(parent)) {
    constant_ = p_.time_invariant();
    if (constant_) {
      Acal0_ = compute_Acal(0.0);
      Qcal0_ = compute_Qcal(0.0);
    }
  }

  const SpocProblem& parent() const { return p_; }
  int m() const { return p_.m; }
  int k() const { return p_.k; }
  double T() const { return p_.T; }
  bool time_invariant() const { return constant_; }

  Eigen::MatrixXd Acal(double t) const { return constant_ ? Acal0_ : compute_Acal(t); }
  Eigen::MatrixXd Qcal(double t) const { return constant_ ? Qcal0_ : compute_Qcal(t); }
  Eigen::MatrixXd b10(double t) const { return p_.b1.leading(t); }
  Eigen::VectorXd R0(double t) const { return p_.R.leading(t).col(0); }
  Eigen::MatrixXd pi110() const { return p_.pi11.leading(0.0); }
  Eigen::VectorXd lower(double t) const { return p_.lower(t); }
  Eigen::VectorXd upper(double t) const { return p_.upper(t); }
  Eigen::VectorXd x0() const { return p_.z0.head(p_.m); }

  /// Columns [I; -(A22^0)^{-1} A21^0]: maps x to (x, z2o).
  Eigen::MatrixXd lift(double t) const {
    Eigen::MatrixXd L(p_.m + p_.n, p_.m);
    L.topRows(p_.m).setIdentity();
    L.bottomRows(p_.n) = -a22_lu(t).solve(p_.A21.leading(t));
    return L;
  }

  Eigen::PartialPivLU<Eigen::MatrixXd> a22_lu(double t) const {
    const Eigen::MatrixXd A22 = p_.A22.leading(t);
    Eigen::FullPivLU<Eigen::MatrixXd> check(A22);
    if (!check.isInvertible() || check.rcond() < 1e-13)
      throw Error(ErrorCode::SingularA22, "A22^0 is singular at t=" + std::to_string(t));
    return Eigen::PartialPivLU<Eigen::MatrixXd>(A22);
  }

 private:
  Eigen::MatrixXd compute_Acal(double t) const {
    return p_.A11.leading(t) - p_.A12.leading(t) * a22_lu(t).solve(p_.A21.leading(t));
  }

  Eigen::MatrixXd compute_Qcal(double t) const {
    const Eigen::MatrixXd Q11 = p_.Q11.leading(t), Q12 = p_.Q12.leading(t), Q21 = p_.Q21.leading(t),
                          Q22 = p_.Q22.leading(t);
    const Eigen::MatrixXd S = a22_lu(t).solve(p_.A21.leading(t));  // A22^{-1} A21
    Eigen::MatrixXd Qc = Q11 - Q12 * S - S.transpose() * Q21 + S.transpose() * Q22 * S;
    return 0.5 * (Qc + Qc.transpose());
  }

  SpocProblem p_;
  bool constant_ = false;
  Eigen::MatrixXd Acal0_, Qcal0_;
};

/// Builds the reduced problem; throws SingularA22 if A22^0 is singular at a sample time.
inline ReducedProblem reduce(const SpocProblem& p, int samples = 17) {
  p.check_dimensions();
  ReducedProblem rp(p);
  for (int i = 0; i < samples; ++i) (void)rp.a22_lu(p.T * i / (samples - 1));
  return rp;
}

/// Outer fast state and costate from the algebraic lines of the outer system.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> recover_fast_outer(const ReducedProblem& rp,
                                                                      const SpocProblem& p,
                                                                      const Eigen::VectorXd& x,
                                                                      const Eigen::VectorXd& chi1, double t) {
  const auto lu = rp.a22_lu(t);
  const Eigen::VectorXd z2o = -lu.solve(p.A21.leading(t) * x);
  const Eigen::MatrixXd A22T = p.A22.leading(t).transpose();
  const Eigen::VectorXd rhs = p.A12.leading(t).transpose() * chi1 + p.Q21.leading(t) * x + p.Q22.leading(t) * z2o;
  const Eigen::VectorXd chi2o = -Eigen::PartialPivLU<Eigen::MatrixXd>(A22T).solve(rhs);
  return {z2o, chi2o};
}

struct LayerConfig {
  double decay_lengths = 40.0;  ///< stretched horizon in units of 1/k
  int samples = 401;
};

struct LayerTerms {
  std::vector<double> tau;    ///< initial-layer grid, tau = t/eps
  std::vector<double> sigma;  ///< terminal-layer grid, sigma = (T - t)/eps
  Eigen::MatrixXd z2i;        ///< samples x n
  Eigen::MatrixXd chi2i;
  Eigen::MatrixXd chi2f;
  double rate_initial = 0.0;  ///< -max Re eig A22^0(0)
  double rate_final = 0.0;    ///< -max Re eig A22^0(T)
  double fitted_rate = std::numeric_limits<double>::quiet_NaN();  ///< log-linear fit of |z2i|
};

/// Solves Omega A + A' Omega + Q = 0 for Hurwitz A.
inline Eigen::MatrixXd lyapunov(const Eigen::MatrixXd& A, const Eigen::MatrixXd& Q) {
  const Eigen::Index n = A.rows();
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n * n, n * n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      K.block(i * n, j * n, n, n) += A(j, i) * I;  // A' kron I
      if (i == j) K.block(i * n, j * n, n, n) += A.transpose();
    }
  const Eigen::VectorXd q = Eigen::Map<const Eigen::VectorXd>(Q.data(), n * n);
  const Eigen::VectorXd w = K.fullPivLu().solve(-q);
  return Eigen::Map<const Eigen::MatrixXd>(w.data(), n, n);
}

inline double fit_decay_rate(const std::vector<double>& s, const Eigen::MatrixXd& v) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int cnt = 0;
  const double floor = 1e-250;
  for (size_t i = 0; i < s.size(); ++i) {
    const double nrm = v.row(static_cast<Eigen::Index>(i)).norm();
    if (!(nrm > floor)) continue;
    const double y = std::log(nrm);
    sx += s[i];
    sy += y;
    sxx += s[i] * s[i];
    sxy += s[i] * y;
    ++cnt;
  }
  if (cnt < 2) return std::numeric_limits<double>::quiet_NaN();
  return -(cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
}

/// Zeroth-order layer corrections from the outer solution channels "z2o" and "chi2o" at t = 0 and t = T.
///
/// The initial-layer costate is chosen on the decaying manifold chi2i = Omega z2i, where Omega solves the
/// Lyapunov equation of A22^0(0) with Q22^0(0). The terminal layer has no state part.
inline LayerTerms boundary_layers(const SpocProblem& p, const Trajectory& outer, const LayerConfig& cfg = {}) {
  const double T = p.T;
  const Eigen::MatrixXd A0 = p.A22.leading(0.0), AT = p.A22.leading(T);
  LayerTerms L;
  L.rate_initial = -detail::spectral_abscissa(A0);
  L.rate_final = -detail::spectral_abscissa(AT);
  if (!(L.rate_initial > 0.0) || !(L.rate_final > 0.0))
    throw Error(ErrorCode::UnstableLayer, "A22^0 is not stable at t=0 or t=T");

  const Eigen::VectorXd z2o0 = outer.node("z2o", 0);
  const Eigen::VectorXd z2oT = outer.node("z2o", outer.nodes() - 1);
  const Eigen::VectorXd chi2oT = outer.node("chi2o", outer.nodes() - 1);
  const Eigen::VectorXd zi0 = p.z0.tail(p.n) - z2o0;
  const Eigen::VectorXd cf0 = p.pi22.leading(0.0) * z2oT - chi2oT;
  const Eigen::MatrixXd Omega = lyapunov(A0, p.Q22.leading(0.0));

  const int S = cfg.samples;
  const double tau_max = cfg.decay_lengths / L.rate_initial;
  const double sigma_max = cfg.decay_lengths / L.rate_final;
  L.z2i.resize(S, p.n);
  L.chi2i.resize(S, p.n);
  L.chi2f.resize(S, p.n);
  const Eigen::MatrixXd step_i = (A0 * (tau_max / (S - 1))).exp();
  const Eigen::MatrixXd step_f = (AT.transpose() * (sigma_max / (S - 1))).exp();
  Eigen::VectorXd zi = zi0, cf = cf0;
  for (int s = 0; s < S; ++s) {
    L.tau.push_back(tau_max * s / (S - 1));
    L.sigma.push_back(sigma_max * s / (S - 1));
    L.z2i.row(s) = zi.transpose();
    L.chi2i.row(s) = (Omega * zi).transpose();
    L.chi2f.row(s) = cf.transpose();
    zi = step_i * zi;
    cf = step_f * cf;
  }
  L.fitted_rate = fit_decay_rate(L.tau, L.z2i);
  return L;
}

}  // namespace spoc
