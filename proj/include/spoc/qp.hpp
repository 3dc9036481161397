#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "error.hpp"

namespace spoc {

/// min 1/2 x'Hx + c'x + c0  s.t.  Ex = e,  lo <= x <= hi  (infinite bounds allowed).
struct SparseQp {
  Eigen::SparseMatrix<double> H;  ///< symmetric, both triangles stored
  Eigen::VectorXd c;
  double c0 = 0.0;
  Eigen::SparseMatrix<double> E;
  Eigen::VectorXd e;
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  Eigen::Index size() const { return c.size(); }

  double objective(const Eigen::VectorXd& x) const { return 0.5 * x.dot(H * x) + c.dot(x) + c0; }
};

enum class SolveStatus { Converged, MaxIter, Infeasible };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return "Converged";
    case SolveStatus::MaxIter: return "MaxIter";
    case SolveStatus::Infeasible: return "Infeasible";
  }
  return "Unknown";
}

struct QpOptions {
  double tol = 1e-8;
  int max_iter = 200;
  bool polish = true;
};

struct QpResult {
  SolveStatus status = SolveStatus::MaxIter;
  Eigen::VectorXd x, y, zl, zu;
  double objective = 0.0;
  double stationarity = 0.0;     ///< scaled infinity norm of the Lagrangian gradient
  double feasibility = 0.0;      ///< scaled infinity norm of Ex - e (and bound violation)
  double complementarity = 0.0;  ///< mean bound-slack times multiplier
  int iterations = 0;
  bool polished = false;
};

namespace detail {

struct QpResiduals {
  double stat = 0.0, feas = 0.0, comp = 0.0;
  bool within(double tol) const { return stat <= tol && feas <= tol && comp <= tol; }
};

inline QpResiduals qp_residuals(const SparseQp& qp, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                                const Eigen::VectorXd& zl, const Eigen::VectorXd& zu) {
  const Eigen::VectorXd Hx = qp.H * x;
  const Eigen::VectorXd Ety = qp.E.transpose() * y;
  const Eigen::VectorXd rd = Hx + qp.c + Ety - zl + zu;
  const double dscale = 1.0 + std::max({Hx.lpNorm<Eigen::Infinity>(), qp.c.lpNorm<Eigen::Infinity>(),
                                        Ety.lpNorm<Eigen::Infinity>()});
  const Eigen::VectorXd Ex = qp.E * x;
  double viol = 0.0;
  double comp = 0.0;
  int nb = 0;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    if (std::isfinite(qp.lo(j))) {
      viol = std::max(viol, qp.lo(j) - x(j));
      comp += std::abs((x(j) - qp.lo(j)) * zl(j));
      viol = std::max(viol, -zl(j));
      ++nb;
    }
    if (std::isfinite(qp.hi(j))) {
      viol = std::max(viol, x(j) - qp.hi(j));
      comp += std::abs((qp.hi(j) - x(j)) * zu(j));
      viol = std::max(viol, -zu(j));
      ++nb;
    }
  }
  const double pscale = 1.0 + std::max(Ex.lpNorm<Eigen::Infinity>(), qp.e.lpNorm<Eigen::Infinity>());
  QpResiduals r;
  r.stat = rd.lpNorm<Eigen::Infinity>() / dscale;
  r.feas = std::max((Ex - qp.e).lpNorm<Eigen::Infinity>() / pscale, viol);
  r.comp = nb ? comp / nb : 0.0;
  return r;
}

inline void fill_result(const SparseQp& qp, QpResult& r) {
  const QpResiduals res = qp_residuals(qp, r.x, r.y, r.zl, r.zu);
  r.stationarity = res.stat;
  r.feasibility = res.feas;
  r.complementarity = res.comp;
  r.objective = qp.objective(r.x);
}

/// Builds [H + diag(D), E'; E, -reg I] in compressed form.
inline Eigen::SparseMatrix<double> kkt_matrix(const SparseQp& qp, const Eigen::VectorXd& D, double reg) {
  const Eigen::Index n = qp.size(), m = qp.e.size();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<size_t>(qp.H.nonZeros() + 2 * qp.E.nonZeros() + n + m));
  for (int k = 0; k < qp.H.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(qp.H, k); it; ++it)
      trip.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
  for (Eigen::Index j = 0; j < n; ++j) trip.emplace_back(static_cast<int>(j), static_cast<int>(j), D(j));
  for (int k = 0; k < qp.E.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(qp.E, k); it; ++it) {
      trip.emplace_back(static_cast<int>(n + it.row()), static_cast<int>(it.col()), it.value());
      trip.emplace_back(static_cast<int>(it.col()), static_cast<int>(n + it.row()), it.value());
    }
  for (Eigen::Index i = 0; i < m; ++i)
    trip.emplace_back(static_cast<int>(n + i), static_cast<int>(n + i), -reg);
  Eigen::SparseMatrix<double> K(n + m, n + m);
  K.setFromTriplets(trip.begin(), trip.end());
  K.makeCompressed();
  return K;
}

/// Solves K s = r with a couple of refinement sweeps against the unregularized matrix.
template <class Solver>
Eigen::VectorXd refined_solve(Solver& lu, const Eigen::SparseMatrix<double>& K, const Eigen::VectorXd& r) {
  Eigen::VectorXd s = lu.solve(r);
  for (int it = 0; it < 2; ++it) {
    const Eigen::VectorXd res = r - K * s;
    if (res.lpNorm<Eigen::Infinity>() <= 1e-15 * (1.0 + r.lpNorm<Eigen::Infinity>())) break;
    s += lu.solve(res);
  }
  return s;
}

/// Equality-constrained KKT solve with the variables in `side` held at a bound (-1 lower, +1 upper, 0 free,
/// 2 for lo == hi). Multipliers of the held bounds land in zl/zu with their raw sign.
inline bool solve_on_active_set(const SparseQp& qp, const std::vector<int>& side, QpResult& p) {
  const Eigen::Index n = qp.size(), m = qp.e.size();
  std::vector<Eigen::Index> fixed;
  for (Eigen::Index j = 0; j < n; ++j)
    if (side[static_cast<size_t>(j)] != 0) fixed.push_back(j);
  const Eigen::Index f = static_cast<Eigen::Index>(fixed.size());
  SparseQp aug = qp;
  std::vector<Eigen::Triplet<double>> trip;
  for (int k = 0; k < qp.E.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(qp.E, k); it; ++it)
      trip.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
  aug.e.resize(m + f);
  aug.e.head(m) = qp.e;
  for (Eigen::Index i = 0; i < f; ++i) {
    const Eigen::Index j = fixed[static_cast<size_t>(i)];
    trip.emplace_back(static_cast<int>(m + i), static_cast<int>(j), 1.0);
    aug.e(m + i) = side[static_cast<size_t>(j)] == 1 ? qp.hi(j) : qp.lo(j);
  }
  aug.E.resize(m + f, n);
  aug.E.setFromTriplets(trip.begin(), trip.end());
  const Eigen::SparseMatrix<double> K = kkt_matrix(aug, Eigen::VectorXd::Zero(n), 0.0);
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(K);
  if (lu.info() != Eigen::Success) return false;
  Eigen::VectorXd rhs(n + m + f);
  rhs.head(n) = -qp.c;
  rhs.tail(m + f) = aug.e;
  const Eigen::VectorXd s = refined_solve(lu, K, rhs);
  if (!s.allFinite()) return false;
  p.x = s.head(n);
  p.y = s.segment(n, m);
  p.zl.setZero();
  p.zu.setZero();
  for (Eigen::Index i = 0; i < f; ++i) {
    const Eigen::Index j = fixed[static_cast<size_t>(i)];
    const double lam = s(n + m + i);
    const int sd = side[static_cast<size_t>(j)];
    if (sd == -1) p.zl(j) = -lam;
    else if (sd == 1) p.zu(j) = lam;
    else if (lam < 0) p.zl(j) = -lam;
    else p.zu(j) = lam;
  }
  return true;
}

/// Clips round-off bound violations and sign errors; false if any exceeds the tolerances.
inline bool clean_up(const SparseQp& qp, const QpResult& ipm, QpResult& p, double tol) {
  const double btol = 1e-9;
  const double ztol = tol * (1.0 + ipm.zl.lpNorm<Eigen::Infinity>() + ipm.zu.lpNorm<Eigen::Infinity>());
  for (Eigen::Index j = 0; j < qp.size(); ++j) {
    const double scale = 1.0 + std::abs(qp.lo(j)) * std::isfinite(qp.lo(j)) + std::abs(qp.hi(j)) * std::isfinite(qp.hi(j));
    if (std::isfinite(qp.lo(j)) && p.x(j) < qp.lo(j)) {
      if (qp.lo(j) - p.x(j) > btol * scale) return false;
      p.x(j) = qp.lo(j);
    }
    if (std::isfinite(qp.hi(j)) && p.x(j) > qp.hi(j)) {
      if (p.x(j) - qp.hi(j) > btol * scale) return false;
      p.x(j) = qp.hi(j);
    }
    if (p.zl(j) < 0.0 || p.zu(j) < 0.0) {
      if (std::max(-p.zl(j), -p.zu(j)) > ztol) return false;
      p.zl(j) = std::max(p.zl(j), 0.0);
      p.zu(j) = std::max(p.zu(j), 0.0);
    }
  }
  fill_result(qp, p);
  return p.stationarity <= tol && p.feasibility <= tol;
}

/// Active-set polish: starting from the set the interior point suggests, re-solve the KKT system, release
/// bounds whose multipliers have the wrong sign and hold free variables that left the box, until the set
/// settles. Bound multipliers in thin layers are scaled by tiny quadrature weights, so even a small sign error
/// matters once divided back out; the loop removes it instead of tolerating it.
inline bool polish(const SparseQp& qp, QpResult& r, double tol, int max_rounds = 25) {
  const Eigen::Index n = qp.size();
  std::vector<int> side(static_cast<size_t>(n), 0);
  for (Eigen::Index j = 0; j < n; ++j) {
    const bool hasl = std::isfinite(qp.lo(j)), hasu = std::isfinite(qp.hi(j));
    if (hasl && hasu && qp.lo(j) == qp.hi(j)) side[static_cast<size_t>(j)] = 2;
    else if (hasl && r.zl(j) > r.x(j) - qp.lo(j)) side[static_cast<size_t>(j)] = -1;
    else if (hasu && r.zu(j) > qp.hi(j) - r.x(j)) side[static_cast<size_t>(j)] = 1;
  }
  std::optional<QpResult> first;
  for (int round = 0; round < max_rounds; ++round) {
    QpResult p = r;
    if (!solve_on_active_set(qp, side, p)) break;
    bool changed = false;
    const double zround = 1e-14 * (1.0 + std::max(p.zl.lpNorm<Eigen::Infinity>(), p.zu.lpNorm<Eigen::Infinity>()));
    for (Eigen::Index j = 0; j < n; ++j) {
      int& sd = side[static_cast<size_t>(j)];
      const double scale = 1e-14 * (1.0 + std::abs(p.x(j)));
      if (sd == 0) {
        if (std::isfinite(qp.lo(j)) && p.x(j) < qp.lo(j) - scale) sd = -1, changed = true;
        else if (std::isfinite(qp.hi(j)) && p.x(j) > qp.hi(j) + scale) sd = 1, changed = true;
      } else if ((sd == -1 && p.zl(j) < -zround) || (sd == 1 && p.zu(j) < -zround)) {
        sd = 0;
        changed = true;
      }
    }
    QpResult cleaned = p;
    const bool ok = clean_up(qp, r, cleaned, tol);
    if (round == 0 && ok) first = cleaned;
    if (!changed && ok) {
      cleaned.polished = true;
      r = cleaned;
      return true;
    }
  }
  if (!first) return false;
  first->polished = true;
  r = *first;
  return true;
}

}  // namespace detail

/// Primal-dual interior point (Mehrotra predictor-corrector) followed by an active-set polish.
///
/// A warm start that already meets the tolerances returns immediately with zero iterations.
inline QpResult solve_qp(const SparseQp& qp, const QpOptions& opt = {}, const QpResult* warm = nullptr) {
  const Eigen::Index n = qp.size(), m = qp.e.size();
  for (Eigen::Index j = 0; j < n; ++j)
    if (qp.lo(j) > qp.hi(j)) {
      QpResult bad;
      bad.status = SolveStatus::Infeasible;
      bad.x = Eigen::VectorXd::Zero(n);
      bad.y = Eigen::VectorXd::Zero(m);
      bad.zl = bad.zu = Eigen::VectorXd::Zero(n);
      return bad;
    }

  if (warm && warm->x.size() == n && warm->y.size() == m) {
    QpResult w = *warm;
    w.iterations = 0;
    detail::fill_result(qp, w);
    if (w.stationarity <= opt.tol && w.feasibility <= opt.tol && w.complementarity <= opt.tol) {
      w.status = SolveStatus::Converged;
      return w;
    }
  }

  // Variables with lo == hi become equality rows; the IPM needs a nonempty interior.
  SparseQp work = qp;
  {
    std::vector<Eigen::Triplet<double>> trip;
    for (int k = 0; k < qp.E.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(qp.E, k); it; ++it)
        trip.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    std::vector<double> extra;
    for (Eigen::Index j = 0; j < n; ++j)
      if (qp.lo(j) == qp.hi(j)) {
        trip.emplace_back(static_cast<int>(m + static_cast<Eigen::Index>(extra.size())), static_cast<int>(j), 1.0);
        extra.push_back(qp.lo(j));
        work.lo(j) = -std::numeric_limits<double>::infinity();
        work.hi(j) = std::numeric_limits<double>::infinity();
      }
    if (!extra.empty()) {
      work.E.resize(m + static_cast<Eigen::Index>(extra.size()), n);
      work.E.setFromTriplets(trip.begin(), trip.end());
      work.e.resize(m + static_cast<Eigen::Index>(extra.size()));
      work.e.head(m) = qp.e;
      for (size_t i = 0; i < extra.size(); ++i) work.e(m + static_cast<Eigen::Index>(i)) = extra[i];
    }
  }
  const Eigen::Index mw = work.e.size();

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n), y = Eigen::VectorXd::Zero(mw);
  Eigen::VectorXd zl = Eigen::VectorXd::Zero(n), zu = Eigen::VectorXd::Zero(n);
  std::vector<char> hasl(static_cast<size_t>(n)), hasu(static_cast<size_t>(n));
  int nb = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    hasl[static_cast<size_t>(j)] = std::isfinite(work.lo(j));
    hasu[static_cast<size_t>(j)] = std::isfinite(work.hi(j));
    const bool l = hasl[static_cast<size_t>(j)], u = hasu[static_cast<size_t>(j)];
    if (l && u) x(j) = 0.5 * (work.lo(j) + work.hi(j));
    else if (l) x(j) = work.lo(j) + 1.0;
    else if (u) x(j) = work.hi(j) - 1.0;
    if (l) { zl(j) = 1.0; ++nb; }
    if (u) { zu(j) = 1.0; ++nb; }
  }

  QpResult r;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  bool analyzed = false;
  auto slack_l = [&](Eigen::Index j) { return x(j) - work.lo(j); };
  auto slack_u = [&](Eigen::Index j) { return work.hi(j) - x(j); };

  int iter = 0;
  for (; iter < opt.max_iter; ++iter) {
    const detail::QpResiduals res = detail::qp_residuals(work, x, y, zl, zu);
    if (res.within(opt.tol)) break;
    const Eigen::VectorXd rd = work.H * x + work.c + work.E.transpose() * y - zl + zu;
    const Eigen::VectorXd rp = work.E * x - work.e;
    double mu = 0.0;
    Eigen::VectorXd D = Eigen::VectorXd::Zero(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      if (hasl[static_cast<size_t>(j)]) { D(j) += zl(j) / slack_l(j); mu += slack_l(j) * zl(j); }
      if (hasu[static_cast<size_t>(j)]) { D(j) += zu(j) / slack_u(j); mu += slack_u(j) * zu(j); }
    }
    mu = nb ? mu / nb : 0.0;
    const Eigen::SparseMatrix<double> K = detail::kkt_matrix(work, D, 0.0);
    if (!analyzed) {
      lu.analyzePattern(K);
      analyzed = true;
    }
    lu.factorize(K);
    if (lu.info() != Eigen::Success) break;

    auto direction = [&](double target, const Eigen::VectorXd* dxa, const Eigen::VectorXd* dzla,
                         const Eigen::VectorXd* dzua, Eigen::VectorXd& dx, Eigen::VectorXd& dy,
                         Eigen::VectorXd& dzl, Eigen::VectorXd& dzu) {
      Eigen::VectorXd rhs(n + mw);
      rhs.head(n) = -rd;
      rhs.tail(mw) = -rp;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (hasl[static_cast<size_t>(j)]) {
          const double corr = dxa ? (*dxa)(j) * (*dzla)(j) : 0.0;
          rhs(j) += (target - corr) / slack_l(j) - zl(j);
        }
        if (hasu[static_cast<size_t>(j)]) {
          const double corr = dxa ? (*dxa)(j) * (*dzua)(j) : 0.0;
          rhs(j) -= (target + corr) / slack_u(j) - zu(j);
        }
      }
      const Eigen::VectorXd s = detail::refined_solve(lu, K, rhs);
      dx = s.head(n);
      dy = s.tail(mw);
      dzl = Eigen::VectorXd::Zero(n);
      dzu = Eigen::VectorXd::Zero(n);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (hasl[static_cast<size_t>(j)]) {
          const double corr = dxa ? (*dxa)(j) * (*dzla)(j) : 0.0;
          dzl(j) = (target - corr - slack_l(j) * zl(j) - zl(j) * dx(j)) / slack_l(j);
        }
        if (hasu[static_cast<size_t>(j)]) {
          const double corr = dxa ? (*dxa)(j) * (*dzua)(j) : 0.0;
          dzu(j) = (target + corr - slack_u(j) * zu(j) + zu(j) * dx(j)) / slack_u(j);
        }
      }
    };
    auto step_lengths = [&](const Eigen::VectorXd& dx, const Eigen::VectorXd& dzl, const Eigen::VectorXd& dzu,
                            double frac, double& ap, double& ad) {
      ap = 1.0;
      ad = 1.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (hasl[static_cast<size_t>(j)]) {
          if (dx(j) < 0) ap = std::min(ap, -frac * slack_l(j) / dx(j));
          if (dzl(j) < 0) ad = std::min(ad, -frac * zl(j) / dzl(j));
        }
        if (hasu[static_cast<size_t>(j)]) {
          if (dx(j) > 0) ap = std::min(ap, frac * slack_u(j) / dx(j));
          if (dzu(j) < 0) ad = std::min(ad, -frac * zu(j) / dzu(j));
        }
      }
    };

    Eigen::VectorXd dxa, dya, dzla, dzua;
    direction(0.0, nullptr, nullptr, nullptr, dxa, dya, dzla, dzua);
    double apa, ada;
    step_lengths(dxa, dzla, dzua, 1.0, apa, ada);
    double sigma = 0.0;
    if (nb) {
      double mua = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (hasl[static_cast<size_t>(j)]) mua += (slack_l(j) + apa * dxa(j)) * (zl(j) + ada * dzla(j));
        if (hasu[static_cast<size_t>(j)]) mua += (slack_u(j) - apa * dxa(j)) * (zu(j) + ada * dzua(j));
      }
      mua /= nb;
      sigma = std::pow(std::max(mua, 0.0) / std::max(mu, 1e-300), 3);
      sigma = std::min(sigma, 1.0);
    }
    Eigen::VectorXd dx, dy, dzl, dzu;
    direction(sigma * mu, &dxa, &dzla, &dzua, dx, dy, dzl, dzu);
    double ap, ad;
    step_lengths(dx, dzl, dzu, 0.995, ap, ad);
    x += ap * dx;
    y += ad * dy;
    zl += ad * dzl;
    zu += ad * dzu;
  }

  r.x = x;
  r.y = y.head(m);
  // multipliers of fixed variables fold back into the bound multipliers
  r.zl = zl;
  r.zu = zu;
  for (Eigen::Index i = m; i < mw; ++i) {
    // row i is x_j = lo_j for one j
    for (int k = 0; k < work.E.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(work.E, k); it; ++it)
        if (it.row() == i) {
          const double lam = y(i);
          if (lam < 0) r.zl(it.col()) += -lam; else r.zu(it.col()) += lam;
        }
  }
  r.iterations = iter;
  detail::fill_result(qp, r);
  r.status = (r.stationarity <= opt.tol && r.feasibility <= opt.tol && r.complementarity <= opt.tol)
                 ? SolveStatus::Converged
                 : SolveStatus::MaxIter;
  if (opt.polish) {
    QpResult p = r;
    if (detail::polish(qp, p, opt.tol)) {
      p.status = SolveStatus::Converged;
      r = p;
    }
  }
  return r;
}

}  // namespace spoc
