#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "problem.hpp"

namespace spoc {

struct GenConfig {
  int m = 4, n = 6, k = 3;
  double T = 0.5;
  std::uint64_t seed = 0;
  int count = 1;
  double scale = 1.0;        ///< magnitude of the uniform entries
  double delta = 0.5;        ///< definiteness margin
  double width_lo = 0.5, width_hi = 2.0;  ///< control box widths
  double alpha_lo = -1.0, alpha_hi = 0.5;
  double cond_cap = 1e3;     ///< largest accepted condition number of A22
  int max_retries = 100;
  double eps_star = 1.0;

  void check() const {
    if (m < 1 || n < 1 || k < 1) throw Error(ErrorCode::InvalidArgument, "generator dimensions must be >= 1");
    if (!(delta > 0.0)) throw Error(ErrorCode::InvalidArgument, "generator delta must be positive");
    if (count < 0) throw Error(ErrorCode::InvalidArgument, "generator count must be >= 0");
    if (!(T > 0.0)) throw Error(ErrorCode::InvalidArgument, "generator T must be positive");
    if (!(width_lo > 0.0) || width_hi < width_lo) throw Error(ErrorCode::InvalidArgument, "bad box width range");
  }
};

namespace detail {

/// Index-keyed substream: problem i only depends on (seed, i).
class GenStream {
 public:
  GenStream(std::uint64_t seed, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    rng_.seed(seq);
  }

  /// Uniform in [0, 1) from the top 53 bits; avoids implementation-defined distributions.
  double unit() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * unit(); }

  Eigen::MatrixXd matrix(int r, int c, double s) {
    Eigen::MatrixXd M(r, c);
    for (int j = 0; j < c; ++j)
      for (int i = 0; i < r; ++i) M(i, j) = uniform(-s, s);
    return M;
  }

  Eigen::MatrixXd spd(int n, double s, double delta) {
    const Eigen::MatrixXd M = matrix(n, n, s);
    Eigen::MatrixXd out = M * M.transpose();
    out = (0.5 * (out + out.transpose())).eval();  // GEMM is not bitwise symmetric
    out.diagonal().array() += delta;
    return out;
  }

 private:
  std::mt19937_64 rng_;
};

inline double condition_number(const Eigen::MatrixXd& M) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
  const auto& s = svd.singularValues();
  return s(s.size() - 1) > 0.0 ? s(0) / s(s.size() - 1) : std::numeric_limits<double>::infinity();
}

}  // namespace detail

/// Problem number `index` of the configured family.
inline SpocProblem generate_one(const GenConfig& cfg, std::uint64_t index) {
  cfg.check();
  detail::GenStream g(cfg.seed, index);
  const int m = cfg.m, n = cfg.n, d = m + n, k = cfg.k;
  const double s = cfg.scale;
  Eigen::MatrixXd A = g.matrix(d, d, s);
  Eigen::MatrixXd A22;
  for (int attempt = 0;; ++attempt) {
    Eigen::MatrixXd S = g.matrix(n, n, s);
    A22 = -g.spd(n, s, cfg.delta) + 0.5 * (S - S.transpose());
    if (detail::condition_number(A22) <= cfg.cond_cap) break;
    if (attempt + 1 >= cfg.max_retries)
      throw Error(ErrorCode::SingularA22, "no A22 under the condition cap after " + std::to_string(cfg.max_retries) + " draws");
  }
  A.bottomRightCorner(n, n) = A22;
  const Eigen::MatrixXd b = g.matrix(d, k, s);
  const Eigen::MatrixXd Q = g.spd(d, s, cfg.delta);
  Eigen::VectorXd R(k);
  for (int j = 0; j < k; ++j) R(j) = g.uniform(cfg.delta, 1.0 + cfg.delta);
  const Eigen::MatrixXd pi11 = g.spd(m, s, cfg.delta);
  const Eigen::MatrixXd pi22 = g.spd(n, s, cfg.delta);
  Eigen::VectorXd alpha(k), beta(k);
  for (int j = 0; j < k; ++j) {
    alpha(j) = g.uniform(cfg.alpha_lo, cfg.alpha_hi);
    beta(j) = alpha(j) + g.uniform(cfg.width_lo, cfg.width_hi);
  }
  Eigen::VectorXd z0(d);
  for (int i = 0; i < d; ++i) z0(i) = g.uniform(-1.0, 1.0);
  return constant_problem(m, n, A, b, Q, R, pi11, pi22, alpha, beta, z0, cfg.T, cfg.eps_star);
}

inline std::vector<SpocProblem> generate(const GenConfig& cfg) {
  std::vector<SpocProblem> out;
  out.reserve(static_cast<size_t>(cfg.count));
  for (int i = 0; i < cfg.count; ++i) out.push_back(generate_one(cfg, static_cast<std::uint64_t>(i)));
  return out;
}

inline std::string generated_name(const std::string& prefix, int index) {
  return prefix + "_" + std::to_string(index) + ".json";
}

}  // namespace spoc
