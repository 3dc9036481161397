#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "error.hpp"

namespace spoc {

struct GradingConfig {
  double c = 10.0;     ///< layer width multiplier
  double f = 0.3;      ///< fraction of intervals in each layer
  double rate = 1.0;   ///< decay rate of the fast block; the layer width scales with 1/rate
  bool enabled = true;
};

struct Mesh {
  enum class Kind { Uniform, Graded };
  std::vector<double> t;
  Kind kind = Kind::Uniform;
  double w = 0.0;            ///< layer width (graded only)
  int layer_intervals = 0;   ///< intervals inside each layer (graded only)

  int intervals() const { return static_cast<int>(t.size()) - 1; }
};

inline Mesh uniform_mesh(double T, int N) {
  Mesh m;
  m.t.resize(static_cast<size_t>(N) + 1);
  for (int i = 0; i <= N; ++i) m.t[static_cast<size_t>(i)] = T * i / N;
  m.t.back() = T;
  return m;
}

/// N intervals on [0, T]; two-sided Shishkin-type grading when eps < T/100.
inline Mesh build_mesh(double T, double eps, int N, const GradingConfig& g = {}) {
  if (N < 16) throw Error(ErrorCode::InvalidArgument, "build_mesh needs N >= 16");
  if (!(T > 0.0) || !(eps > 0.0)) throw Error(ErrorCode::InvalidArgument, "build_mesh needs T > 0, eps > 0");
  if (!g.enabled || !(eps < T / 100.0) || eps >= 1.0) return uniform_mesh(T, N);

  const double w = std::min(T / 4.0, g.c * eps * std::log(1.0 / eps) / g.rate);
  const int nl = static_cast<int>(std::ceil(g.f * N - 1e-9));
  const int nm = N - 2 * nl;
  if (nm < 1 || !(w > 0.0)) return uniform_mesh(T, N);

  Mesh m;
  m.kind = Mesh::Kind::Graded;
  m.w = w;
  m.layer_intervals = nl;
  m.t.reserve(static_cast<size_t>(N) + 1);
  for (int i = 0; i <= nl; ++i) m.t.push_back(w * i / nl);
  for (int i = 1; i < nm; ++i) m.t.push_back(w + (T - 2.0 * w) * i / nm);
  for (int i = nl; i >= 0; --i) m.t.push_back(T - w * i / nl);
  m.t.front() = 0.0;
  m.t.back() = T;
  return m;
}

/// Sorted union of two meshes; nodes closer than a relative 1e-12 of the span are merged.
inline std::vector<double> merge_meshes(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> all(a);
  all.insert(all.end(), b.begin(), b.end());
  std::sort(all.begin(), all.end());
  if (all.empty()) return all;
  const double tol = 1e-12 * std::max(1.0, std::abs(all.back() - all.front()));
  std::vector<double> out{all.front()};
  for (size_t i = 1; i < all.size(); ++i) {
    if (all[i] - out.back() > tol) {
      out.push_back(all[i]);
    } else if (i + 1 == all.size()) {
      out.back() = all[i];  // keep the exact right end
    }
  }
  return out;
}

/// Splits every interval into two.
inline std::vector<double> halve(const std::vector<double>& t) {
  std::vector<double> out;
  out.reserve(2 * t.size());
  for (size_t i = 0; i + 1 < t.size(); ++i) {
    out.push_back(t[i]);
    out.push_back(0.5 * (t[i] + t[i + 1]));
  }
  out.push_back(t.back());
  return out;
}

}  // namespace spoc
