#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"

namespace spoc {

/// Index of the interval [t[i], t[i+1]] containing x (clamped to the ends).
inline size_t locate(const std::vector<double>& t, double x) {
  if (t.size() < 2 || x <= t.front()) return 0;
  if (x >= t.back()) return t.size() - 2;
  auto it = std::upper_bound(t.begin(), t.end(), x);
  return static_cast<size_t>(it - t.begin()) - 1;
}

/// Nodal samples on a strictly increasing mesh, interpolated piecewise-linearly.
struct Channel {
  std::vector<double> t;
  Eigen::MatrixXd v;  ///< one row per node

  int dim() const { return static_cast<int>(v.cols()); }
  size_t nodes() const { return t.size(); }

  Eigen::VectorXd at(double x) const {
    if (t.size() == 1) return v.row(0).transpose();
    const size_t i = locate(t, x);
    const double h = t[i + 1] - t[i];
    const double s = std::clamp((x - t[i]) / h, 0.0, 1.0);
    if (s == 0.0) return v.row(static_cast<Eigen::Index>(i)).transpose();
    if (s == 1.0) return v.row(static_cast<Eigen::Index>(i + 1)).transpose();
    return ((1.0 - s) * v.row(static_cast<Eigen::Index>(i)) + s * v.row(static_cast<Eigen::Index>(i + 1)))
        .transpose();
  }

  /// Samples this channel on another mesh.
  Channel resampled(const std::vector<double>& mesh) const {
    Channel out{mesh, Eigen::MatrixXd(static_cast<Eigen::Index>(mesh.size()), v.cols())};
    for (size_t i = 0; i < mesh.size(); ++i) out.v.row(static_cast<Eigen::Index>(i)) = at(mesh[i]).transpose();
    return out;
  }
};

/// Mesh plus named channels sharing it.
struct Trajectory {
  std::vector<double> t;
  std::vector<std::pair<std::string, Eigen::MatrixXd>> channels;

  size_t nodes() const { return t.size(); }

  bool has(const std::string& name) const {
    for (const auto& c : channels)
      if (c.first == name) return true;
    return false;
  }

  void set(const std::string& name, Eigen::MatrixXd values) {
    if (values.rows() != static_cast<Eigen::Index>(t.size()))
      throw Error(ErrorCode::MeshMismatch, "channel '" + name + "' has " + std::to_string(values.rows()) +
                                               " samples for " + std::to_string(t.size()) + " nodes");
    for (auto& c : channels)
      if (c.first == name) {
        c.second = std::move(values);
        return;
      }
    channels.emplace_back(name, std::move(values));
  }

  const Eigen::MatrixXd& get(const std::string& name) const {
    for (const auto& c : channels)
      if (c.first == name) return c.second;
    throw Error(ErrorCode::MeshMismatch, "no channel '" + name + "'");
  }

  Channel channel(const std::string& name) const { return Channel{t, get(name)}; }

  Eigen::VectorXd at(const std::string& name, double x) const { return channel(name).at(x); }

  Eigen::VectorXd node(const std::string& name, size_t i) const {
    return get(name).row(static_cast<Eigen::Index>(i)).transpose();
  }

  /// Throws MeshMismatch unless the mesh is strictly increasing and every channel has one row per node.
  void check() const {
    for (size_t i = 1; i < t.size(); ++i)
      if (!(t[i] > t[i - 1])) throw Error(ErrorCode::MeshMismatch, "mesh not strictly increasing");
    for (const auto& c : channels)
      if (c.second.rows() != static_cast<Eigen::Index>(t.size()))
        throw Error(ErrorCode::MeshMismatch, "channel '" + c.first + "' sample count differs from mesh");
  }
};

}  // namespace spoc
