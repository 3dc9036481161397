#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <vector>

#include "error.hpp"

namespace spoc {

/// Matrix whose entries are truncated double power series sum_{p<=Dt, q<=De} c[p][q] t^p eps^q.
class CoeffMatrix {
 public:
  CoeffMatrix() = default;

  CoeffMatrix(int rows, int cols, int Dt = 0, int De = 0)
      : rows_(rows), cols_(cols), Dt_(Dt), De_(De),
        data_(static_cast<size_t>((Dt + 1) * (De + 1)), Eigen::MatrixXd::Zero(rows, cols)) {
    if (rows < 0 || cols < 0 || Dt < 0 || De < 0)
      throw Error(ErrorCode::SingularData, "negative CoeffMatrix dimension or degree");
  }

  static CoeffMatrix constant(const Eigen::MatrixXd& m) {
    CoeffMatrix c(static_cast<int>(m.rows()), static_cast<int>(m.cols()));
    c.data_[0] = m;
    return c;
  }

  static CoeffMatrix zero(int rows, int cols) { return CoeffMatrix(rows, cols); }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int Dt() const { return Dt_; }
  int De() const { return De_; }

  Eigen::MatrixXd& coeff(int p, int q) { return data_.at(index(p, q)); }
  const Eigen::MatrixXd& coeff(int p, int q) const { return data_.at(index(p, q)); }

  /// Entrywise series value; eps = 0 gives the leading term in eps.
  Eigen::MatrixXd eval(double t, double eps) const {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(rows_, cols_);
    for (int p = Dt_; p >= 0; --p) {
      Eigen::MatrixXd inner = Eigen::MatrixXd::Zero(rows_, cols_);
      for (int q = De_; q >= 0; --q) inner = inner * eps + coeff(p, q);
      out = out * t + inner;
    }
    return out;
  }

  Eigen::MatrixXd leading(double t) const { return eval(t, 0.0); }

  bool time_invariant() const {
    for (int p = 1; p <= Dt_; ++p)
      for (int q = 0; q <= De_; ++q)
        if ((coeff(p, q).array() != 0.0).any()) return false;
    return true;
  }

  /// Same series padded with zero coefficients up to the given degrees.
  CoeffMatrix widened(int Dt, int De) const {
    CoeffMatrix out(rows_, cols_, std::max(Dt, Dt_), std::max(De, De_));
    for (int p = 0; p <= Dt_; ++p)
      for (int q = 0; q <= De_; ++q) out.coeff(p, q) = coeff(p, q);
    return out;
  }

  CoeffMatrix transpose() const {
    CoeffMatrix out(cols_, rows_, Dt_, De_);
    for (size_t i = 0; i < data_.size(); ++i) out.data_[i] = data_[i].transpose();
    return out;
  }

  friend CoeffMatrix operator+(const CoeffMatrix& a, const CoeffMatrix& b) {
    if (a.rows_ != b.rows_ || a.cols_ != b.cols_)
      throw Error(ErrorCode::DimensionMismatch, "CoeffMatrix sum of different shapes");
    CoeffMatrix out = a.widened(b.Dt_, b.De_);
    for (int p = 0; p <= b.Dt_; ++p)
      for (int q = 0; q <= b.De_; ++q) out.coeff(p, q) += b.coeff(p, q);
    return out;
  }

  friend CoeffMatrix operator*(double s, const CoeffMatrix& a) {
    CoeffMatrix out = a;
    for (auto& m : out.data_) m *= s;
    return out;
  }

  friend bool operator==(const CoeffMatrix& a, const CoeffMatrix& b) {
    if (a.rows_ != b.rows_ || a.cols_ != b.cols_ || a.Dt_ != b.Dt_ || a.De_ != b.De_) return false;
    for (size_t i = 0; i < a.data_.size(); ++i)
      if (a.data_[i] != b.data_[i]) return false;
    return true;
  }

 private:
  size_t index(int p, int q) const {
    if (p < 0 || p > Dt_ || q < 0 || q > De_)
      throw Error(ErrorCode::DimensionMismatch, "coefficient index out of range");
    return static_cast<size_t>(p * (De_ + 1) + q);
  }

  int rows_ = 0;
  int cols_ = 0;
  int Dt_ = 0;
  int De_ = 0;
  std::vector<Eigen::MatrixXd> data_{Eigen::MatrixXd()};
};

}  // namespace spoc
