#pragma once

#include <Eigen/Dense>
#include <vector>

#include "error.hpp"

namespace spoc {

/// Symmetric positive definite block-tridiagonal matrix: diagonal blocks D[j] and couplings B[j] = (j, j+1).
struct BlockTridiag {
  std::vector<Eigen::MatrixXd> D;
  std::vector<Eigen::MatrixXd> B;

  void resize(size_t blocks, Eigen::Index bs) {
    D.assign(blocks, Eigen::MatrixXd::Zero(bs, bs));
    B.assign(blocks ? blocks - 1 : 0, Eigen::MatrixXd::Zero(bs, bs));
  }

  Eigen::VectorXd multiply(const Eigen::VectorXd& x) const {
    const Eigen::Index bs = D.front().rows();
    Eigen::VectorXd y = Eigen::VectorXd::Zero(x.size());
    for (size_t j = 0; j < D.size(); ++j) {
      const Eigen::Index o = static_cast<Eigen::Index>(j) * bs;
      y.segment(o, bs) += D[j] * x.segment(o, bs);
      if (j + 1 < D.size()) {
        y.segment(o, bs) += B[j] * x.segment(o + bs, bs);
        y.segment(o + bs, bs) += B[j].transpose() * x.segment(o, bs);
      }
    }
    return y;
  }
};

/// Block Cholesky (block Thomas) factorization.
class BlockTridiagSolver {
 public:
  /// Returns false if a pivot block is not positive definite.
  bool factor(const BlockTridiag& A) {
    const size_t nb = A.D.size();
    llt_.clear();
    llt_.reserve(nb);
    C_.assign(nb ? nb - 1 : 0, Eigen::MatrixXd());
    B_ = A.B;
    for (size_t j = 0; j < nb; ++j) {
      Eigen::MatrixXd S = A.D[j];
      if (j > 0) S.noalias() -= A.B[j - 1].transpose() * C_[j - 1];
      llt_.emplace_back(S);
      if (llt_.back().info() != Eigen::Success) return false;
      if (j + 1 < nb) C_[j] = llt_.back().solve(A.B[j]);  // S_j^{-1} B_j
    }
    return true;
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& r) const {
    const size_t nb = llt_.size();
    const Eigen::Index bs = llt_.front().rows();
    Eigen::VectorXd y = r;
    for (size_t j = 1; j < nb; ++j) {
      const Eigen::Index o = static_cast<Eigen::Index>(j) * bs;
      y.segment(o, bs).noalias() -= C_[j - 1].transpose() * y.segment(o - bs, bs);
    }
    Eigen::VectorXd x(r.size());
    for (size_t jj = nb; jj-- > 0;) {
      const Eigen::Index o = static_cast<Eigen::Index>(jj) * bs;
      Eigen::VectorXd rhs = y.segment(o, bs);
      if (jj + 1 < nb) rhs.noalias() -= B_[jj] * x.segment(o + bs, bs);
      x.segment(o, bs) = llt_[jj].solve(rhs);
    }
    return x;
  }

 private:
  std::vector<Eigen::LLT<Eigen::MatrixXd>> llt_;
  std::vector<Eigen::MatrixXd> C_;
  std::vector<Eigen::MatrixXd> B_;
};

}  // namespace spoc
