#pragma once

// Approximate-commutator inverse of the Schur complement B A^{-1} B^T:
//   C~^{-1} v = (B B^T)^{-1} B A B^T (B B^T)^{-1} v.

#include <cmath>
#include <string>

#include <Eigen/SparseCholesky>

#include "mpreg/error.hpp"
#include "mpreg/grid.hpp"

namespace mpreg {

class SchurApproximation {
 public:
  /// Pivots of the B B^T factorization below this fraction of the largest one signal rank deficiency.
  static constexpr double kPivotTolerance = 1e-14;

  /// B is m x n, A is n x n. When the rows of B sum to zero (B^T 1 = 0, which happens for a
  /// spatially constant template), B B^T is singular along the constant vector; the
  /// approximation then acts on the mean-free subspace and maps constants to zero.
  SchurApproximation(const SparseOperator& B, const SparseOperator& A) : B_(B), A_(A) {
    if (A.rows() != A.cols() || B.cols() != A.rows()) throw DimensionMismatch("Schur operands");
    const Eigen::Index m = B.rows();
    Eigen::SparseMatrix<double> BBt = Eigen::SparseMatrix<double>(B * SparseOperator(B.transpose()));
    const double bnorm = B.norm();
    if (m > 1 && bnorm > 0.0) {
      const Vector col_sums = B.transpose() * Vector::Ones(m);
      deflated_ = col_sums.norm() <= 1e-10 * bnorm;
    }
    if (deflated_) {
      const double shift = 1e-10 * BBt.diagonal().cwiseAbs().maxCoeff();
      for (Eigen::Index k = 0; k < m; ++k) BBt.coeffRef(k, k) += shift;
    }
    ldlt_.compute(BBt);
    // An exactly zero pivot stops the factorization there; the scan below still finds it first.
    const Vector d = ldlt_.vectorD();
    const double dmax = d.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < d.size(); ++i) {
      if (!(d[i] > kPivotTolerance * dmax)) {
        const int original = ldlt_.permutationPinv().indices()[i];
        throw RankDeficiency("B B^T is singular or nearly singular at constraint row " + std::to_string(original),
                             original);
      }
    }
    if (ldlt_.info() != Eigen::Success) throw RankDeficiency("factorization of B B^T failed", -1);
  }

  Eigen::Index size() const { return B_.rows(); }
  bool deflated() const { return deflated_; }

  /// Applies (B B^T)^{-1} (on the mean-free subspace when deflated).
  Vector solve_normal(const Vector& v) const {
    if (!deflated_) return ldlt_.solve(v);
    Vector w = ldlt_.solve(remove_mean(v));
    return remove_mean(w);
  }

  Vector apply(const Vector& v) const {
    if (v.size() != size()) throw DimensionMismatch("Schur apply size");
    const Vector w = solve_normal(v);
    const Vector t = B_ * (A_ * (B_.transpose() * w));
    return solve_normal(t);
  }

 private:
  static Vector remove_mean(const Vector& v) { return (v.array() - v.mean()).matrix(); }

  SparseOperator B_;
  SparseOperator A_;
  bool deflated_ = false;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
};

}  // namespace mpreg
