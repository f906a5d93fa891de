#pragma once

// KKT saddle-point system [W B^T; B 0] and its block-triangular preconditioner
//   P = [A 0; B -C],  P^{-1} v = ( A~^{-1} v_u ,  C~^{-1} (B A~^{-1} v_u - v_p) ).

#include <atomic>
#include <cstdint>
#include <algorithm>
#include <cmath>
#include <memory>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include "mpreg/error.hpp"
#include "mpreg/grid.hpp"
#include "mpreg/krylov.hpp"
#include "mpreg/multigrid.hpp"
#include "mpreg/schur.hpp"

namespace mpreg {

class KKTSystem {
 public:
  /// W: n x n, B: m x n, rhs: n + m.
  KKTSystem(SparseOperator W, SparseOperator B, Vector rhs)
      : W_(std::move(W)), B_(std::move(B)), Bt_(B_.transpose()), rhs_(std::move(rhs)), id_(next_id()) {
    if (W_.rows() != W_.cols()) throw DimensionMismatch("KKT: W must be square");
    if (B_.cols() != W_.rows()) throw DimensionMismatch("KKT: B columns must match W");
    if (rhs_.size() != W_.rows() + B_.rows()) throw DimensionMismatch("KKT: right-hand side length");
  }

  Eigen::Index n() const { return W_.rows(); }
  Eigen::Index m() const { return B_.rows(); }
  Eigen::Index size() const { return n() + m(); }
  const SparseOperator& W() const { return W_; }
  const SparseOperator& B() const { return B_; }
  const Vector& rhs() const { return rhs_; }
  std::uint64_t id() const { return id_; }

  void apply(const Vector& x, Vector& y) const {
    if (x.size() != size()) throw DimensionMismatch("KKT apply size");
    y.resize(size());
    y.head(n()) = W_ * x.head(n()) + Bt_ * x.tail(m());
    y.tail(m()) = B_ * x.head(n());
  }

  Vector residual(const Vector& x) const {
    Vector y;
    apply(x, y);
    return rhs_ - y;
  }

  LinearMap as_map() const {
    return [this](const Vector& x, Vector& y) { apply(x, y); };
  }

 private:
  static std::uint64_t next_id() {
    static std::atomic<std::uint64_t> counter{0};
    return ++counter;
  }

  SparseOperator W_;
  SparseOperator B_;
  SparseOperator Bt_;
  Vector rhs_;
  std::uint64_t id_;
};

struct PreconditionerOptions {
  int cycles = 1;      ///< V-cycles per application of A~^{-1}
  bool exact = false;  ///< direct A^{-1} and exact dense Schur inverse (small problems only)
};

/// Preconditioner data bound to one KKTSystem: the elastic multigrid (shared, built once
/// per level) plus the Schur approximation for the current B.
class PreconditionerState {
 public:
  PreconditionerState(const KKTSystem& sys, std::shared_ptr<const ElasticMultigrid> mg,
                      PreconditionerOptions opt = {})
      : id_(sys.id()), B_(sys.B()), opt_(opt), mg_(std::move(mg)) {
    if (opt.cycles < 1) throw InvalidArgument("preconditioner cycle count must be positive");
    if (opt.exact) {
      build_exact(sys);
      return;
    }
    if (!mg_) throw SolverError("preconditioner needs a multigrid hierarchy");
    if (mg_->fine_operator().A.rows() != sys.n()) throw DimensionMismatch("multigrid does not match the KKT system");
    schur_ = std::make_shared<const SchurApproximation>(sys.B(), sys.W());
  }

  std::uint64_t system_id() const { return id_; }
  bool deflated() const { return schur_ ? schur_->deflated() : false; }

  Vector apply_elastic_inverse(const Vector& v) const {
    if (opt_.exact) return a_ldlt_->solve(v);
    return mg_->apply_inverse(v, opt_.cycles);
  }

  Vector apply_schur_inverse(const Vector& v) const {
    if (opt_.exact) return c_lu_.solve(v);
    return schur_->apply(v);
  }

  void apply(const KKTSystem& sys, const Vector& v, Vector& y) const {
    if (sys.id() != id_) throw SolverError("preconditioner state is stale for this KKT system");
    if (v.size() != sys.size()) throw DimensionMismatch("preconditioner apply size");
    const Eigen::Index n = sys.n();
    y.resize(sys.size());
    y.head(n) = apply_elastic_inverse(v.head(n));
    y.tail(sys.m()) = apply_schur_inverse(B_ * y.head(n) - v.tail(sys.m()));
  }

  LinearMap as_map(const KKTSystem& sys) const {
    return [this, &sys](const Vector& v, Vector& y) { apply(sys, v, y); };
  }

 private:
  void build_exact(const KKTSystem& sys) {
    a_ldlt_ = std::make_shared<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>(
        Eigen::SparseMatrix<double>(sys.W()));
    if (a_ldlt_->info() != Eigen::Success) throw SolverError("direct factorization of the elastic block failed");
    const Eigen::MatrixXd Bd = Eigen::MatrixXd(sys.B());
    const Eigen::MatrixXd AinvBt = a_ldlt_->solve(Eigen::MatrixXd(Bd.transpose()));
    c_lu_ = Eigen::PartialPivLU<Eigen::MatrixXd>(Bd * AinvBt);
  }

  std::uint64_t id_;
  SparseOperator B_;
  PreconditionerOptions opt_;
  std::shared_ptr<const ElasticMultigrid> mg_;
  std::shared_ptr<const SchurApproximation> schur_;
  std::shared_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> a_ldlt_;
  Eigen::PartialPivLU<Eigen::MatrixXd> c_lu_;
};

/// Preconditioned GMRES on the KKT system. An empty `prec` runs unpreconditioned.
inline GmresResult solve_kkt(const KKTSystem& sys, const PreconditionerState* prec, const GmresOptions& opt,
                             const Vector& x0) {
  LinearMap P;
  if (prec) P = prec->as_map(sys);
  return gmres(sys.as_map(), sys.rhs(), P, x0, opt);
}

inline GmresResult solve_kkt(const KKTSystem& sys, const PreconditionerState* prec, const GmresOptions& opt) {
  return solve_kkt(sys, prec, opt, Vector::Zero(sys.size()));
}

/// Inexact forcing: min(0.5, sqrt(||b||)), floored at 1e-8.
inline double forcing_tolerance(double rhs_norm) {
  return std::max(1e-8, std::min(0.5, std::sqrt(rhs_norm)));
}

}  // namespace mpreg
