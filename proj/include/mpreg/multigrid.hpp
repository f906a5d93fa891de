#pragma once

// Geometric multigrid for the reduced elastic block.
//
// lambda == 0: lexicographic Gauss-Seidel on A.
// lambda  > 0: distributive Gauss-Seidel on the augmented (u, q) system, i.e.
//              Gauss-Seidel on K M in the transformed variable, applied to x
//              through the columns of M.
//
// Operators are rediscretized on every level. All level operators carry the
// h^2 scaling of the fine-level energy, so a residual restricted by the
// (averaging) transfer stencils is multiplied by 4 before the coarse solve.

#include <cmath>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "mpreg/elastic.hpp"
#include "mpreg/error.hpp"
#include "mpreg/grid.hpp"
#include "mpreg/staggered.hpp"

namespace mpreg {

struct MultigridOptions {
  int pre_smooth = 1;
  int post_smooth = 1;
  int coarsest_cells = 8;  ///< coarsen while a side exceeds this and halving is possible
};

class ElasticMultigrid {
 public:
  ElasticMultigrid(const GridGeometry& g, double mu, double lambda, MultigridOptions opt = {}) : opt_(opt) {
    if (opt.pre_smooth < 0 || opt.post_smooth < 0) throw InvalidArgument("smoothing counts must be nonnegative");
    GridGeometry cur = g;
    while (true) {
      levels_.push_back(build_level(cur, mu, lambda));
      const bool larger = cur.n1 > opt.coarsest_cells || cur.n2 > opt.coarsest_cells;
      if (!larger || !cur.can_coarsen()) break;
      cur = cur.coarsened();
    }
    for (std::size_t l = 0; l + 1 < levels_.size(); ++l) build_transfers(levels_[l], levels_[l + 1]);
    const Level& c = levels_.back();
    coarse_lu_ = Eigen::PartialPivLU<Eigen::MatrixXd>(Eigen::MatrixXd(c.K));
  }

  int depth() const { return static_cast<int>(levels_.size()); }
  bool augmented() const { return levels_.front().op.lambda > 0.0; }
  const ElasticOperator& fine_operator() const { return levels_.front().op; }
  const GridGeometry& coarsest_geometry() const { return levels_.back().op.geometry; }

  /// Size of the system iterated by the cycle (free displacements, plus interior nodes when augmented).
  int system_size() const { return static_cast<int>(levels_.front().K.rows()); }
  /// The operator the cycle iterates on (A or the augmented operator).
  const SparseOperator& system_operator() const { return levels_.front().K; }

  /// Right-hand side of the cycled system for A u = f (f over the free displacement unknowns).
  Vector system_rhs(const Vector& f) const {
    check_size(f, levels_.front().op.dofs.size(), "multigrid rhs");
    if (!augmented()) return f;
    Vector b = Vector::Zero(system_size());
    b.head(f.size()) = f;
    return b;
  }

  /// System state for a displacement guess (q = -lambda div u when augmented).
  Vector system_state(const Vector& u) const {
    const Level& L = levels_.front();
    check_size(u, L.op.dofs.size(), "multigrid state");
    if (!augmented()) return u;
    Vector x(system_size());
    x.head(u.size()) = u;
    x.tail(x.size() - u.size()) = -L.op.lambda * (L.reduced_div * u);
    return x;
  }

  /// One V-cycle on the cycled system K x = b, updating x in place.
  void cycle(const Vector& b, Vector& x) const {
    check_size(b, system_size(), "multigrid cycle rhs");
    check_size(x, system_size(), "multigrid cycle state");
    vcycle(0, b, x);
  }

  /// One V-cycle for A u = f starting from u.
  Vector vcycle(const Vector& f, const Vector& u) const {
    Vector x = system_state(u);
    cycle(system_rhs(f), x);
    return x.head(u.size());
  }

  /// Approximate A^{-1} f: `cycles` V-cycles from zero. Linear in f.
  Vector apply_inverse(const Vector& f, int cycles = 1) const {
    if (cycles < 1) throw InvalidArgument("cycle count must be positive");
    const Vector b = system_rhs(f);
    Vector x = Vector::Zero(system_size());
    for (int c = 0; c < cycles; ++c) vcycle(0, b, x);
    return x.head(f.size());
  }

  /// Residual norms ||b - K x|| of the cycled system after each of `cycles` V-cycles from x = 0
  /// (entry 0 is the initial residual).
  std::vector<double> residual_history(const Vector& b, int cycles) const {
    check_size(b, system_size(), "multigrid rhs");
    const SparseOperator& K = system_operator();
    Vector x = Vector::Zero(system_size());
    std::vector<double> hist{b.norm()};
    for (int c = 0; c < cycles; ++c) {
      vcycle(0, b, x);
      hist.push_back((b - K * x).norm());
    }
    return hist;
  }

  /// Geometric mean residual reduction per cycle over cycles (skip, cycles].
  double contraction_factor(const Vector& b, int cycles = 12, int skip = 2) const {
    if (skip < 0 || cycles <= skip) throw InvalidArgument("contraction window");
    const auto hist = residual_history(b, cycles);
    if (hist[skip] == 0.0) return 0.0;
    return std::pow(hist[cycles] / hist[skip], 1.0 / (cycles - skip));
  }

 private:
  struct Level {
    ElasticOperator op;
    SparseOperator K;          ///< cycled operator (row-major)
    SparseOperator reduced_div;
    Eigen::SparseMatrix<double, Eigen::ColMajor> M;  ///< distribution matrix (augmented only)
    Vector diag;               ///< diagonal of K (GS) or of K M (DGS)
    SparseOperator R;          ///< to the next coarser level
    SparseOperator P;          ///< from the next coarser level
  };

  static void check_size(const Vector& v, Eigen::Index n, const char* what) {
    if (v.size() != n) throw DimensionMismatch(what);
  }

  static Level build_level(const GridGeometry& g, double mu, double lambda) {
    Level L;
    L.op = assemble_elastic(g, mu, lambda);
    L.reduced_div = reduce(L.op.div, L.op.nodes, L.op.dofs);
    if (lambda > 0.0) {
      L.K = assemble_augmented(L.op);
      const SparseOperator M = assemble_distribution(L.op);
      L.M = M;
      const SparseOperator KM = L.K * M;
      L.diag = KM.diagonal();
    } else {
      L.K = L.op.A;
      L.diag = L.K.diagonal();
    }
    for (Eigen::Index k = 0; k < L.diag.size(); ++k)
      if (!(L.diag[k] > 0.0)) throw SolverError("multigrid smoother has a nonpositive diagonal entry");
    return L;
  }

  void build_transfers(Level& fine, const Level& coarse) const {
    const GridGeometry& g = fine.op.geometry;
    SparseOperator Ru = reduce(assemble_displacement_restriction(g), coarse.op.dofs, fine.op.dofs);
    SparseOperator Pu = reduce(assemble_displacement_prolongation(g), fine.op.dofs, coarse.op.dofs);
    if (!augmented()) {
      fine.R = Ru;
      fine.P = Pu;
      return;
    }
    SparseOperator Rq = reduce(assemble_node_restriction(g), coarse.op.nodes, fine.op.nodes);
    SparseOperator Pq = reduce(assemble_node_prolongation(g), fine.op.nodes, coarse.op.nodes);
    const int nuf = fine.op.dofs.size(), nqf = fine.op.nodes.size();
    const int nuc = coarse.op.dofs.size(), nqc = coarse.op.nodes.size();
    fine.R = detail::assemble_blocks(nuc + nqc, nuf + nqf, {{&Ru, 0, 0, 1.0}, {&Rq, nuc, nuf, 1.0}});
    fine.P = detail::assemble_blocks(nuf + nqf, nuc + nqc, {{&Pu, 0, 0, 1.0}, {&Pq, nuf, nuc, 1.0}});
  }

  void smooth(const Level& L, const Vector& b, Vector& x) const {
    const SparseOperator& K = L.K;
    const Eigen::Index n = K.rows();
    if (!augmented()) {
      for (Eigen::Index k = 0; k < n; ++k) {
        double r = b[k];
        for (SparseOperator::InnerIterator it(K, k); it; ++it) r -= it.value() * x[it.col()];
        x[k] += r / L.diag[k];
      }
      return;
    }
    for (Eigen::Index k = 0; k < n; ++k) {
      double r = b[k];
      for (SparseOperator::InnerIterator it(K, k); it; ++it) r -= it.value() * x[it.col()];
      const double d = r / L.diag[k];
      for (Eigen::SparseMatrix<double, Eigen::ColMajor>::InnerIterator it(L.M, k); it; ++it)
        x[it.row()] += d * it.value();
    }
  }

  void vcycle(std::size_t l, const Vector& b, Vector& x) const {
    const Level& L = levels_[l];
    if (l + 1 == levels_.size()) {
      x = coarse_lu_.solve(b);
      return;
    }
    for (int s = 0; s < opt_.pre_smooth; ++s) smooth(L, b, x);
    const Vector r = b - L.K * x;
    const Vector bc = 4.0 * (L.R * r);
    Vector xc = Vector::Zero(bc.size());
    vcycle(l + 1, bc, xc);
    x += L.P * xc;
    for (int s = 0; s < opt_.post_smooth; ++s) smooth(L, b, x);
  }

  MultigridOptions opt_;
  std::vector<Level> levels_;
  Eigen::PartialPivLU<Eigen::MatrixXd> coarse_lu_;
};

}  // namespace mpreg
