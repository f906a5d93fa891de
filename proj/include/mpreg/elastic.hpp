#pragma once

// Mimetic linear-elastic operator A^h = h^2 G^T G with
// G = [sqrt(mu) curl; sqrt(2 mu + lambda) div], the strain energy
// S^h(u) = 1/2 <u, A^h u>, and the augmented (u, q) form used for
// distributive smoothing when lambda > 0.

#include <cmath>

#include "mpreg/grid.hpp"
#include "mpreg/staggered.hpp"

namespace mpreg {

struct ElasticOperator {
  GridGeometry geometry;
  double mu = 1.0;
  double lambda = 0.0;
  DofMap dofs;         ///< unconstrained displacement unknowns
  DofMap nodes;        ///< interior nodes (support of the assembled divergence)
  SparseOperator curl;    ///< full, cells x n
  SparseOperator div;     ///< full, nodes x n
  SparseOperator G;       ///< full, (cells + nodes) x n
  SparseOperator A_full;  ///< h^2 G^T G over the full displacement vector
  SparseOperator A;       ///< A_full restricted to the unconstrained unknowns (SPD)
};

inline ElasticOperator assemble_elastic(const GridGeometry& g, double mu, double lambda) {
  g.validate();
  if (!(mu > 0.0) || !std::isfinite(mu)) throw InvalidArgument("mu must be positive");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InvalidArgument("lambda must be nonnegative");
  ElasticOperator op;
  op.geometry = g;
  op.mu = mu;
  op.lambda = lambda;
  op.dofs = free_displacement_dofs(g);
  op.nodes = interior_node_dofs(g);
  op.curl = assemble_curl(g);
  op.div = assemble_div(g);

  Triplets t;
  t.reserve(op.curl.nonZeros() + op.div.nonZeros());
  const double sc = std::sqrt(mu);
  const double sd = std::sqrt(2.0 * mu + lambda);
  for (int r = 0; r < op.curl.outerSize(); ++r)
    for (SparseOperator::InnerIterator it(op.curl, r); it; ++it) t.emplace_back(r, it.col(), sc * it.value());
  for (int r = 0; r < op.div.outerSize(); ++r)
    for (SparseOperator::InnerIterator it(op.div, r); it; ++it)
      t.emplace_back(g.cells() + r, it.col(), sd * it.value());
  op.G = make_sparse(g.cells() + g.nodes(), g.unknowns(), t);

  SparseOperator Gt = op.G.transpose();
  op.A_full = (g.h * g.h) * (Gt * op.G);
  op.A_full.makeCompressed();
  op.A = reduce(op.A_full, op.dofs, op.dofs);
  return op;
}

/// S^h(u) = 1/2 <u, A u>.
inline double energy(const ElasticOperator& op, const StaggeredField& u) {
  require_same_geometry(op.geometry, u.geometry, "energy");
  const Vector v = u.vector();
  return 0.5 * v.dot(op.A_full * v);
}

/// Gradient A u over the full displacement vector.
inline Vector energy_gradient(const ElasticOperator& op, const StaggeredField& u) {
  require_same_geometry(op.geometry, u.geometry, "energy gradient");
  return op.A_full * u.vector();
}

namespace detail {

struct Block {
  const SparseOperator* op;
  int row_offset;
  int col_offset;
  double scale;
};

inline SparseOperator assemble_blocks(int rows, int cols, std::initializer_list<Block> blocks) {
  Triplets t;
  for (const auto& b : blocks)
    for (int r = 0; r < b.op->outerSize(); ++r)
      for (SparseOperator::InnerIterator it(*b.op, r); it; ++it)
        t.emplace_back(b.row_offset + r, b.col_offset + static_cast<int>(it.col()), b.scale * it.value());
  return make_sparse(rows, cols, t);
}

inline SparseOperator identity(int n) {
  SparseOperator I(n, n);
  I.setIdentity();
  return I;
}

}  // namespace detail

/// Reduced curl (cells x free) and divergence (interior nodes x free).
struct ReducedDifferenceOperators {
  SparseOperator curl;
  SparseOperator div;
};

inline ReducedDifferenceOperators reduced_differences(const ElasticOperator& op) {
  return {reduce_cols(op.curl, op.dofs), reduce(op.div, op.nodes, op.dofs)};
}

/// Augmented operator over (u, q), q = -lambda div u on interior nodes:
///   [ h^2 mu (curl^T curl + 2 div^T div)   -h^2 div^T        ]
///   [ h^2 div                               (h^2 / lambda) I ]
/// Solving it with right-hand side (f, 0) reproduces A u = f.
inline SparseOperator assemble_augmented(const ElasticOperator& op) {
  if (!(op.lambda > 0.0)) throw InvalidArgument("augmented operator needs lambda > 0");
  const auto d = reduced_differences(op);
  const double h2 = op.geometry.h * op.geometry.h;
  const int nu = op.dofs.size();
  const int nq = op.nodes.size();
  SparseOperator ct = d.curl.transpose();
  SparseOperator dt = d.div.transpose();
  SparseOperator k11 = SparseOperator(ct * d.curl) + 2.0 * SparseOperator(dt * d.div);
  SparseOperator I = detail::identity(nq);
  return detail::assemble_blocks(nu + nq, nu + nq,
                                 {{&k11, 0, 0, h2 * op.mu},
                                  {&dt, 0, nu, -h2},
                                  {&d.div, nu, 0, h2},
                                  {&I, nu, nu, h2 / op.lambda}});
}

/// Distribution matrix [ I, div^T ; mu div, 2 mu div div^T ]; the product
/// assemble_augmented(op) * M is block lower triangular with Laplacian diagonal blocks.
inline SparseOperator assemble_distribution(const ElasticOperator& op) {
  const auto d = reduced_differences(op);
  const int nu = op.dofs.size();
  const int nq = op.nodes.size();
  SparseOperator dt = d.div.transpose();
  SparseOperator ddt = d.div * dt;
  SparseOperator I = detail::identity(nu);
  return detail::assemble_blocks(nu + nq, nu + nq,
                                 {{&I, 0, 0, 1.0}, {&dt, 0, nu, 1.0}, {&d.div, nu, 0, op.mu}, {&ddt, nu, nu, 2.0 * op.mu}});
}

/// q = -lambda div u at the interior nodes (reduced node vector).
inline Vector pressure_from_displacement(const ElasticOperator& op, const StaggeredField& u) {
  require_same_geometry(op.geometry, u.geometry, "pressure");
  return -op.lambda * op.nodes.gather(op.div * u.vector());
}

}  // namespace mpreg
