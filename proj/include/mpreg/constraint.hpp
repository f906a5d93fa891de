#pragma once

// Discrete mass-preservation constraint c^h(u) = V^h(u) (rho_T o phi) - rho_R,
// the cell-volume Jacobian-determinant approximation V^h and their derivatives.

#include <array>
#include <limits>

#include "mpreg/grid.hpp"
#include "mpreg/image.hpp"
#include "mpreg/staggered.hpp"

namespace mpreg {

namespace detail {

struct CornerDisplacements {
  Vector U1;  // nodal x1 displacement
  Vector U2;  // nodal x2 displacement
};

inline CornerDisplacements node_displacements(const StaggeredField& u) {
  const auto& g = u.geometry;
  CornerDisplacements d{Vector::Zero(g.nodes()), Vector::Zero(g.nodes())};
  for (int j = 0; j <= g.n2; ++j)
    for (int i = 1; i < g.n1; ++i) d.U1[g.node_index(i, j)] = 0.5 * (u.at1(i - 1, j) + u.at1(i, j));
  for (int j = 1; j < g.n2; ++j)
    for (int i = 0; i <= g.n1; ++i) d.U2[g.node_index(i, j)] = 0.5 * (u.at2(i, j - 1) + u.at2(i, j));
  return d;
}

// Corner order SW, SE, NE, NW (counterclockwise).
inline std::array<std::array<int, 2>, 4> corners(int i, int j) {
  return {{{i, j}, {i + 1, j}, {i + 1, j + 1}, {i, j + 1}}};
}

}  // namespace detail

/// Deformed node positions x + P_{u->n} u (used for the deformation grid as well).
inline std::pair<NodeField, NodeField> deformed_nodes(const StaggeredField& u) {
  const auto& g = u.geometry;
  const auto d = detail::node_displacements(u);
  NodeField y1(g);
  NodeField y2(g);
  for (int j = 0; j <= g.n2; ++j)
    for (int i = 0; i <= g.n1; ++i) {
      const int k = g.node_index(i, j);
      const Point p = g.node(i, j);
      y1.values[k] = p.x1 + d.U1[k];
      y2.values[k] = p.x2 + d.U2[k];
    }
  return {std::move(y1), std::move(y2)};
}

/// V^h(u): signed area of each deformed cell (shoelace over the SW-NE diagonal
/// split) divided by h^2. Exactly 1 for u = 0; negative when a cell folds.
inline CellField volume(const StaggeredField& u) {
  const auto& g = u.geometry;
  const auto d = detail::node_displacements(u);
  static constexpr std::array<std::array<double, 2>, 4> kOffset{{{0.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}, {0.0, 1.0}}};
  CellField v(g);
  const double h2 = g.h * g.h;
  for (int j = 0; j < g.n2; ++j)
    for (int i = 0; i < g.n1; ++i) {
      const auto c = detail::corners(i, j);
      // Corner positions relative to the undeformed SW corner.
      std::array<double, 4> x{};
      std::array<double, 4> y{};
      for (int k = 0; k < 4; ++k) {
        const int n = g.node_index(c[k][0], c[k][1]);
        x[k] = kOffset[k][0] * g.h + d.U1[n];
        y[k] = kOffset[k][1] * g.h + d.U2[n];
      }
      // Triangles (SW, SE, NE) and (SW, NE, NW).
      const double t1 = (x[1] - x[0]) * (y[2] - y[0]) - (x[2] - x[0]) * (y[1] - y[0]);
      const double t2 = (x[2] - x[0]) * (y[3] - y[0]) - (x[3] - x[0]) * (y[2] - y[0]);
      v(i, j) = 0.5 * (t1 + t2) / h2;
    }
  return v;
}

/// Frechet derivative of V^h at u (m x n, at most 12 entries per row).
inline SparseOperator volume_derivative(const StaggeredField& u) {
  const auto& g = u.geometry;
  const auto [y1, y2] = deformed_nodes(u);
  const int off = g.u1_count();
  const double inv = 0.5 / (g.h * g.h);
  Triplets t;
  t.reserve(16 * g.cells());
  for (int j = 0; j < g.n2; ++j)
    for (int i = 0; i < g.n1; ++i) {
      const int row = g.cell_index(i, j);
      const auto c = detail::corners(i, j);
      std::array<double, 4> x{};
      std::array<double, 4> y{};
      for (int k = 0; k < 4; ++k) {
        x[k] = y1(c[k][0], c[k][1]);
        y[k] = y2(c[k][0], c[k][1]);
      }
      for (int k = 0; k < 4; ++k) {
        const int next = (k + 1) % 4;
        const int prev = (k + 3) % 4;
        const double dx = inv * (y[next] - y[prev]);  // d area / d x_k
        const double dy = inv * (x[prev] - x[next]);  // d area / d y_k
        const int ni = c[k][0];
        const int nj = c[k][1];
        if (ni > 0 && ni < g.n1) {
          t.emplace_back(row, g.u1_index(ni - 1, nj), 0.5 * dx);
          t.emplace_back(row, g.u1_index(ni, nj), 0.5 * dx);
        }
        if (nj > 0 && nj < g.n2) {
          t.emplace_back(row, off + g.u2_index(ni, nj - 1), 0.5 * dy);
          t.emplace_back(row, off + g.u2_index(ni, nj), 0.5 * dy);
        }
      }
    }
  return make_sparse(g.cells(), g.unknowns(), t);
}

struct VolumeMinimum {
  double value = std::numeric_limits<double>::infinity();
  int cell = -1;  ///< argmin in cell_index order
};

inline VolumeMinimum min_volume(const CellField& v) {
  VolumeMinimum m;
  for (int k = 0; k < v.values.size(); ++k)
    if (v.values[k] < m.value) {
      m.value = v.values[k];
      m.cell = k;
    }
  return m;
}

inline VolumeMinimum min_volume(const StaggeredField& u) { return min_volume(volume(u)); }

inline bool is_diffeomorphic(const StaggeredField& u, double delta) { return min_volume(u).value >= delta; }

struct ConstraintEvaluation {
  CellField residual;    ///< c^h(u)
  CellField volume;      ///< V^h(u)
  WarpedImage warped;    ///< rho_T o phi and its gradient
  SparseOperator jacobian;  ///< B^h(u), m x n over the full displacement vector; empty if not requested
};

/// Residual and (optionally) Jacobian of the mass-preservation constraint:
/// B = diag(rho_T o phi) dV + diag(V) d(rho_T o phi).
inline ConstraintEvaluation evaluate_constraint(const StaggeredField& u, const BSplineImage& templ,
                                                const CellField& reference, bool with_jacobian = true) {
  const auto& g = u.geometry;
  require_same_geometry(g, templ.geometry(), "constraint template");
  require_same_geometry(g, reference.geometry, "constraint reference");
  ConstraintEvaluation e{CellField(g), volume(u), warp(templ, u), SparseOperator()};
  e.residual.values = (e.volume.values.array() * e.warped.value.values.array() - reference.values.array()).matrix();
  if (with_jacobian) {
    SparseOperator dv = volume_derivative(u);
    SparseOperator dw = warp_derivative(e.warped);
    e.jacobian = e.warped.value.values.asDiagonal() * dv + e.volume.values.asDiagonal() * dw;
    e.jacobian.prune(0.0);
    e.jacobian.makeCompressed();
  }
  return e;
}

}  // namespace mpreg
