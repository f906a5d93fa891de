#pragma once

// Difference, projection, mimetic curl/div/grad and intergrid transfer
// operators on the staggered lattice.

#include <algorithm>
#include <array>
#include <string>
#include <utility>
#include <variant>

#include "mpreg/grid.hpp"

namespace mpreg {

namespace detail {

// u1 at lattice column i (may be -1 or n1); homogeneous Dirichlet ghost across the left/right walls.
inline void add_u1_with_ghost(Triplets& t, const GridGeometry& g, int row, int i, int j, double w) {
  if (i < 0) {
    t.emplace_back(row, g.u1_index(0, j), -w);
  } else if (i >= g.n1) {
    t.emplace_back(row, g.u1_index(g.n1 - 1, j), -w);
  } else {
    t.emplace_back(row, g.u1_index(i, j), w);
  }
}

// u2 at lattice row j (may be -1 or n2); ghost across the bottom/top walls.
inline void add_u2_with_ghost(Triplets& t, const GridGeometry& g, int row, int i, int j, double w) {
  const int off = g.u1_count();
  if (j < 0) {
    t.emplace_back(row, off + g.u2_index(i, 0), -w);
  } else if (j >= g.n2) {
    t.emplace_back(row, off + g.u2_index(i, g.n2 - 1), -w);
  } else {
    t.emplace_back(row, off + g.u2_index(i, j), w);
  }
}

inline void check_index(int k, const char* what) {
  if (k != 1 && k != 2) throw InvalidArgument(std::string(what) + " must be 1 or 2");
}

}  // namespace detail

/// Difference operator D_deriv^comp on the concatenated displacement vector.
/// D_1^1 and D_2^2 land on nodes (ghost rule at the walls), the mixed ones on cells.
inline SparseOperator assemble_derivative(const GridGeometry& g, int deriv, int comp) {
  detail::check_index(deriv, "derivative index");
  detail::check_index(comp, "component index");
  const double s = 1.0 / g.h;
  const int off = g.u1_count();
  Triplets t;
  if (deriv == comp) {
    t.reserve(2 * g.nodes());
    for (int j = 0; j <= g.n2; ++j)
      for (int i = 0; i <= g.n1; ++i) {
        const int row = g.node_index(i, j);
        if (comp == 1) {
          detail::add_u1_with_ghost(t, g, row, i, j, s);
          detail::add_u1_with_ghost(t, g, row, i - 1, j, -s);
        } else {
          detail::add_u2_with_ghost(t, g, row, i, j, s);
          detail::add_u2_with_ghost(t, g, row, i, j - 1, -s);
        }
      }
    return make_sparse(g.nodes(), g.unknowns(), t);
  }
  t.reserve(2 * g.cells());
  for (int j = 0; j < g.n2; ++j)
    for (int i = 0; i < g.n1; ++i) {
      const int row = g.cell_index(i, j);
      if (comp == 1) {  // d/dx2 of u1
        t.emplace_back(row, g.u1_index(i, j + 1), s);
        t.emplace_back(row, g.u1_index(i, j), -s);
      } else {  // d/dx1 of u2
        t.emplace_back(row, off + g.u2_index(i + 1, j), s);
        t.emplace_back(row, off + g.u2_index(i, j), -s);
      }
    }
  return make_sparse(g.cells(), g.unknowns(), t);
}

inline std::variant<CellField, NodeField> derivative(const StaggeredField& field, int deriv, int comp) {
  const auto& g = field.geometry;
  Vector out = assemble_derivative(g, deriv, comp) * field.vector();
  if (deriv == comp) return NodeField(g, std::move(out));
  return CellField(g, std::move(out));
}

/// P_{u_comp -> c}: average of the two same-component edges bounding each cell.
inline SparseOperator assemble_cell_projection(const GridGeometry& g, int comp) {
  detail::check_index(comp, "component index");
  const int off = g.u1_count();
  Triplets t;
  t.reserve(2 * g.cells());
  for (int j = 0; j < g.n2; ++j)
    for (int i = 0; i < g.n1; ++i) {
      const int row = g.cell_index(i, j);
      if (comp == 1) {
        t.emplace_back(row, g.u1_index(i, j), 0.5);
        t.emplace_back(row, g.u1_index(i, j + 1), 0.5);
      } else {
        t.emplace_back(row, off + g.u2_index(i, j), 0.5);
        t.emplace_back(row, off + g.u2_index(i + 1, j), 0.5);
      }
    }
  return make_sparse(g.cells(), g.unknowns(), t);
}

inline CellField project_to_cells(const StaggeredField& field, int comp) {
  return CellField(field.geometry, assemble_cell_projection(field.geometry, comp) * field.vector());
}

/// P_{u_comp -> n}: average of the two same-component edges sharing each node
/// along the component direction; zero on the walls through the ghost rule.
inline SparseOperator assemble_node_projection(const GridGeometry& g, int comp) {
  detail::check_index(comp, "component index");
  Triplets t;
  t.reserve(2 * g.nodes());
  for (int j = 0; j <= g.n2; ++j)
    for (int i = 0; i <= g.n1; ++i) {
      const int row = g.node_index(i, j);
      if (comp == 1) {
        if (i == 0 || i == g.n1) continue;
        t.emplace_back(row, g.u1_index(i - 1, j), 0.5);
        t.emplace_back(row, g.u1_index(i, j), 0.5);
      } else {
        if (j == 0 || j == g.n2) continue;
        t.emplace_back(row, g.u1_count() + g.u2_index(i, j - 1), 0.5);
        t.emplace_back(row, g.u1_count() + g.u2_index(i, j), 0.5);
      }
    }
  return make_sparse(g.nodes(), g.unknowns(), t);
}

/// Discrete curl D_1^2 - D_2^1 : H_u -> H_c.
inline SparseOperator assemble_curl(const GridGeometry& g) {
  return assemble_derivative(g, 1, 2) - assemble_derivative(g, 2, 1);
}

/// Discrete divergence D_1^1 + D_2^2 : H_u -> H_n. Rows exist only at interior
/// nodes; there it touches unconstrained edges only and equals minus the
/// transpose of the nodal gradient, so curl(grad f) = 0 and div(curl^T w) = 0.
inline SparseOperator assemble_div(const GridGeometry& g) {
  const double s = 1.0 / g.h;
  const int off = g.u1_count();
  Triplets t;
  t.reserve(4 * g.nodes());
  for (int j = 1; j < g.n2; ++j)
    for (int i = 1; i < g.n1; ++i) {
      const int row = g.node_index(i, j);
      t.emplace_back(row, g.u1_index(i, j), s);
      t.emplace_back(row, g.u1_index(i - 1, j), -s);
      t.emplace_back(row, off + g.u2_index(i, j), s);
      t.emplace_back(row, off + g.u2_index(i, j - 1), -s);
    }
  return make_sparse(g.nodes(), g.unknowns(), t);
}

/// Nodal gradient H_n -> H_u, defined as -div^T.
inline SparseOperator assemble_grad(const GridGeometry& g) {
  SparseOperator grad = -SparseOperator(assemble_div(g).transpose());
  grad.makeCompressed();
  return grad;
}

// ---------------------------------------------------------------------------
// Intergrid transfers between a fine geometry and its 2h coarsening.
// Restrictions are (coarse x fine), prolongations (fine x coarse).

/// S_u1 (on u1) and S_u2 (on u2) weights; coarse wall-row entries are left empty.
inline SparseOperator assemble_displacement_restriction(const GridGeometry& fine) {
  const GridGeometry coarse = fine.coarsened();
  const int off_f = fine.u1_count();
  const int off_c = coarse.u1_count();
  Triplets t;
  t.reserve(6 * coarse.unknowns());
  for (int J = 1; J < coarse.n2; ++J)
    for (int I = 0; I < coarse.n1; ++I) {
      const int row = coarse.u1_index(I, J);
      for (int di = 0; di < 2; ++di) {
        t.emplace_back(row, fine.u1_index(2 * I + di, 2 * J), 2.0 / 8.0);
        t.emplace_back(row, fine.u1_index(2 * I + di, 2 * J - 1), 1.0 / 8.0);
        t.emplace_back(row, fine.u1_index(2 * I + di, 2 * J + 1), 1.0 / 8.0);
      }
    }
  for (int J = 0; J < coarse.n2; ++J)
    for (int I = 1; I < coarse.n1; ++I) {
      const int row = off_c + coarse.u2_index(I, J);
      for (int dj = 0; dj < 2; ++dj) {
        t.emplace_back(row, off_f + fine.u2_index(2 * I, 2 * J + dj), 2.0 / 8.0);
        t.emplace_back(row, off_f + fine.u2_index(2 * I - 1, 2 * J + dj), 1.0 / 8.0);
        t.emplace_back(row, off_f + fine.u2_index(2 * I + 1, 2 * J + dj), 1.0 / 8.0);
      }
    }
  return make_sparse(coarse.unknowns(), fine.unknowns(), t);
}

/// S_p: average of the four fine cells covering a coarse cell.
inline SparseOperator assemble_cell_restriction(const GridGeometry& fine) {
  const GridGeometry coarse = fine.coarsened();
  Triplets t;
  t.reserve(4 * coarse.cells());
  for (int J = 0; J < coarse.n2; ++J)
    for (int I = 0; I < coarse.n1; ++I)
      for (int dj = 0; dj < 2; ++dj)
        for (int di = 0; di < 2; ++di)
          t.emplace_back(coarse.cell_index(I, J), fine.cell_index(2 * I + di, 2 * J + dj), 0.25);
  return make_sparse(coarse.cells(), fine.cells(), t);
}

/// Nodal full weighting (1/16)[1 2 1; 2 4 2; 1 2 1] at interior nodes, injection on the walls.
inline SparseOperator assemble_node_restriction(const GridGeometry& fine) {
  const GridGeometry coarse = fine.coarsened();
  Triplets t;
  t.reserve(9 * coarse.nodes());
  for (int J = 0; J <= coarse.n2; ++J)
    for (int I = 0; I <= coarse.n1; ++I) {
      const int row = coarse.node_index(I, J);
      if (I == 0 || J == 0 || I == coarse.n1 || J == coarse.n2) {
        t.emplace_back(row, fine.node_index(2 * I, 2 * J), 1.0);
        continue;
      }
      for (int dj = -1; dj <= 1; ++dj)
        for (int di = -1; di <= 1; ++di) {
          const double w = (di == 0 ? 2.0 : 1.0) * (dj == 0 ? 2.0 : 1.0) / 16.0;
          t.emplace_back(row, fine.node_index(2 * I + di, 2 * J + dj), w);
        }
    }
  return make_sparse(coarse.nodes(), fine.nodes(), t);
}

namespace detail {

// Linear weights of a fine staggered position between coarse positions along the
// direction in which the coarse samples sit at half-integer offsets.
// Returns pairs (coarse index, weight) with indices possibly -1 or n_coarse.
inline std::array<std::pair<int, double>, 2> half_offset_weights(int i) {
  const int k = i / 2;
  if (i % 2 == 0) return {{{k - 1, 0.25}, {k, 0.75}}};
  return {{{k, 0.75}, {k + 1, 0.25}}};
}

inline std::array<std::pair<int, double>, 2> coincident_weights(int j) {
  if (j % 2 == 0) return {{{j / 2, 1.0}, {j / 2, 0.0}}};
  return {{{(j - 1) / 2, 0.5}, {(j + 1) / 2, 0.5}}};
}

}  // namespace detail

/// Bilinear interpolation of (u1, u2) respecting the staggered placement. Past a
/// wall the wall-normal component is extended evenly, matching the natural
/// condition the interior-node divergence puts on it. Fine wall-row entries stay empty.
inline SparseOperator assemble_displacement_prolongation(const GridGeometry& fine) {
  const GridGeometry coarse = fine.coarsened();
  const int off_f = fine.u1_count();
  const int off_c = coarse.u1_count();
  auto clamp1 = [&](int I) { return std::clamp(I, 0, coarse.n1 - 1); };
  auto clamp2 = [&](int J) { return std::clamp(J, 0, coarse.n2 - 1); };
  Triplets t;
  t.reserve(4 * fine.unknowns());
  for (int j = 1; j < fine.n2; ++j)
    for (int i = 0; i < fine.n1; ++i)
      for (auto [I, wx] : detail::half_offset_weights(i))
        for (auto [J, wy] : detail::coincident_weights(j))
          if (wy != 0.0) t.emplace_back(fine.u1_index(i, j), coarse.u1_index(clamp1(I), J), wx * wy);
  for (int j = 0; j < fine.n2; ++j)
    for (int i = 1; i < fine.n1; ++i)
      for (auto [J, wy] : detail::half_offset_weights(j))
        for (auto [I, wx] : detail::coincident_weights(i))
          if (wx != 0.0) t.emplace_back(off_f + fine.u2_index(i, j), off_c + coarse.u2_index(I, clamp2(J)), wx * wy);
  return make_sparse(fine.unknowns(), coarse.unknowns(), t);
}

/// Bilinear interpolation of cell-centered values; constant extension past the walls.
inline SparseOperator assemble_cell_prolongation(const GridGeometry& fine) {
  const GridGeometry coarse = fine.coarsened();
  auto clamp1 = [&](int I) { return std::clamp(I, 0, coarse.n1 - 1); };
  auto clamp2 = [&](int J) { return std::clamp(J, 0, coarse.n2 - 1); };
  Triplets t;
  t.reserve(4 * fine.cells());
  for (int j = 0; j < fine.n2; ++j)
    for (int i = 0; i < fine.n1; ++i)
      for (auto [I, wx] : detail::half_offset_weights(i))
        for (auto [J, wy] : detail::half_offset_weights(j))
          t.emplace_back(fine.cell_index(i, j), coarse.cell_index(clamp1(I), clamp2(J)), wx * wy);
  return make_sparse(fine.cells(), coarse.cells(), t);
}

/// Bilinear interpolation of nodal values (coarse nodes coincide with even fine nodes).
inline SparseOperator assemble_node_prolongation(const GridGeometry& fine) {
  const GridGeometry coarse = fine.coarsened();
  Triplets t;
  t.reserve(4 * fine.nodes());
  for (int j = 0; j <= fine.n2; ++j)
    for (int i = 0; i <= fine.n1; ++i)
      for (auto [I, wx] : detail::coincident_weights(i))
        for (auto [J, wy] : detail::coincident_weights(j))
          if (wx * wy != 0.0) t.emplace_back(fine.node_index(i, j), coarse.node_index(I, J), wx * wy);
  return make_sparse(fine.nodes(), coarse.nodes(), t);
}

inline StaggeredField restrict_field(const StaggeredField& fine) {
  return StaggeredField::from_vector(fine.geometry.coarsened(),
                                     assemble_displacement_restriction(fine.geometry) * fine.vector());
}

inline CellField restrict_field(const CellField& fine) {
  return CellField(fine.geometry.coarsened(), assemble_cell_restriction(fine.geometry) * fine.values);
}

inline NodeField restrict_field(const NodeField& fine) {
  return NodeField(fine.geometry.coarsened(), assemble_node_restriction(fine.geometry) * fine.values);
}

/// Prolongs a field given on `fine.coarsened()` to the fine geometry.
inline StaggeredField prolong_field(const StaggeredField& coarse, const GridGeometry& fine) {
  require_same_geometry(coarse.geometry, fine.coarsened(), "prolongation");
  return StaggeredField::from_vector(fine, assemble_displacement_prolongation(fine) * coarse.vector());
}

inline CellField prolong_field(const CellField& coarse, const GridGeometry& fine) {
  require_same_geometry(coarse.geometry, fine.coarsened(), "prolongation");
  return CellField(fine, assemble_cell_prolongation(fine) * coarse.values);
}

inline NodeField prolong_field(const NodeField& coarse, const GridGeometry& fine) {
  require_same_geometry(coarse.geometry, fine.coarsened(), "prolongation");
  return NodeField(fine, assemble_node_prolongation(fine) * coarse.values);
}

}  // namespace mpreg
