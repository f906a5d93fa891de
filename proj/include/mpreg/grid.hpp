#pragma once

// Staggered lattice geometry and the field containers living on it.
//
//   nodes   (i h, j h)              i = 0..n1,   j = 0..n2
//   cells   ((i+1/2) h, (j+1/2) h)  i = 0..n1-1, j = 0..n2-1
//   u1      ((i+1/2) h, j h)        i = 0..n1-1, j = 0..n2     (horizontal edges)
//   u2      (i h, (j+1/2) h)        i = 0..n1,   j = 0..n2-1   (vertical edges)
//
// All lattices are stored row-major with x1 fastest. A displacement vector is
// the concatenation [u1; u2].

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "mpreg/error.hpp"

namespace mpreg {

using Vector = Eigen::VectorXd;
using SparseOperator = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Triplets = std::vector<Eigen::Triplet<double>>;

struct Point {
  double x1 = 0.0;
  double x2 = 0.0;
};

struct GridGeometry {
  int n1 = 0;
  int n2 = 0;
  double h = 1.0;
  double origin1 = 0.0;
  double origin2 = 0.0;

  GridGeometry() = default;
  GridGeometry(int n1_, int n2_, double h_, double o1 = 0.0, double o2 = 0.0)
      : n1(n1_), n2(n2_), h(h_), origin1(o1), origin2(o2) {
    validate();
  }

  /// n x n cells covering [-0.5, 0.5]^2.
  static GridGeometry centered_unit_square(int n) { return GridGeometry(n, n, 1.0 / n, -0.5, -0.5); }

  void validate() const {
    if (n1 < 2 || n2 < 2) throw InvalidArgument("grid needs at least 2x2 cells");
    if (!(h > 0.0) || !std::isfinite(h)) throw InvalidArgument("cell size must be positive");
  }

  int cells() const { return n1 * n2; }
  int nodes() const { return (n1 + 1) * (n2 + 1); }
  int u1_count() const { return n1 * (n2 + 1); }
  int u2_count() const { return (n1 + 1) * n2; }
  int unknowns() const { return u1_count() + u2_count(); }

  int cell_index(int i, int j) const { return j * n1 + i; }
  int node_index(int i, int j) const { return j * (n1 + 1) + i; }
  /// Index into the u1 block (also the index in the concatenated vector).
  int u1_index(int i, int j) const { return j * n1 + i; }
  /// Index into the u2 block; add u1_count() for the concatenated vector.
  int u2_index(int i, int j) const { return j * (n1 + 1) + i; }

  Point node(int i, int j) const { return {origin1 + i * h, origin2 + j * h}; }
  Point cell_center(int i, int j) const { return {origin1 + (i + 0.5) * h, origin2 + (j + 0.5) * h}; }
  Point u1_point(int i, int j) const { return {origin1 + (i + 0.5) * h, origin2 + j * h}; }
  Point u2_point(int i, int j) const { return {origin1 + i * h, origin2 + (j + 0.5) * h}; }

  double extent1() const { return n1 * h; }
  double extent2() const { return n2 * h; }

  bool can_coarsen() const { return n1 % 2 == 0 && n2 % 2 == 0 && n1 >= 4 && n2 >= 4; }

  GridGeometry coarsened() const {
    if (!can_coarsen())
      throw CoarseningError("cannot coarsen a " + std::to_string(n1) + "x" + std::to_string(n2) + " grid");
    return GridGeometry(n1 / 2, n2 / 2, 2.0 * h, origin1, origin2);
  }

  bool operator==(const GridGeometry& o) const {
    return n1 == o.n1 && n2 == o.n2 && h == o.h && origin1 == o.origin1 && origin2 == o.origin2;
  }
  bool operator!=(const GridGeometry& o) const { return !(*this == o); }
};

inline void require_same_geometry(const GridGeometry& a, const GridGeometry& b, const char* what) {
  if (a != b) throw DimensionMismatch(std::string("geometry mismatch: ") + what);
}

/// Scalar values at cell centers.
struct CellField {
  GridGeometry geometry;
  Vector values;

  CellField() = default;
  explicit CellField(const GridGeometry& g, double fill = 0.0) : geometry(g), values(Vector::Constant(g.cells(), fill)) {}
  CellField(const GridGeometry& g, Vector v) : geometry(g), values(std::move(v)) {
    if (values.size() != g.cells()) throw DimensionMismatch("cell field size");
  }

  double& operator()(int i, int j) { return values[geometry.cell_index(i, j)]; }
  double operator()(int i, int j) const { return values[geometry.cell_index(i, j)]; }

  template <class F>
  static CellField sample(const GridGeometry& g, F&& f) {
    CellField out(g);
    for (int j = 0; j < g.n2; ++j)
      for (int i = 0; i < g.n1; ++i) out(i, j) = f(g.cell_center(i, j));
    return out;
  }
};

/// Scalar values at grid nodes.
struct NodeField {
  GridGeometry geometry;
  Vector values;

  NodeField() = default;
  explicit NodeField(const GridGeometry& g, double fill = 0.0) : geometry(g), values(Vector::Constant(g.nodes(), fill)) {}
  NodeField(const GridGeometry& g, Vector v) : geometry(g), values(std::move(v)) {
    if (values.size() != g.nodes()) throw DimensionMismatch("node field size");
  }

  double& operator()(int i, int j) { return values[geometry.node_index(i, j)]; }
  double operator()(int i, int j) const { return values[geometry.node_index(i, j)]; }

  template <class F>
  static NodeField sample(const GridGeometry& g, F&& f) {
    NodeField out(g);
    for (int j = 0; j <= g.n2; ++j)
      for (int i = 0; i <= g.n1; ++i) out(i, j) = f(g.node(i, j));
    return out;
  }
};

/// Edge-located displacement u^h = (u1, u2), in the same length units as h.
struct StaggeredField {
  GridGeometry geometry;
  Vector u1;
  Vector u2;

  StaggeredField() = default;
  explicit StaggeredField(const GridGeometry& g)
      : geometry(g), u1(Vector::Zero(g.u1_count())), u2(Vector::Zero(g.u2_count())) {}

  static StaggeredField from_vector(const GridGeometry& g, const Vector& v) {
    if (v.size() != g.unknowns()) throw DimensionMismatch("staggered vector size");
    StaggeredField f(g);
    f.u1 = v.head(g.u1_count());
    f.u2 = v.tail(g.u2_count());
    return f;
  }

  Vector vector() const {
    Vector v(geometry.unknowns());
    v << u1, u2;
    return v;
  }

  double& at1(int i, int j) { return u1[geometry.u1_index(i, j)]; }
  double at1(int i, int j) const { return u1[geometry.u1_index(i, j)]; }
  double& at2(int i, int j) { return u2[geometry.u2_index(i, j)]; }
  double at2(int i, int j) const { return u2[geometry.u2_index(i, j)]; }

  /// True when u1 vanishes on the bottom/top rows and u2 on the left/right columns.
  bool is_boundary_constrained() const {
    const auto& g = geometry;
    for (int i = 0; i < g.n1; ++i)
      if (at1(i, 0) != 0.0 || at1(i, g.n2) != 0.0) return false;
    for (int j = 0; j < g.n2; ++j)
      if (at2(0, j) != 0.0 || at2(g.n1, j) != 0.0) return false;
    return true;
  }

  void constrain() {
    const auto& g = geometry;
    for (int i = 0; i < g.n1; ++i) at1(i, 0) = at1(i, g.n2) = 0.0;
    for (int j = 0; j < g.n2; ++j) at2(0, j) = at2(g.n1, j) = 0.0;
  }

  double max_abs() const { return std::max(u1.cwiseAbs().maxCoeff(), u2.cwiseAbs().maxCoeff()); }

  template <class F1, class F2>
  static StaggeredField sample(const GridGeometry& g, F1&& f1, F2&& f2) {
    StaggeredField out(g);
    for (int j = 0; j <= g.n2; ++j)
      for (int i = 0; i < g.n1; ++i) out.at1(i, j) = f1(g.u1_point(i, j));
    for (int j = 0; j < g.n2; ++j)
      for (int i = 0; i <= g.n1; ++i) out.at2(i, j) = f2(g.u2_point(i, j));
    return out;
  }
};

/// Selection of a subset of a full lattice vector (the unconstrained entries).
class DofMap {
 public:
  DofMap() = default;
  DofMap(int full_size, std::vector<int> free) : full_size_(full_size), free_(std::move(free)), slot_(full_size, -1) {
    for (int k = 0; k < static_cast<int>(free_.size()); ++k) slot_[free_[k]] = k;
  }

  int full_size() const { return full_size_; }
  int size() const { return static_cast<int>(free_.size()); }
  const std::vector<int>& free_indices() const { return free_; }
  /// Reduced position of a full index, or -1 when constrained.
  int slot(int full_index) const { return slot_[full_index]; }

  Vector gather(const Vector& full) const {
    if (full.size() != full_size_) throw DimensionMismatch("dof gather size");
    Vector out(size());
    for (int k = 0; k < size(); ++k) out[k] = full[free_[k]];
    return out;
  }

  Vector scatter(const Vector& reduced) const {
    if (reduced.size() != size()) throw DimensionMismatch("dof scatter size");
    Vector out = Vector::Zero(full_size_);
    for (int k = 0; k < size(); ++k) out[free_[k]] = reduced[k];
    return out;
  }

  /// Embedding E (full x reduced) with E^T the gather.
  SparseOperator embedding() const {
    Triplets t;
    t.reserve(free_.size());
    for (int k = 0; k < size(); ++k) t.emplace_back(free_[k], k, 1.0);
    SparseOperator e(full_size_, size());
    e.setFromTriplets(t.begin(), t.end());
    return e;
  }

 private:
  int full_size_ = 0;
  std::vector<int> free_;
  std::vector<int> slot_;
};

/// Displacement unknowns not fixed by the homogeneous Dirichlet condition.
inline DofMap free_displacement_dofs(const GridGeometry& g) {
  std::vector<int> free;
  free.reserve(g.n1 * (g.n2 - 1) + (g.n1 - 1) * g.n2);
  for (int j = 1; j < g.n2; ++j)
    for (int i = 0; i < g.n1; ++i) free.push_back(g.u1_index(i, j));
  for (int j = 0; j < g.n2; ++j)
    for (int i = 1; i < g.n1; ++i) free.push_back(g.u1_count() + g.u2_index(i, j));
  return DofMap(g.unknowns(), std::move(free));
}

inline DofMap interior_node_dofs(const GridGeometry& g) {
  std::vector<int> free;
  free.reserve((g.n1 - 1) * (g.n2 - 1));
  for (int j = 1; j < g.n2; ++j)
    for (int i = 1; i < g.n1; ++i) free.push_back(g.node_index(i, j));
  return DofMap(g.nodes(), std::move(free));
}

inline SparseOperator make_sparse(int rows, int cols, const Triplets& t) {
  SparseOperator s(rows, cols);
  s.setFromTriplets(t.begin(), t.end());
  s.makeCompressed();
  return s;
}

/// Restricts an operator to the free rows/columns: E_rows^T * op * E_cols.
inline SparseOperator reduce(const SparseOperator& op, const DofMap& rows, const DofMap& cols) {
  if (op.rows() != rows.full_size() || op.cols() != cols.full_size()) throw DimensionMismatch("reduce operator");
  Triplets t;
  t.reserve(op.nonZeros());
  for (int r = 0; r < op.outerSize(); ++r) {
    const int rr = rows.slot(r);
    if (rr < 0) continue;
    for (SparseOperator::InnerIterator it(op, r); it; ++it) {
      const int cc = cols.slot(static_cast<int>(it.col()));
      if (cc >= 0) t.emplace_back(rr, cc, it.value());
    }
  }
  return make_sparse(rows.size(), cols.size(), t);
}

/// Restricts only the columns (rows stay full).
inline SparseOperator reduce_cols(const SparseOperator& op, const DofMap& cols) {
  if (op.cols() != cols.full_size()) throw DimensionMismatch("reduce columns");
  Triplets t;
  t.reserve(op.nonZeros());
  for (int r = 0; r < op.outerSize(); ++r)
    for (SparseOperator::InnerIterator it(op, r); it; ++it) {
      const int cc = cols.slot(static_cast<int>(it.col()));
      if (cc >= 0) t.emplace_back(r, cc, it.value());
    }
  return make_sparse(static_cast<int>(op.rows()), cols.size(), t);
}

inline int max_row_nonzeros(const SparseOperator& op) {
  int best = 0;
  for (int r = 0; r < op.outerSize(); ++r) {
    int count = 0;
    for (SparseOperator::InnerIterator it(op, r); it; ++it)
      if (it.value() != 0.0) ++count;
    best = std::max(best, count);
  }
  return best;
}

}  // namespace mpreg
