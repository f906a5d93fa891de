#pragma once

#include <random>

#include "mpreg/constraint.hpp"
#include "mpreg/grid.hpp"

namespace mpreg::fixtures {

inline Vector random_vector(Eigen::Index n, unsigned seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  Vector v(n);
  for (Eigen::Index k = 0; k < n; ++k) v[k] = dist(rng);
  return v;
}

/// Random displacement that vanishes on the constrained walls.
inline StaggeredField random_displacement(const GridGeometry& g, unsigned seed, double scale) {
  StaggeredField u = StaggeredField::from_vector(g, scale * random_vector(g.unknowns(), seed));
  u.constrain();
  return u;
}

inline double max_abs(const Vector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

/// Displacement that shifts grid column `col` (interior rows) by `shift` along x1, which
/// compresses the cells of column col + 1 to V = 1 - shift / (2h).
inline StaggeredField column_shift(const GridGeometry& g, int col, double shift) {
  StaggeredField du(g);
  for (int j = 1; j < g.n2; ++j) du.at1(col, j) = shift;
  return du;
}

/// Folding line-search instance on an 8 x 8 grid: u = 0, constant template, and a
/// reference equal to the volumes of 0.25 * du, where du compresses one column to
/// V = 1 - 3 tau. du folds that column for tau >= 1/3 and is exactly feasible at tau = 0.25.
struct FoldingInstance {
  CellField reference;
  CellField templ;
  StaggeredField du;
};

inline FoldingInstance folding_instance() {
  const GridGeometry g(8, 8, 1.0 / 8);
  FoldingInstance f{CellField(g), CellField(g, 1.0), column_shift(g, 3, 6.0 * g.h)};
  StaggeredField quarter = f.du;
  quarter.u1 *= 0.25;
  f.reference = volume(quarter);
  return f;
}

}  // namespace mpreg::fixtures
