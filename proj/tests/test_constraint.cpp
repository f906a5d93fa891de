#include <gtest/gtest.h>

#include "mpreg/constraint.hpp"
#include "test_support.hpp"

using namespace mpreg;

namespace {

// Affine displacement (a x1, b x2) about the domain center, applied on a central block of
// edges large enough that every cell inside the inner block sees only affine corner values.
StaggeredField affine_patch(const GridGeometry& g, double a, double b, int lo, int hi) {
  StaggeredField u(g);
  for (int j = lo; j <= hi; ++j)
    for (int i = lo - 1; i <= hi; ++i) u.at1(i, j) = a * g.u1_point(i, j).x1;
  for (int j = lo - 1; j <= hi; ++j)
    for (int i = lo; i <= hi; ++i) u.at2(i, j) = b * g.u2_point(i, j).x2;
  return u;
}

}  // namespace

TEST(Volume, IdentityHasUnitVolume) {
  const GridGeometry g(7, 5, 0.3, 1.0, 2.0);
  const CellField v = volume(StaggeredField(g));
  EXPECT_EQ(fixtures::max_abs(v.values.array() - 1.0), 0.0);
  const auto m = min_volume(StaggeredField(g));
  EXPECT_EQ(m.value, 1.0);
  EXPECT_TRUE(is_diffeomorphic(StaggeredField(g), 0.03));
  EXPECT_TRUE(is_diffeomorphic(StaggeredField(g), 0.0));
}

TEST(Volume, AffinePatchIsExact) {
  const GridGeometry g(16, 16, 1.0 / 16, -0.5, -0.5);
  const auto u = affine_patch(g, 0.1, 0.1, 4, 12);
  const CellField v = volume(u);
  for (int j = 5; j < 11; ++j)
    for (int i = 5; i < 11; ++i) EXPECT_NEAR(v(i, j), 1.21, 1e-12);
}

TEST(Volume, TranslationInvariance) {
  // A uniform shift of all node displacements around a cell leaves its area unchanged.
  const GridGeometry g(10, 10, 0.1);
  auto u = fixtures::random_displacement(g, 4, 0.01);
  const double before = volume(u)(5, 5);
  for (int j = 4; j <= 7; ++j)
    for (int i = 3; i <= 6; ++i) u.at1(i, j) += 0.02;
  EXPECT_NEAR(volume(u)(5, 5), before, 1e-13);
}

TEST(Volume, CrossedCellIsNegative) {
  const GridGeometry g(4, 4, 1.0);
  StaggeredField u(g);
  // Push the node (2,2) far beyond the opposite corner of cell (1,1).
  u.at1(1, 2) = u.at1(2, 2) = -1.8;
  u.at2(2, 1) = u.at2(2, 2) = -1.8;
  const auto m = min_volume(u);
  EXPECT_LT(m.value, 0.0);
  EXPECT_EQ(m.cell, g.cell_index(1, 1));
  EXPECT_FALSE(is_diffeomorphic(u, 0.03));
}

TEST(VolumeDerivative, SingleEdgeMatchesFiniteDifference) {
  const GridGeometry g(6, 6, 0.2);
  Vector e = Vector::Zero(g.unknowns());
  e[g.u1_index(2, 3)] = 1.0;
  const double eps = 1e-6;
  const Vector fd = (volume(StaggeredField::from_vector(g, eps * e)).values -
                     volume(StaggeredField::from_vector(g, -eps * e)).values) /
                    (2 * eps);
  const Vector an = volume_derivative(StaggeredField(g)) * e;
  EXPECT_LE(fixtures::max_abs(an - fd), 1e-7);
  EXPECT_EQ(fixtures::max_abs(volume_derivative(StaggeredField(g)) * Vector::Zero(g.unknowns())), 0.0);
}

TEST(VolumeDerivative, LinearizationAtIdentityIsCellDivergence) {
  const GridGeometry g(9, 7, 0.25);
  const auto v = fixtures::random_displacement(g, 6, 1.0);
  const Vector dv = volume_derivative(StaggeredField(g)) * v.vector();
  // At u = 0 the area derivative is the averaged flux balance of the cell.
  for (int j = 0; j < g.n2; ++j)
    for (int i = 0; i < g.n1; ++i) {
      auto n1 = [&](int a, int b) { return (a > 0 && a < g.n1) ? 0.5 * (v.at1(a - 1, b) + v.at1(a, b)) : 0.0; };
      auto n2 = [&](int a, int b) { return (b > 0 && b < g.n2) ? 0.5 * (v.at2(a, b - 1) + v.at2(a, b)) : 0.0; };
      const double d1 = 0.5 * (n1(i + 1, j) + n1(i + 1, j + 1) - n1(i, j) - n1(i, j + 1)) / g.h;
      const double d2 = 0.5 * (n2(i, j + 1) + n2(i + 1, j + 1) - n2(i, j) - n2(i + 1, j)) / g.h;
      EXPECT_NEAR(dv[g.cell_index(i, j)], d1 + d2, 1e-12);
    }
}

TEST(VolumeDerivative, FullJacobianMatchesFiniteDifferences) {
  for (int n : {8, 12}) {
    const GridGeometry g(n, n, 1.0 / n);
    const auto u = fixtures::random_displacement(g, 20 + n, 0.2 / n);
    const SparseOperator D = volume_derivative(u);
    EXPECT_LE(max_row_nonzeros(D), 12);
    const Eigen::MatrixXd Dd = Eigen::MatrixXd(D);
    const double eps = 1e-6;
    for (int k = 0; k < g.unknowns(); ++k) {
      Vector e = Vector::Zero(g.unknowns());
      e[k] = eps;
      const Vector fd =
          (volume(StaggeredField::from_vector(g, u.vector() + e)).values -
           volume(StaggeredField::from_vector(g, u.vector() - e)).values) / (2 * eps);
      EXPECT_LE(fixtures::max_abs(Dd.col(k) - fd), 1e-6 * std::max(1.0, fixtures::max_abs(fd)));
    }
  }
}

TEST(Constraint, SimpleResiduals) {
  const GridGeometry g(6, 6, 1.0 / 6);
  const CellField ref(g, fixtures::random_vector(g.cells(), 1, 0.5, 1.0));
  const auto same = evaluate_constraint(StaggeredField(g), BSplineImage::fit(ref), ref);
  EXPECT_LE(fixtures::max_abs(same.residual.values), 1e-10);
  const auto e = evaluate_constraint(StaggeredField(g), BSplineImage::fit(CellField(g, 1.0)), CellField(g, 2.0));
  EXPECT_LE(fixtures::max_abs(e.residual.values.array() + 1.0), 1e-13);
  EXPECT_EQ(e.jacobian.rows(), g.cells());
  EXPECT_EQ(e.jacobian.cols(), g.unknowns());
}

TEST(Constraint, JacobianMatchesFiniteDifferences) {
  for (int n : {8, 12}) {
    const GridGeometry g(n, n, 1.0 / n, -0.5, -0.5);
    const CellField tmpl(g, fixtures::random_vector(g.cells(), 30 + n, 0.2, 1.0));
    const CellField ref(g, fixtures::random_vector(g.cells(), 40 + n, 0.2, 1.0));
    const auto model = BSplineImage::fit(tmpl);
    const auto u = fixtures::random_displacement(g, 50 + n, 0.2 / n);
    const auto ev = evaluate_constraint(u, model, ref);
    EXPECT_LE(max_row_nonzeros(ev.jacobian), 16);
    const Eigen::MatrixXd B = Eigen::MatrixXd(ev.jacobian);
    const double eps = 1e-6;
    double worst = 0.0;
    for (int k = 0; k < g.unknowns(); ++k) {
      Vector e = Vector::Zero(g.unknowns());
      e[k] = eps;
      const Vector cp = evaluate_constraint(StaggeredField::from_vector(g, u.vector() + e), model, ref, false).residual.values;
      const Vector cm = evaluate_constraint(StaggeredField::from_vector(g, u.vector() - e), model, ref, false).residual.values;
      const Vector fd = (cp - cm) / (2 * eps);
      worst = std::max(worst, fixtures::max_abs(B.col(k) - fd) / std::max(1.0, fixtures::max_abs(fd)));
    }
    EXPECT_LE(worst, 1e-6) << "n = " << n;
  }
}

TEST(Constraint, GeometryMismatchIsRejected) {
  const GridGeometry g(6, 6, 1.0);
  const GridGeometry other(6, 6, 0.5);
  EXPECT_THROW(evaluate_constraint(StaggeredField(g), BSplineImage::fit(CellField(other, 1.0)), CellField(g, 1.0)),
               DimensionMismatch);
}
