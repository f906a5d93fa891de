#include <gtest/gtest.h>

#include "mpreg/multigrid.hpp"
#include "test_support.hpp"

using namespace mpreg;

TEST(Multigrid, HierarchyStopsAtSmallGrids) {
  const ElasticMultigrid mg(GridGeometry::centered_unit_square(64), 1.0, 0.0);
  EXPECT_EQ(mg.depth(), 4);
  EXPECT_EQ(mg.coarsest_geometry().n1, 8);
  const ElasticMultigrid small(GridGeometry::centered_unit_square(6), 1.0, 0.0);
  EXPECT_EQ(small.depth(), 1);
}

TEST(Multigrid, ZeroRightHandSide) {
  for (double lambda : {0.0, 10.0}) {
    const ElasticMultigrid mg(GridGeometry::centered_unit_square(32), 1.0, lambda);
    const int n = mg.fine_operator().dofs.size();
    EXPECT_EQ(fixtures::max_abs(mg.vcycle(Vector::Zero(n), Vector::Zero(n))), 0.0);
    EXPECT_EQ(fixtures::max_abs(mg.apply_inverse(Vector::Zero(n))), 0.0);
  }
}

TEST(Multigrid, SingleLevelIsExact) {
  const ElasticMultigrid mg(GridGeometry::centered_unit_square(8), 1.0, 0.0);
  const Vector f = fixtures::random_vector(mg.fine_operator().dofs.size(), 1);
  EXPECT_LE(fixtures::max_abs(mg.fine_operator().A * mg.apply_inverse(f) - f), 1e-12);
}

TEST(Multigrid, ApplyInverseIsLinear) {
  const ElasticMultigrid mg(GridGeometry::centered_unit_square(16), 1.0, 3.0);
  const int n = mg.fine_operator().dofs.size();
  const Vector a = fixtures::random_vector(n, 2);
  const Vector b = fixtures::random_vector(n, 3);
  const Vector lhs = mg.apply_inverse(2.0 * a - b, 2);
  const Vector rhs = 2.0 * mg.apply_inverse(a, 2) - mg.apply_inverse(b, 2);
  EXPECT_LE(fixtures::max_abs(lhs - rhs), 1e-12 * fixtures::max_abs(rhs));
}

TEST(Multigrid, GaussSeidelCyclesContract) {
  const ElasticMultigrid mg(GridGeometry::centered_unit_square(32), 1.0, 0.0);
  const Vector f = fixtures::random_vector(mg.system_size(), 4);
  EXPECT_LE(mg.contraction_factor(f), 0.5);
}

TEST(Multigrid, DistributiveCyclesContract) {
  for (double lambda : {1.0, 1000.0}) {
    const ElasticMultigrid mg(GridGeometry::centered_unit_square(32), 1.0, lambda);
    ASSERT_TRUE(mg.augmented());
    const Vector b = mg.system_rhs(fixtures::random_vector(mg.fine_operator().dofs.size(), 5));
    EXPECT_LE(mg.contraction_factor(b), 0.5) << "lambda = " << lambda;
  }
}

TEST(Multigrid, AugmentedCyclesSolveTheElasticProblem) {
  const ElasticMultigrid mg(GridGeometry::centered_unit_square(32), 1.0, 10.0);
  const Vector f = fixtures::random_vector(mg.fine_operator().dofs.size(), 6);
  const Vector u = mg.apply_inverse(f, 30);
  EXPECT_LE((mg.fine_operator().A * u - f).norm(), 1e-8 * f.norm());
}
