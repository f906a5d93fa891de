#include <gtest/gtest.h>

#include <Eigen/Dense>

#include "mpreg/krylov.hpp"
#include "test_support.hpp"

using namespace mpreg;

namespace {

LinearMap dense_map(const Eigen::MatrixXd& M) {
  return [M](const Vector& x, Vector& y) { y = M * x; };
}

}  // namespace

TEST(Gmres, IdentityConvergesInOneIteration) {
  const Vector b = fixtures::random_vector(10, 1);
  const auto r = gmres(dense_map(Eigen::MatrixXd::Identity(10, 10)), b, {}, Vector::Zero(10));
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.iterations, 1);
  EXPECT_LE(fixtures::max_abs(r.x - b), 1e-14);
}

TEST(Gmres, DiagonalSystem) {
  Eigen::MatrixXd K(2, 2);
  K << 2, 0, 0, 3;
  const auto r = gmres(dense_map(K), Vector::Constant(2, 1.0).cwiseProduct(Vector(K.diagonal())), {}, Vector::Zero(2),
                       {1e-12, 10, 10});
  EXPECT_NEAR(r.x[0], 1.0, 1e-12);
  EXPECT_NEAR(r.x[1], 1.0, 1e-12);
}

TEST(Gmres, MatchesDenseSolve) {
  const int n = 20;
  Eigen::MatrixXd K = Eigen::MatrixXd::Identity(n, n) * 4.0;
  K += Eigen::Map<const Eigen::MatrixXd>(fixtures::random_vector(n * n, 2).data(), n, n);
  const Vector b = fixtures::random_vector(n, 3);
  const Vector exact = K.partialPivLu().solve(b);
  const auto r = gmres(dense_map(K), b, {}, Vector::Zero(n), {1e-12, 200, 50});
  EXPECT_TRUE(r.converged);
  EXPECT_LE(fixtures::max_abs(r.x - exact), 1e-8);
}

TEST(Gmres, RestartedAndPreconditioned) {
  const int n = 40;
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    K(i, i) = 2.0 + i;
    if (i > 0) K(i, i - 1) = -1.0;
    if (i + 1 < n) K(i, i + 1) = -0.5;
  }
  const Vector b = fixtures::random_vector(n, 4);
  const Vector dinv = K.diagonal().cwiseInverse();
  LinearMap jacobi = [dinv](const Vector& x, Vector& y) { y = dinv.cwiseProduct(x); };
  const auto r = gmres(dense_map(K), b, jacobi, Vector::Zero(n), {1e-10, 500, 5});
  EXPECT_TRUE(r.converged);
  EXPECT_LE(fixtures::max_abs(K * r.x - b), 1e-8 * fixtures::max_abs(b) * n);
}

TEST(Gmres, ResidualHistoryIsNonIncreasingWithinACycle) {
  const int n = 30;
  Eigen::MatrixXd K = Eigen::MatrixXd::Identity(n, n) * 3.0;
  K += Eigen::Map<const Eigen::MatrixXd>(fixtures::random_vector(n * n, 5).data(), n, n);
  const auto r = gmres(dense_map(K), fixtures::random_vector(n, 6), {}, Vector::Zero(n), {1e-10, 100, 100});
  for (std::size_t k = 1; k < r.history.size(); ++k) EXPECT_LE(r.history[k], r.history[k - 1] * (1 + 1e-12));
}

TEST(Gmres, ReportsNonConvergenceWithoutThrowing) {
  const int n = 50;
  Eigen::MatrixXd K = Eigen::MatrixXd::Identity(n, n);
  for (int i = 0; i < n; ++i) K(i, i) = 1.0 + 100.0 * i;
  const auto r = gmres(dense_map(K), Vector::Ones(n), {}, Vector::Zero(n), {1e-12, 3, 3});
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.iterations, 3);
}

TEST(Gmres, ZeroRightHandSide) {
  const auto r = gmres(dense_map(Eigen::MatrixXd::Identity(4, 4)), Vector::Zero(4), {}, Vector::Ones(4));
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(fixtures::max_abs(r.x), 0.0);
}

TEST(Gmres, RejectsBadOptions) {
  EXPECT_THROW(gmres(dense_map(Eigen::MatrixXd::Identity(2, 2)), Vector::Ones(2), {}, Vector::Zero(2), {1.5, 10, 10}),
               InvalidArgument);
  EXPECT_THROW(gmres(dense_map(Eigen::MatrixXd::Identity(2, 2)), Vector::Ones(2), {}, Vector::Zero(3)),
               DimensionMismatch);
}

TEST(Gmres, SingularSystemBreakdownIsAnError) {
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(3, 3);
  K(0, 0) = 1.0;
  Vector b(3);
  b << 0.0, 1.0, 0.0;
  EXPECT_THROW(gmres(dense_map(K), b, {}, Vector::Zero(3), {1e-10, 10, 10}), SolverError);
}
