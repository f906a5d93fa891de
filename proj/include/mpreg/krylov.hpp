#pragma once

// Restarted, left-preconditioned GMRES with modified Gram-Schmidt Arnoldi and
// Givens rotations.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mpreg/error.hpp"
#include "mpreg/grid.hpp"

namespace mpreg {

/// y = Op(x); y is resized by the callee.
using LinearMap = std::function<void(const Vector& x, Vector& y)>;

struct GmresOptions {
  double rel_tol = 1e-8;
  int max_iter = 500;
  int restart = 50;
};

struct GmresResult {
  Vector x;
  int iterations = 0;
  double relative_residual = 0.0;  ///< ||P^{-1}(b - K x)|| / ||P^{-1} b||
  bool converged = false;
  std::vector<double> history;  ///< relative preconditioned residual after each iteration (entry 0: start)
};

/// Solves K x = b. The stopping test uses the preconditioned residual.
/// `precond` may be empty (identity).
inline GmresResult gmres(const LinearMap& K, const Vector& b, const LinearMap& precond, const Vector& x0,
                         const GmresOptions& opt = {}) {
  if (!(opt.rel_tol > 0.0 && opt.rel_tol < 1.0)) throw InvalidArgument("GMRES tolerance must lie in (0, 1)");
  if (opt.restart < 1 || opt.max_iter < 0) throw InvalidArgument("GMRES restart/max_iter");
  const Eigen::Index n = b.size();
  if (x0.size() != n) throw DimensionMismatch("GMRES initial guess size");

  auto apply_prec = [&](const Vector& v, Vector& out) {
    if (precond) {
      precond(v, out);
    } else {
      out = v;
    }
  };

  GmresResult res;
  res.x = x0;
  Vector tmp(n);
  Vector pb(n);
  apply_prec(b, pb);
  const double bnorm = pb.norm();
  if (bnorm == 0.0) {
    res.x.setZero();
    res.converged = true;
    res.history.push_back(0.0);
    return res;
  }
  const double target = opt.rel_tol * bnorm;
  const int m = opt.restart;

  std::vector<Vector> V(m + 1, Vector(n));
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(m + 1, m);
  Vector cs(m), sn(m), g(m + 1);
  Vector w(n), r(n);

  while (true) {
    K(res.x, tmp);
    apply_prec(b - tmp, r);
    const double beta = r.norm();
    res.relative_residual = beta / bnorm;
    if (res.history.empty()) res.history.push_back(res.relative_residual);
    if (beta <= target) {
      res.converged = true;
      return res;
    }
    if (res.iterations >= opt.max_iter) return res;

    V[0] = r / beta;
    g.setZero();
    g[0] = beta;
    H.setZero();
    int j = 0;
    for (; j < m && res.iterations < opt.max_iter; ++j) {
      K(V[j], tmp);
      apply_prec(tmp, w);
      const double wnorm0 = w.norm();
      for (int i = 0; i <= j; ++i) {
        H(i, j) = w.dot(V[i]);
        w -= H(i, j) * V[i];
      }
      H(j + 1, j) = w.norm();
      for (int i = 0; i < j; ++i) {
        const double a = H(i, j);
        const double c = H(i + 1, j);
        H(i, j) = cs[i] * a + sn[i] * c;
        H(i + 1, j) = -sn[i] * a + cs[i] * c;
      }
      const double hjj = H(j, j);
      const double hj1 = H(j + 1, j);
      const double rho = std::hypot(hjj, hj1);
      const bool breakdown = hj1 <= 1e-14 * std::max(wnorm0, 1e-300);
      if (rho == 0.0) throw SolverError("GMRES breakdown: singular Hessenberg column");
      cs[j] = hjj / rho;
      sn[j] = hj1 / rho;
      H(j, j) = rho;
      H(j + 1, j) = 0.0;
      g[j + 1] = -sn[j] * g[j];
      g[j] = cs[j] * g[j];
      ++res.iterations;
      const double resid = std::abs(g[j + 1]);
      res.history.push_back(resid / bnorm);
      if (resid <= target) {
        ++j;
        break;
      }
      if (breakdown) {
        throw SolverError("GMRES breakdown at iteration " + std::to_string(res.iterations) +
                          " with relative residual " + std::to_string(resid / bnorm));
      }
      V[j + 1] = w / hj1;
    }
    // Back substitution on the j x j triangle.
    Vector y = H.topLeftCorner(j, j).triangularView<Eigen::Upper>().solve(g.head(j));
    for (int i = 0; i < j; ++i) res.x += y[i] * V[i];
  }
}

/// Wraps a sparse matrix as a LinearMap.
inline LinearMap as_linear_map(const SparseOperator& A) {
  return [&A](const Vector& x, Vector& y) { y = A * x; };
}

}  // namespace mpreg
