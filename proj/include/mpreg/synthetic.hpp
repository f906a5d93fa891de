#pragma once

// Benchmark problems: the analytic tailored deformation (Ex1) and a seeded
// multi-blob image pair with a small relative shift (Ex2 stand-in).

#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "mpreg/elastic.hpp"
#include "mpreg/error.hpp"
#include "mpreg/grid.hpp"
#include "mpreg/image.hpp"

namespace mpreg {

namespace ex1 {

inline constexpr double kPi = std::numbers::pi;

/// q(z) = (-z^2/(8 pi) + 1/(256 pi^3) + 1/(32 pi)) cos(8 pi z) + z sin(8 pi z) / (32 pi^2)
inline double q(double z) {
  const double a = -z * z / (8.0 * kPi) + 1.0 / (256.0 * kPi * kPi * kPi) + 1.0 / (32.0 * kPi);
  return a * std::cos(8.0 * kPi * z) + z * std::sin(8.0 * kPi * z) / (32.0 * kPi * kPi);
}

/// q'(z) = (z^2 - 1/4) sin(8 pi z)
inline double q_prime(double z) { return (z * z - 0.25) * std::sin(8.0 * kPi * z); }

inline double q_second(double z) {
  return 2.0 * z * std::sin(8.0 * kPi * z) + 8.0 * kPi * (z * z - 0.25) * std::cos(8.0 * kPi * z);
}

}  // namespace ex1

/// phi_e(x) = x + u_e(x), u_e = 4 (q'(x1) q(x2), q(x1) q'(x2)) on [-0.5, 0.5]^2.
struct AnalyticDeformation {
  static Point displacement(Point x) {
    return {4.0 * ex1::q_prime(x.x1) * ex1::q(x.x2), 4.0 * ex1::q(x.x1) * ex1::q_prime(x.x2)};
  }

  static Point phi(Point x) {
    const Point u = displacement(x);
    return {x.x1 + u.x1, x.x2 + u.x2};
  }

  /// Row-major gradient of phi: {d phi1/dx1, d phi1/dx2, d phi2/dx1, d phi2/dx2}.
  static std::array<double, 4> gradient(Point x) {
    const double off = 4.0 * ex1::q_prime(x.x1) * ex1::q_prime(x.x2);
    return {1.0 + 4.0 * ex1::q_second(x.x1) * ex1::q(x.x2), off, off, 1.0 + 4.0 * ex1::q(x.x1) * ex1::q_second(x.x2)};
  }

  static double det(Point x) {
    const auto g = gradient(x);
    return g[0] * g[3] - g[1] * g[2];
  }
};

struct Ex1Problem {
  CellField reference;         ///< det(grad phi_e) at the cell centers (mass-normalized, see build_ex1)
  CellField templ;             ///< identically one
  StaggeredField ground_truth; ///< u_e sampled at the edge midpoints (includes the small tangential wall slip)
  double elas_max = 0.0;       ///< S^h(ground_truth) with mu = 1, lambda = 0
  double mass_scale = 1.0;     ///< factor applied to the sampled determinant
};

/// Raw cell-center samples of det(grad phi_e).
inline CellField sample_ex1_reference(const GridGeometry& g) {
  return CellField::sample(g, [](Point p) { return AnalyticDeformation::det(p); });
}

/// Ex1 on n x n cells over [-0.5, 0.5]^2. The discrete volumes of any displacement that keeps
/// the wall nodes on the walls sum to exactly n^2, so the sampled reference is scaled to
/// the same total (a relative change of O(h^2)) to make the discrete constraint consistent.
inline Ex1Problem build_ex1(int n, bool normalize_mass = true) {
  if (n < 16) throw InvalidArgument("Ex1 needs at least 16 cells per side");
  const GridGeometry g = GridGeometry::centered_unit_square(n);
  Ex1Problem p;
  p.reference = sample_ex1_reference(g);
  if (normalize_mass) {
    p.mass_scale = static_cast<double>(g.cells()) / p.reference.values.sum();
    p.reference.values *= p.mass_scale;
  }
  p.templ = CellField(g, 1.0);
  p.ground_truth = StaggeredField::sample(
      g, [](Point x) { return AnalyticDeformation::displacement(x).x1; },
      [](Point x) { return AnalyticDeformation::displacement(x).x2; });
  p.elas_max = energy(assemble_elastic(g, 1.0, 0.0), p.ground_truth);
  return p;
}

struct ImagePair {
  CellField reference;
  CellField templ;
};

struct Ex2Options {
  int blobs = 6;
  double shift_pixels = 2.0;  ///< template content is displaced by this many cells along (1, 1)/sqrt(2)
  double width_min = 0.02;
  double width_max = 0.05;
  double delta = 0.03;
};

/// Smooth positive blob images on the unit square, h = 1/n. The template is the
/// reference content translated by a couple of pixels; both pass through preprocess.
inline ImagePair build_ex2_synthetic(int n, unsigned seed, const Ex2Options& opt = {}) {
  if (n < 8 || n % 4 != 0) throw InvalidArgument("Ex2 size must be a multiple of 4 (at least 8)");
  const GridGeometry g(n, n, 1.0 / n);
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> center(0.3, 0.7);
  std::uniform_real_distribution<double> width(opt.width_min, opt.width_max);
  std::uniform_real_distribution<double> amplitude(0.5, 1.0);
  struct Blob {
    double c1, c2, s, a;
  };
  std::vector<Blob> blobs;
  for (int k = 0; k < opt.blobs; ++k) {
    const double c1 = center(rng);
    const double c2 = center(rng);
    const double s = width(rng);
    blobs.push_back({c1, c2, s, amplitude(rng)});
  }
  const double d = opt.shift_pixels * g.h / std::sqrt(2.0);
  auto field = [&](double o1, double o2) {
    return CellField::sample(g, [&](Point p) {
      double v = 0.0;
      for (const auto& b : blobs) {
        const double r2 = (p.x1 - b.c1 - o1) * (p.x1 - b.c1 - o1) + (p.x2 - b.c2 - o2) * (p.x2 - b.c2 - o2);
        v += b.a * std::exp(-r2 / (2.0 * b.s * b.s));
      }
      return v;
    });
  };
  auto [r, t] = preprocess(field(0.0, 0.0), field(d, d), {opt.delta, false});
  return {std::move(r), std::move(t)};
}

}  // namespace mpreg
