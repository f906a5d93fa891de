#pragma once

// Cubic B-spline image model, template warping, image pyramids and the
// mass-equalizing preprocessing of input densities.

#include <algorithm>
#include <array>
#include <cmath>
#include <tuple>
#include <utility>
#include <vector>

#include "mpreg/grid.hpp"
#include "mpreg/staggered.hpp"

namespace mpreg {

namespace bspline {

// Uniform cubic B-spline segment polynomials on t in [0, 1).
inline std::array<double, 4> weights(double t) {
  const double s = 1.0 - t;
  const double t2 = t * t;
  const double t3 = t2 * t;
  return {s * s * s / 6.0, (3.0 * t3 - 6.0 * t2 + 4.0) / 6.0, (-3.0 * t3 + 3.0 * t2 + 3.0 * t + 1.0) / 6.0,
          t3 / 6.0};
}

inline std::array<double, 4> derivative_weights(double t) {
  const double s = 1.0 - t;
  const double t2 = t * t;
  return {-0.5 * s * s, 0.5 * (3.0 * t2 - 4.0 * t), 0.5 * (-3.0 * t2 + 2.0 * t + 1.0), 0.5 * t2};
}

/// Index of the whole-sample symmetric extension of a length-n signal.
inline int mirror(int k, int n) {
  if (n == 1) return 0;
  const int period = 2 * n - 2;
  k %= period;
  if (k < 0) k += period;
  return k < n ? k : period - k;
}

/// In-place interpolation prefilter (pole sqrt(3) - 2) with mirror boundaries.
/// `stride` walks the samples of one line inside `data`.
inline void prefilter_line(double* data, int n, int stride) {
  if (n < 2) return;
  const double z = std::sqrt(3.0) - 2.0;
  // Causal initialisation: exact sum over one mirror period.
  const int period = 2 * n - 2;
  double zk = 1.0;
  double sum = 0.0;
  for (int k = 0; k < period; ++k) {
    sum += zk * data[mirror(k, n) * stride];
    zk *= z;
  }
  std::vector<double> cp(n);
  cp[0] = sum / (1.0 - std::pow(z, period));
  for (int k = 1; k < n; ++k) cp[k] = data[k * stride] + z * cp[k - 1];
  std::vector<double> cm(n);
  cm[n - 1] = z / (z * z - 1.0) * (cp[n - 1] + z * cp[n - 2]);
  for (int k = n - 2; k >= 0; --k) cm[k] = z * (cm[k + 1] - cp[k]);
  for (int k = 0; k < n; ++k) data[k * stride] = 6.0 * cm[k];
}

}  // namespace bspline

/// Tensor-product cubic B-spline interpolant of cell-centered samples.
class BSplineImage {
 public:
  static constexpr int kPad = 2;

  BSplineImage() = default;

  /// Fits coefficients so the spline reproduces every sample at its cell center.
  static BSplineImage fit(const CellField& image) {
    const auto& g = image.geometry;
    if (!image.values.allFinite()) throw InvalidArgument("image contains non-finite values");
    std::vector<double> c(image.values.data(), image.values.data() + image.values.size());
    for (int j = 0; j < g.n2; ++j) bspline::prefilter_line(c.data() + j * g.n1, g.n1, 1);
    for (int i = 0; i < g.n1; ++i) bspline::prefilter_line(c.data() + i, g.n2, g.n1);

    BSplineImage out;
    out.geometry_ = g;
    out.stride_ = g.n1 + 2 * kPad;
    out.coeff_.resize(static_cast<std::size_t>(out.stride_) * (g.n2 + 2 * kPad));
    for (int j = -kPad; j < g.n2 + kPad; ++j)
      for (int i = -kPad; i < g.n1 + kPad; ++i)
        out.coeff_[out.slot(i, j)] = c[bspline::mirror(j, g.n2) * g.n1 + bspline::mirror(i, g.n1)];
    return out;
  }

  const GridGeometry& geometry() const { return geometry_; }

  /// Coefficient gamma_{i,j}, i in [-2, n1+1], j in [-2, n2+1].
  double coefficient(int i, int j) const { return coeff_[slot(i, j)]; }

  double eval(Point x) const { return evaluate(x, false).value; }

  /// Spatial gradient in physical units; zero along an axis where the point was clamped.
  std::array<double, 2> eval_gradient(Point x) const {
    const auto r = evaluate(x, true);
    return {r.d1, r.d2};
  }

  struct Sample {
    double value;
    double d1;
    double d2;
  };

  Sample eval_with_gradient(Point x) const { return evaluate(x, true); }

 private:
  int slot(int i, int j) const { return (j + kPad) * stride_ + (i + kPad); }

  Sample evaluate(Point x, bool with_gradient) const {
    if (!std::isfinite(x.x1) || !std::isfinite(x.x2)) throw InvalidArgument("non-finite evaluation point");
    const auto& g = geometry_;
    double t1 = (x.x1 - g.origin1) / g.h - 0.5;
    double t2 = (x.x2 - g.origin2) / g.h - 0.5;
    bool clamped1 = false;
    bool clamped2 = false;
    if (t1 < -0.5 || t1 > g.n1 - 0.5) {
      t1 = std::clamp(t1, -0.5, g.n1 - 0.5);
      clamped1 = true;
    }
    if (t2 < -0.5 || t2 > g.n2 - 0.5) {
      t2 = std::clamp(t2, -0.5, g.n2 - 0.5);
      clamped2 = true;
    }
    const int k1 = std::min(static_cast<int>(std::floor(t1)), g.n1 - 1);
    const int k2 = std::min(static_cast<int>(std::floor(t2)), g.n2 - 1);
    const double f1 = t1 - k1;
    const double f2 = t2 - k2;
    const auto w1 = bspline::weights(f1);
    const auto w2 = bspline::weights(f2);

    Sample s{0.0, 0.0, 0.0};
    std::array<double, 4> row_val{};
    std::array<double, 4> row_der{};
    const auto dw1 = bspline::derivative_weights(f1);
    for (int b = 0; b < 4; ++b) {
      const double* c = &coeff_[slot(k1 - 1, k2 - 1 + b)];
      row_val[b] = w1[0] * c[0] + w1[1] * c[1] + w1[2] * c[2] + w1[3] * c[3];
      if (with_gradient) row_der[b] = dw1[0] * c[0] + dw1[1] * c[1] + dw1[2] * c[2] + dw1[3] * c[3];
    }
    for (int b = 0; b < 4; ++b) s.value += w2[b] * row_val[b];
    if (with_gradient) {
      const auto dw2 = bspline::derivative_weights(f2);
      for (int b = 0; b < 4; ++b) {
        s.d1 += w2[b] * row_der[b];
        s.d2 += dw2[b] * row_val[b];
      }
      s.d1 = clamped1 ? 0.0 : s.d1 / g.h;
      s.d2 = clamped2 ? 0.0 : s.d2 / g.h;
    }
    return s;
  }

  GridGeometry geometry_;
  int stride_ = 0;
  std::vector<double> coeff_;
};

struct WarpedImage {
  CellField value;  ///< rho_T o phi at the cell centers
  CellField grad1;  ///< (d rho_T / dx1) o phi
  CellField grad2;  ///< (d rho_T / dx2) o phi
};

/// Evaluates the template model at the displaced cell centers x + P_{u->c} u.
inline WarpedImage warp(const BSplineImage& model, const StaggeredField& u) {
  const auto& g = u.geometry;
  require_same_geometry(g, model.geometry(), "warp");
  WarpedImage out{CellField(g), CellField(g), CellField(g)};
  for (int j = 0; j < g.n2; ++j)
    for (int i = 0; i < g.n1; ++i) {
      const Point c = g.cell_center(i, j);
      const Point y{c.x1 + 0.5 * (u.at1(i, j) + u.at1(i, j + 1)), c.x2 + 0.5 * (u.at2(i, j) + u.at2(i + 1, j))};
      const auto s = model.eval_with_gradient(y);
      out.value(i, j) = s.value;
      out.grad1(i, j) = s.d1;
      out.grad2(i, j) = s.d2;
    }
  return out;
}

/// Derivative of the warped template with respect to u:
/// diag(grad1 o phi) P_{u1->c} + diag(grad2 o phi) P_{u2->c}.
inline SparseOperator warp_derivative(const WarpedImage& warped) {
  const auto& g = warped.value.geometry;
  const int off = g.u1_count();
  Triplets t;
  t.reserve(4 * g.cells());
  for (int j = 0; j < g.n2; ++j)
    for (int i = 0; i < g.n1; ++i) {
      const int row = g.cell_index(i, j);
      const double a = 0.5 * warped.grad1(i, j);
      const double b = 0.5 * warped.grad2(i, j);
      t.emplace_back(row, g.u1_index(i, j), a);
      t.emplace_back(row, g.u1_index(i, j + 1), a);
      t.emplace_back(row, off + g.u2_index(i, j), b);
      t.emplace_back(row, off + g.u2_index(i + 1, j), b);
    }
  return make_sparse(g.cells(), g.unknowns(), t);
}

inline SparseOperator warp_derivative(const BSplineImage& model, const StaggeredField& u) {
  return warp_derivative(warp(model, u));
}

/// Densities from finest (index 0) to coarsest; h doubles per level.
struct ImagePyramid {
  std::vector<CellField> levels;

  int depth() const { return static_cast<int>(levels.size()); }
  const CellField& finest() const { return levels.front(); }
  const CellField& coarsest() const { return levels.back(); }
};

/// Applies the S_p corner-average restriction `coarse_levels` times.
inline ImagePyramid coarsen(const CellField& image, int coarse_levels) {
  if (coarse_levels < 0) throw InvalidArgument("negative pyramid depth");
  const auto& g = image.geometry;
  const int factor = 1 << coarse_levels;
  if (g.n1 % factor != 0 || g.n2 % factor != 0 || g.n1 / factor < 2 || g.n2 / factor < 2)
    throw CoarseningError("image size " + std::to_string(g.n1) + "x" + std::to_string(g.n2) +
                          " is not divisible by 2^" + std::to_string(coarse_levels));
  ImagePyramid p;
  p.levels.push_back(image);
  for (int k = 0; k < coarse_levels; ++k) p.levels.push_back(restrict_field(p.levels.back()));
  return p;
}

/// 3x3 separable discrete Gaussian (sigma = 0.8 cells), replicated borders.
inline CellField gaussian_smooth(const CellField& image, double sigma = 0.8) {
  const auto& g = image.geometry;
  const double e = std::exp(-1.0 / (2.0 * sigma * sigma));
  const double w0 = 1.0 / (1.0 + 2.0 * e);
  const double w1 = e * w0;
  CellField tmp(g);
  CellField out(g);
  for (int j = 0; j < g.n2; ++j)
    for (int i = 0; i < g.n1; ++i)
      tmp(i, j) = w1 * image(std::max(i - 1, 0), j) + w0 * image(i, j) + w1 * image(std::min(i + 1, g.n1 - 1), j);
  for (int j = 0; j < g.n2; ++j)
    for (int i = 0; i < g.n1; ++i)
      out(i, j) = w1 * tmp(i, std::max(j - 1, 0)) + w0 * tmp(i, j) + w1 * tmp(i, std::min(j + 1, g.n2 - 1));
  return out;
}

struct PreprocessOptions {
  double delta = 0.03;
  bool smooth = false;
};

/// Smooths (optionally), rescales each image to [delta, 1] and scales the
/// template so both images carry the same total mass.
inline std::pair<CellField, CellField> preprocess(const CellField& reference, const CellField& templ,
                                                  const PreprocessOptions& opt = {}) {
  require_same_geometry(reference.geometry, templ.geometry, "preprocess");
  if (!(opt.delta > 0.0 && opt.delta < 1.0)) throw InvalidArgument("positivity floor must lie in (0, 1)");
  for (const CellField* img : {&reference, &templ}) {
    if (!img->values.allFinite()) throw InvalidArgument("image contains non-finite values");
    if (img->values.minCoeff() < 0.0) throw InvalidArgument("image intensities must be nonnegative");
    if (img->values.sum() <= 0.0) throw InvalidArgument("image has zero mass");
  }
  auto rescale = [&](CellField img) {
    if (opt.smooth) img = gaussian_smooth(img);
    const double lo = img.values.minCoeff();
    const double hi = img.values.maxCoeff();
    if (hi - lo <= 0.0) {
      img.values.setOnes();
    } else {
      img.values = (opt.delta + (1.0 - opt.delta) * ((img.values.array() - lo) / (hi - lo))).matrix();
    }
    return img;
  };
  CellField r = rescale(reference);
  CellField t = rescale(templ);
  t.values *= r.values.sum() / t.values.sum();
  return {std::move(r), std::move(t)};
}

/// Positivity and mass checks for a registration pair: both images finite and strictly
/// positive, total masses equal up to a relative `mass_tolerance`.
inline void validate_registration_inputs(const CellField& reference, const CellField& templ,
                                         double mass_tolerance = 1e-2) {
  require_same_geometry(reference.geometry, templ.geometry, "registration images");
  for (const CellField* img : {&reference, &templ}) {
    if (!img->values.allFinite()) throw InvalidArgument("image contains non-finite values");
    if (!(img->values.minCoeff() > 0.0))
      throw InvalidArgument("image intensities must be strictly positive (use preprocessing)");
  }
  const double mr = reference.values.sum();
  const double mt = templ.values.sum();
  if (std::abs(mr - mt) > mass_tolerance * mr)
    throw InvalidArgument("image masses differ by more than the tolerance (use preprocessing)");
}

/// Template rescaled to carry exactly the reference mass.
inline CellField balance_mass(const CellField& reference, const CellField& templ) {
  CellField t = templ;
  t.values *= reference.values.sum() / templ.values.sum();
  return t;
}

}  // namespace mpreg
