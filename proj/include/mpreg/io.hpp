#pragma once

// File formats: 16-bit binary PGM images, raw little-endian float64 field dumps with a
// one-line text sidecar, SVG deformation grids and CSV iteration reports.

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "mpreg/constraint.hpp"
#include "mpreg/error.hpp"
#include "mpreg/grid.hpp"
#include "mpreg/sqp.hpp"

namespace mpreg {

struct PgmImage {
  CellField field;
  double lo = 0.0;  ///< value mapped to gray level 0
  double hi = 1.0;  ///< value mapped to the maximum gray level
  int maxval = 65535;
};

namespace detail {

inline std::ofstream open_output(const std::filesystem::path& path, bool binary) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

inline std::ifstream open_input(const std::filesystem::path& path, bool binary) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  return in;
}

/// Next whitespace-separated header token; '#' comments are collected into `comments`.
inline std::string pgm_token(std::istream& in, std::vector<std::string>& comments) {
  std::string tok;
  while (true) {
    int c = in.peek();
    if (c == EOF) return tok;
    if (c == '#') {
      std::string line;
      std::getline(in, line);
      comments.push_back(line);
      continue;
    }
    if (std::isspace(c)) {
      in.get();
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(in.get()));
  }
}

}  // namespace detail

/// The grid used for an image of width x height pixels: unit spacing scaled so the longer side has length 1.
inline GridGeometry image_geometry(int width, int height) {
  return GridGeometry(width, height, 1.0 / std::max(width, height));
}

/// Writes a P5 image with maxval 65535. Values are mapped affinely from [lo, hi]
/// (clamped) and the range is stored in a header comment so read_pgm can undo it.
inline void write_pgm(const std::filesystem::path& path, const CellField& f, double lo, double hi) {
  if (!(hi > lo)) hi = lo + 1.0;
  const auto& g = f.geometry;
  auto out = detail::open_output(path, true);
  out << "P5\n# mpreg-range " << std::setprecision(17) << lo << ' ' << hi << "\n# mpreg-grid " << g.h << ' '
      << g.origin1 << ' ' << g.origin2 << '\n'
      << g.n1 << ' ' << g.n2 << "\n65535\n";
  std::vector<unsigned char> buf(2 * static_cast<std::size_t>(g.cells()));
  for (int j = 0; j < g.n2; ++j)
    for (int i = 0; i < g.n1; ++i) {
      const double t = std::clamp((f(i, j) - lo) / (hi - lo), 0.0, 1.0);
      const auto q = static_cast<std::uint16_t>(std::lround(t * 65535.0));
      const std::size_t k = 2 * static_cast<std::size_t>(g.cell_index(i, j));
      buf[k] = static_cast<unsigned char>(q >> 8);
      buf[k + 1] = static_cast<unsigned char>(q & 0xff);
    }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

inline void write_pgm(const std::filesystem::path& path, const CellField& f) {
  write_pgm(path, f, f.values.minCoeff(), f.values.maxCoeff());
}

/// Reads P5 (8- or 16-bit) or P2 images. Without an mpreg-range comment the gray
/// levels are mapped to [0, 1]; without an mpreg-grid comment the grid is image_geometry.
/// Pixel row r becomes cell row j = r.
inline PgmImage read_pgm(const std::filesystem::path& path) {
  auto in = detail::open_input(path, true);
  std::vector<std::string> comments;
  const std::string magic = detail::pgm_token(in, comments);
  if (magic != "P5" && magic != "P2") throw IoError(path.string() + ": not a PGM file (magic '" + magic + "')");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(detail::pgm_token(in, comments));
    h = std::stoi(detail::pgm_token(in, comments));
    maxval = std::stoi(detail::pgm_token(in, comments));
  } catch (const std::exception&) {
    throw IoError(path.string() + ": malformed PGM header");
  }
  if (w < 2 || h < 2 || maxval < 1 || maxval > 65535)
    throw IoError(path.string() + ": invalid PGM header (images need at least 2 x 2 pixels)");
  PgmImage img{CellField(image_geometry(w, h)), 0.0, 1.0, maxval};
  for (const auto& c : comments) {
    std::istringstream ss(c);
    std::string hash, key;
    double a, b, d;
    if (!(ss >> hash >> key >> a >> b)) continue;
    if (key == "mpreg-range") {
      img.lo = a;
      img.hi = b;
    } else if (key == "mpreg-grid" && ss >> d && a > 0.0) {
      img.field = CellField(GridGeometry(w, h, a, b, d));
    }
  }
  std::vector<int> levels(static_cast<std::size_t>(w) * h);
  if (magic == "P5") {
    const int bytes = maxval > 255 ? 2 : 1;
    std::vector<unsigned char> buf(levels.size() * bytes);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() != static_cast<std::streamsize>(buf.size())) throw IoError(path.string() + ": truncated pixel data");
    for (std::size_t k = 0; k < levels.size(); ++k)
      levels[k] = bytes == 2 ? (buf[2 * k] << 8) | buf[2 * k + 1] : buf[k];
  } else {
    for (auto& v : levels)
      if (!(in >> v)) throw IoError(path.string() + ": truncated pixel data");
  }
  for (std::size_t k = 0; k < levels.size(); ++k) {
    if (levels[k] > maxval) throw IoError(path.string() + ": gray level exceeds maxval");
    img.field.values[static_cast<Eigen::Index>(k)] = img.lo + (img.hi - img.lo) * levels[k] / maxval;
  }
  return img;
}

/// Raw little-endian float64 dump (row-major, x1 fastest) plus `<path>.hdr` holding
/// "rows cols h origin1 origin2".
inline void write_field_dump(const std::filesystem::path& path, const Vector& v, int rows, int cols,
                             const GridGeometry& g) {
  if (v.size() != static_cast<Eigen::Index>(rows) * cols) throw DimensionMismatch("field dump size");
  auto out = detail::open_output(path, true);
  unsigned char bytes[8];
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    const auto bits = std::bit_cast<std::uint64_t>(v[k]);
    for (int b = 0; b < 8; ++b) bytes[b] = static_cast<unsigned char>(bits >> (8 * b));
    out.write(reinterpret_cast<const char*>(bytes), 8);
  }
  if (!out) throw IoError("failed writing " + path.string());
  auto hdr = detail::open_output(path.string() + ".hdr", false);
  hdr << rows << ' ' << cols << ' ' << std::setprecision(17) << g.h << ' ' << g.origin1 << ' ' << g.origin2 << '\n';
}

struct FieldDump {
  Vector values;
  int rows = 0;
  int cols = 0;
  double h = 1.0;
  double origin1 = 0.0;
  double origin2 = 0.0;
};

inline FieldDump read_field_dump(const std::filesystem::path& path) {
  FieldDump d;
  {
    auto hdr = detail::open_input(path.string() + ".hdr", false);
    if (!(hdr >> d.rows >> d.cols >> d.h >> d.origin1 >> d.origin2) || d.rows < 1 || d.cols < 1)
      throw IoError(path.string() + ".hdr: malformed header");
  }
  auto in = detail::open_input(path, true);
  d.values.resize(static_cast<Eigen::Index>(d.rows) * d.cols);
  unsigned char bytes[8];
  for (Eigen::Index k = 0; k < d.values.size(); ++k) {
    if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw IoError(path.string() + ": truncated data");
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
    d.values[k] = std::bit_cast<double>(bits);
  }
  return d;
}

/// u1 is stored as (n2 + 1) rows of n1 values, u2 as n2 rows of n1 + 1 values.
inline void write_displacement(const std::filesystem::path& dir, const StaggeredField& u, const std::string& prefix = "") {
  const auto& g = u.geometry;
  write_field_dump(dir / (prefix + "u1.f64"), u.u1, g.n2 + 1, g.n1, g);
  write_field_dump(dir / (prefix + "u2.f64"), u.u2, g.n2, g.n1 + 1, g);
}

inline StaggeredField read_displacement(const std::filesystem::path& dir, const std::string& prefix = "") {
  const FieldDump a = read_field_dump(dir / (prefix + "u1.f64"));
  const FieldDump b = read_field_dump(dir / (prefix + "u2.f64"));
  const int n1 = a.cols, n2 = a.rows - 1;
  if (b.rows != n2 || b.cols != n1 + 1) throw DimensionMismatch("u1/u2 dumps disagree on the grid size");
  StaggeredField u(GridGeometry(n1, n2, a.h, a.origin1, a.origin2));
  u.u1 = a.values;
  u.u2 = b.values;
  return u;
}

/// Deformed lattice as SVG polylines (every `stride`-th grid line), one pixel per cell scaled by `scale`.
inline void write_grid_svg(const std::filesystem::path& path, const StaggeredField& u, int stride = 2,
                           double scale = 4.0) {
  if (stride < 1) throw InvalidArgument("grid stride must be positive");
  const auto& g = u.geometry;
  const auto [y1, y2] = deformed_nodes(u);
  auto px = [&](int i, int j) {
    const int k = g.node_index(i, j);
    std::ostringstream s;
    s << std::fixed << std::setprecision(3) << (y1.values[k] - g.origin1) / g.h * scale << ','
      << (y2.values[k] - g.origin2) / g.h * scale;
    return s.str();
  };
  auto out = detail::open_output(path, false);
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << g.n1 * scale << "\" height=\""
      << g.n2 * scale << "\" viewBox=\"0 0 " << g.n1 * scale << ' ' << g.n2 * scale << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<g fill=\"none\" stroke=\"black\" stroke-width=\"0.5\">\n";
  for (int j = 0; j <= g.n2; j += stride) {
    out << "<polyline points=\"";
    for (int i = 0; i <= g.n1; ++i) out << (i ? " " : "") << px(i, j);
    out << "\"/>\n";
  }
  for (int i = 0; i <= g.n1; i += stride) {
    out << "<polyline points=\"";
    for (int j = 0; j <= g.n2; ++j) out << (j ? " " : "") << px(i, j);
    out << "\"/>\n";
  }
  out << "</g>\n</svg>\n";
}

inline constexpr const char* kReportHeader = "rl,k,Elas,DMP,DE,DMP_global,tau,inner_iters,merit";

/// Shortest round-trip decimal form ("nan" for NaN).
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::string report_row_csv(const ReportRow& r) {
  return std::to_string(r.rl) + ',' + std::to_string(r.k) + ',' + format_double(r.elas) + ',' + format_double(r.dmp) +
         ',' + format_double(r.de) + ',' + format_double(r.dmp_global) + ',' + format_double(r.tau) + ',' +
         std::to_string(r.inner_iters) + ',' + format_double(r.merit);
}

inline void write_report_csv(const std::filesystem::path& path, const std::vector<ReportRow>& rows) {
  auto out = detail::open_output(path, false);
  out << kReportHeader << '\n';
  for (const auto& r : rows) out << report_row_csv(r) << '\n';
}

}  // namespace mpreg
