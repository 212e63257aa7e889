#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "gkcl/data.hpp"

namespace gkcl {

namespace {

using Point = std::array<double, 2>;
using Polyline = std::vector<Point>;

Polyline ellipse(double cx, double cy, double rx, double ry, int n = 14) {
  Polyline p;
  for (int i = 0; i <= n; ++i) {
    const double a = 2.0 * std::numbers::pi * i / n;
    p.push_back({cx + rx * std::cos(a), cy + ry * std::sin(a)});
  }
  return p;
}

// Digit skeletons in a unit box, x right, y down.
const std::vector<Polyline>& digit_strokes(int digit) {
  static const std::vector<std::vector<Polyline>> glyphs = [] {
    std::vector<std::vector<Polyline>> g(10);
    g[0] = {ellipse(0.50, 0.50, 0.26, 0.36)};
    g[1] = {{{0.35, 0.28}, {0.52, 0.13}}, {{0.52, 0.13}, {0.52, 0.87}}};
    g[2] = {{{0.27, 0.30},
             {0.30, 0.19},
             {0.42, 0.13},
             {0.58, 0.13},
             {0.70, 0.20},
             {0.73, 0.32},
             {0.68, 0.45},
             {0.55, 0.57},
             {0.40, 0.68},
             {0.28, 0.78},
             {0.26, 0.87}},
            {{0.26, 0.87}, {0.75, 0.87}}};
    g[3] = {{{0.28, 0.20},
             {0.38, 0.13},
             {0.55, 0.12},
             {0.68, 0.18},
             {0.71, 0.30},
             {0.64, 0.42},
             {0.50, 0.47}},
            {{0.50, 0.47},
             {0.66, 0.53},
             {0.73, 0.65},
             {0.69, 0.78},
             {0.55, 0.87},
             {0.38, 0.86},
             {0.27, 0.78}}};
    g[4] = {{{0.63, 0.13}, {0.24, 0.62}, {0.78, 0.62}}, {{0.63, 0.34}, {0.63, 0.88}}};
    g[5] = {{{0.72, 0.13},
             {0.32, 0.13},
             {0.29, 0.45},
             {0.45, 0.39},
             {0.62, 0.42},
             {0.72, 0.54},
             {0.72, 0.68},
             {0.62, 0.81},
             {0.45, 0.87},
             {0.30, 0.80}}};
    g[6] = {{{0.64, 0.13},
             {0.47, 0.22},
             {0.35, 0.38},
             {0.30, 0.55},
             {0.32, 0.72},
             {0.43, 0.85},
             {0.58, 0.86},
             {0.69, 0.76},
             {0.70, 0.62},
             {0.60, 0.52},
             {0.45, 0.52},
             {0.33, 0.62}}};
    g[7] = {{{0.25, 0.13}, {0.75, 0.13}, {0.45, 0.87}}};
    g[8] = {ellipse(0.50, 0.30, 0.17, 0.17, 12), ellipse(0.50, 0.66, 0.21, 0.21, 12)};
    g[9] = {ellipse(0.50, 0.33, 0.19, 0.20, 12), {{0.69, 0.38}, {0.66, 0.60}, {0.58, 0.87}}};
    return g;
  }();
  return glyphs[digit];
}

double segment_distance(const Point& p, const Point& a, const Point& b) {
  const double vx = b[0] - a[0], vy = b[1] - a[1];
  const double wx = p[0] - a[0], wy = p[1] - a[1];
  const double vv = vx * vx + vy * vy;
  double t = vv > 0.0 ? (wx * vx + wy * vy) / vv : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = wx - t * vx, dy = wy - t * vy;
  return std::sqrt(dx * dx + dy * dy);
}

double stroke_distance(const Point& p, const std::vector<Polyline>& strokes) {
  double best = 1e9;
  for (const auto& line : strokes)
    for (std::size_t i = 0; i + 1 < line.size(); ++i)
      best = std::min(best, segment_distance(p, line[i], line[i + 1]));
  return best;
}

}  // namespace

ImageDataset render_digit_dataset(int n_images, std::uint64_t seed) {
  constexpr int S = 28;
  ImageDataset ds;
  ds.num_classes = 10;
  ds.img_rows = S;
  ds.img_cols = S;
  ds.images = Matrix(n_images, S * S);
  ds.labels.resize(n_images);

  RngState rng(seed);
  for (int n = 0; n < n_images; ++n) {
    const int digit = n % 10;
    ds.labels[n] = digit;

    // random affine jitter: rotation, shear, anisotropic scale, translation.
    // The global 0.85 factor keeps strokes inside the content box MNIST
    // digits occupy, so rotations never clip them away.
    const double theta = (rng.next_double() * 2.0 - 1.0) * 0.20;
    const double shear = (rng.next_double() * 2.0 - 1.0) * 0.18;
    const double sx = 0.85 * (0.82 + rng.next_double() * 0.30);
    const double sy = 0.85 * (0.82 + rng.next_double() * 0.30);
    const double tx = (rng.next_double() * 2.0 - 1.0) * 0.04;
    const double ty = (rng.next_double() * 2.0 - 1.0) * 0.04;
    const double half_width = 0.022 + rng.next_double() * 0.022;

    // forward map M = R(theta) * shear * scale; sample via the inverse
    const double ct = std::cos(theta), st = std::sin(theta);
    const double m00 = ct * sx + (-st) * 0.0, m01 = ct * shear * sy - st * sy;
    const double m10 = st * sx, m11 = st * shear * sy + ct * sy;
    const double det = m00 * m11 - m01 * m10;
    const double i00 = m11 / det, i01 = -m01 / det, i10 = -m10 / det, i11 = m00 / det;

    const auto& strokes = digit_strokes(digit);
    double* img = ds.images.row_ptr(n);
    constexpr double aa = 0.05;  // anti-alias band in glyph units
    for (int r = 0; r < S; ++r) {
      for (int c = 0; c < S; ++c) {
        const double px = (c + 0.5) / S - 0.5 - tx;
        const double py = (r + 0.5) / S - 0.5 - ty;
        const Point q = {i00 * px + i01 * py + 0.5, i10 * px + i11 * py + 0.5};
        const double d = stroke_distance(q, strokes);
        double v = 0.0;
        if (d <= half_width)
          v = 1.0;
        else if (d <= half_width + aa)
          v = 1.0 - (d - half_width) / aa;
        img[r * S + c] = v;
      }
    }
    // binomial blur passes: scanned digits have soft edges
    double tmp[S * S];
    for (int pass = 0; pass < 2; ++pass) {
      for (int r = 0; r < S; ++r)
        for (int c = 0; c < S; ++c) {
          const double left = c > 0 ? img[r * S + c - 1] : 0.0;
          const double right = c < S - 1 ? img[r * S + c + 1] : 0.0;
          tmp[r * S + c] = 0.25 * left + 0.5 * img[r * S + c] + 0.25 * right;
        }
      for (int r = 0; r < S; ++r)
        for (int c = 0; c < S; ++c) {
          const double up = r > 0 ? tmp[(r - 1) * S + c] : 0.0;
          const double down = r < S - 1 ? tmp[(r + 1) * S + c] : 0.0;
          img[r * S + c] = 0.25 * up + 0.5 * tmp[r * S + c] + 0.25 * down;
        }
    }
  }
  return ds;
}

}  // namespace gkcl
