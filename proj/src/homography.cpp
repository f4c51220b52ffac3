#include "aerial/homography.hpp"

#include <algorithm>
#include <cmath>

namespace aerial {

namespace {

constexpr double kInfinityTolerance = 1e-12;
constexpr double kCollinearTolerance = 1e-9;
constexpr double kBoundsTolerance = 1e-9;

double triangle_area(const Point2& a, const Point2& b, const Point2& c) {
  return 0.5 * std::abs((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
}

}  // namespace

Homography::Homography() : m_{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}} {}

Homography::Homography(const Matrix3& m) : m_(m) {
  const double scale = m[2][2];
  if (std::abs(scale) < kInfinityTolerance)
    throw std::invalid_argument("homography m[2][2] is zero; cannot normalize");
  if (scale != 1.0) {
    for (auto& row : m_)
      for (double& v : row) v /= scale;
    m_[2][2] = 1.0;
  }
  const double det = determinant();
  if (!std::isfinite(det) || std::abs(det) < kInfinityTolerance)
    throw std::invalid_argument("homography is singular");
}

double Homography::determinant() const {
  const auto& m = m_;
  return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
         m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
         m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

Homography Homography::inverse() const {
  const auto& m = m_;
  Matrix3 adj{};
  adj[0][0] = m[1][1] * m[2][2] - m[1][2] * m[2][1];
  adj[0][1] = m[0][2] * m[2][1] - m[0][1] * m[2][2];
  adj[0][2] = m[0][1] * m[1][2] - m[0][2] * m[1][1];
  adj[1][0] = m[1][2] * m[2][0] - m[1][0] * m[2][2];
  adj[1][1] = m[0][0] * m[2][2] - m[0][2] * m[2][0];
  adj[1][2] = m[0][2] * m[1][0] - m[0][0] * m[1][2];
  adj[2][0] = m[1][0] * m[2][1] - m[1][1] * m[2][0];
  adj[2][1] = m[0][1] * m[2][0] - m[0][0] * m[2][1];
  adj[2][2] = m[0][0] * m[1][1] - m[0][1] * m[1][0];
  // Scaling by 1/det is absorbed by the m[2][2] normalization.
  return Homography(adj);
}

Homography Homography::compose(const Homography& rhs) const {
  Matrix3 out{};
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      for (int k = 0; k < 3; ++k) out[r][c] += m_[r][k] * rhs.m_[k][c];
  return Homography(out);
}

CornerSet::CornerSet(const std::array<Point2, 4>& corners) : corners_(corners) {
  for (int skip = 0; skip < 4; ++skip) {
    std::array<Point2, 3> tri;
    int n = 0;
    for (int i = 0; i < 4; ++i)
      if (i != skip) tri[n++] = corners[i];
    if (!(triangle_area(tri[0], tri[1], tri[2]) > kCollinearTolerance))
      throw std::invalid_argument("corner set has three collinear corners");
  }
}

CornerMapping ipm_corner_mapping(int h, int w) {
  if (h < 2 || w < 2) throw std::invalid_argument("ipm_corner_mapping requires h, w >= 2");
  const double H = h;
  const double W = w;
  return CornerMapping{
      CornerSet({Point2{0, 0}, Point2{H, 0}, Point2{H, W}, Point2{0, W}}),
      CornerSet({Point2{0, W}, Point2{H, 0}, Point2{H, W}, Point2{0, 2 * W}}),
  };
}

Homography solve_homography(const CornerSet& src, const CornerSet& dst) {
  // Unknowns: m00 m01 m02 m10 m11 m12 m20 m21.
  double a[8][9] = {};
  for (int i = 0; i < 4; ++i) {
    const double y = src[i].y, x = src[i].x;
    const double yp = dst[i].y, xp = dst[i].x;
    double* r0 = a[2 * i];
    double* r1 = a[2 * i + 1];
    r0[0] = y, r0[1] = x, r0[2] = 1, r0[6] = -y * yp, r0[7] = -x * yp, r0[8] = yp;
    r1[3] = y, r1[4] = x, r1[5] = 1, r1[6] = -y * xp, r1[7] = -x * xp, r1[8] = xp;
  }

  double scale = 0.0;
  for (auto& row : a)
    for (int c = 0; c < 8; ++c) scale = std::max(scale, std::abs(row[c]));

  for (int col = 0; col < 8; ++col) {
    int pivot = col;
    for (int r = col + 1; r < 8; ++r)
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    if (std::abs(a[pivot][col]) <= 1e-12 * scale)
      throw HomographyError("degenerate correspondence: singular homography system");
    if (pivot != col) std::swap(a[pivot], a[col]);
    for (int r = col + 1; r < 8; ++r) {
      const double f = a[r][col] / a[col][col];
      if (f == 0.0) continue;
      for (int c = col; c < 9; ++c) a[r][c] -= f * a[col][c];
    }
  }
  double sol[8];
  for (int r = 7; r >= 0; --r) {
    double acc = a[r][8];
    for (int c = r + 1; c < 8; ++c) acc -= a[r][c] * sol[c];
    sol[r] = acc / a[r][r];
  }
  try {
    return Homography(Matrix3{{{sol[0], sol[1], sol[2]}, {sol[3], sol[4], sol[5]}, {sol[6], sol[7], 1.0}}});
  } catch (const std::invalid_argument& e) {
    throw HomographyError(e.what());
  }
}

Point2 apply_homography(const Homography& h, Point2 p) {
  const auto& m = h.matrix();
  const double yp = m[0][0] * p.y + m[0][1] * p.x + m[0][2];
  const double xp = m[1][0] * p.y + m[1][1] * p.x + m[1][2];
  const double wp = m[2][0] * p.y + m[2][1] * p.x + m[2][2];
  if (std::abs(wp) < kInfinityTolerance) throw HomographyError("point maps to infinity");
  return Point2{yp / wp, xp / wp};
}

ImageBuffer warp_image(const ImageBuffer& image, const Homography& h, int out_h, int out_w,
                       double fill) {
  if (out_h < 1 || out_w < 1) throw std::invalid_argument("warp target must be >= 1x1");
  if (!(fill >= 0.0 && fill <= 1.0)) throw std::invalid_argument("fill must lie in [0, 1]");
  const Homography inv = h.inverse();
  const double max_y = image.height() + kBoundsTolerance;
  const double max_x = image.width() + kBoundsTolerance;
  ImageBuffer out(out_h, out_w, image.channels());
  for (int i = 0; i < out_h; ++i) {
    for (int j = 0; j < out_w; ++j) {
      bool inside = false;
      Point2 p{};
      try {
        p = apply_homography(inv, Point2{i + 0.5, j + 0.5});
        inside = p.y >= -kBoundsTolerance && p.y <= max_y && p.x >= -kBoundsTolerance && p.x <= max_x;
      } catch (const HomographyError&) {
        inside = false;
      }
      for (int c = 0; c < image.channels(); ++c)
        out.at(i, j, c) = inside ? sample_bilinear(image, p.y - 0.5, p.x - 0.5, c) : fill;
    }
  }
  return out;
}

ImageBuffer make_pseudo_aerial(const ImageBuffer& image, int out_size, double fill) {
  if (image.height() != image.width())
    throw std::invalid_argument("make_pseudo_aerial expects a square image");
  return make_pseudo_aerial(image, out_size, ipm_corner_mapping(image.height(), image.width()), fill);
}

ImageBuffer make_pseudo_aerial(const ImageBuffer& image, int out_size, const CornerMapping& mapping,
                               double fill) {
  if (image.height() != image.width())
    throw std::invalid_argument("make_pseudo_aerial expects a square image");
  if (out_size < 1) throw std::invalid_argument("out_size must be >= 1");
  double max_y = 0.0, max_x = 0.0;
  for (const auto& p : mapping.dst.corners()) {
    max_y = std::max(max_y, p.y);
    max_x = std::max(max_x, p.x);
  }
  const int canvas_h = std::max(1, static_cast<int>(std::ceil(max_y)));
  const int canvas_w = std::max(1, static_cast<int>(std::ceil(max_x)));
  const Homography h = solve_homography(mapping.src, mapping.dst);
  const ImageBuffer canvas = warp_image(image, h, canvas_h, canvas_w, fill);
  return resize_bilinear(canvas, out_size, out_size);
}

}  // namespace aerial
