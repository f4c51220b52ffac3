#pragma once

#include <array>
#include <stdexcept>

#include "aerial/image.hpp"

namespace aerial {

/// A (row, column) point. Homographies act on (y, x) throughout.
struct Point2 {
  double y = 0.0;
  double x = 0.0;
  bool operator==(const Point2&) const = default;
};

using Matrix3 = std::array<std::array<double, 3>, 3>;

/// Invertible 3x3 projective transform normalized so m[2][2] = 1.
class Homography {
 public:
  Homography();  // identity
  /// Normalizes by m[2][2]; throws std::invalid_argument if that entry or the
  /// determinant vanishes.
  explicit Homography(const Matrix3& m);

  const Matrix3& matrix() const { return m_; }
  double operator()(int r, int c) const { return m_[r][c]; }
  double determinant() const;
  Homography inverse() const;
  Homography compose(const Homography& rhs) const;  // this * rhs

 private:
  Matrix3 m_;
};

class HomographyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Four ordered corners in general position (no three collinear).
class CornerSet {
 public:
  explicit CornerSet(const std::array<Point2, 4>& corners);
  const std::array<Point2, 4>& corners() const { return corners_; }
  const Point2& operator[](std::size_t i) const { return corners_[i]; }

 private:
  std::array<Point2, 4> corners_;
};

struct CornerMapping {
  CornerSet src;
  CornerSet dst;
};

/// Inverse-perspective corner correspondence for an h x w ground view:
/// src {(0,0),(h,0),(h,w),(0,w)} -> dst {(0,w),(h,0),(h,w),(0,2w)}.
/// The destination bounding box is h x 2w.
CornerMapping ipm_corner_mapping(int h, int w);

/// Solves the 8x8 direct linear system (m[2][2] fixed to 1) by Gaussian
/// elimination with partial pivoting. Throws HomographyError when singular.
Homography solve_homography(const CornerSet& src, const CornerSet& dst);

/// Projective application. Throws HomographyError when the point maps to
/// infinity (|w'| < 1e-12).
Point2 apply_homography(const Homography& h, Point2 p);

/// Inverse-mapping warp: every output pixel center (i + 0.5, j + 0.5) is
/// mapped through h^-1 and bilinearly sampled from `image`; points outside
/// the source rectangle [0, H] x [0, W] receive `fill` in every channel.
ImageBuffer warp_image(const ImageBuffer& image, const Homography& h, int out_h, int out_w,
                       double fill = 0.0);

/// Step-1 preprocessing: IPM corner mapping, homography solve, warp onto the
/// destination bounding canvas (h x 2w), then bilinear resize to
/// out_size x out_size. Requires a square input.
ImageBuffer make_pseudo_aerial(const ImageBuffer& image, int out_size, double fill = 0.0);
/// Same pipeline with an explicit correspondence; the canvas is the
/// destination bounding box.
ImageBuffer make_pseudo_aerial(const ImageBuffer& image, int out_size, const CornerMapping& mapping,
                               double fill = 0.0);

}  // namespace aerial
