#pragma once

#include <cmath>

#include "nrdepth/error.hpp"
#include "nrdepth/mesh.hpp"

namespace nrdepth {

/// Pinhole intrinsics. Continuous image coordinates put the center of integer pixel
/// (i, j) at (i + 0.5, j + 0.5); the principal point is expressed in the same frame.
struct Intrinsics {
  double focal_x = 500.0;
  double focal_y = 500.0;
  double principal_x = 256.0;
  double principal_y = 256.0;
  int width = 512;
  int height = 512;

  Mat3 matrix() const {
    Mat3 k;
    k << focal_x, 0.0, principal_x, 0.0, focal_y, principal_y, 0.0, 0.0, 1.0;
    return k;
  }

  bool principal_inside() const {
    return principal_x >= 0.0 && principal_x <= width && principal_y >= 0.0 &&
           principal_y <= height;
  }

  /// Intrinsics of the same camera resampled to width*factor x height*factor.
  Intrinsics scaled(double factor) const {
    return {focal_x * factor, focal_y * factor, principal_x * factor, principal_y * factor,
            static_cast<int>(std::lround(width * factor)),
            static_cast<int>(std::lround(height * factor))};
  }

  void validate() const {
    if (!(focal_x > 0.0) || !(focal_y > 0.0)) throw CameraError("focal length must be positive");
    if (width <= 0 || height <= 0) throw CameraError("image size must be positive");
  }

  bool operator==(const Intrinsics&) const = default;
};

/// Continuous coordinates of the center of pixel (x, y).
inline Vec2 pixel_center(int x, int y) { return {x + 0.5, y + 0.5}; }

/// Scaled-orthographic camera as regressed by HMR-style body estimators.
struct WeakPerspectiveCam {
  double scale = 1.0;
  double tx = 0.0;
  double ty = 0.0;
  double focal = 500.0;     // pixels
  double image_size = 512;  // pixels
};

/// Root translation of a perspective camera reproducing the weak-perspective framing:
/// [tx, ty, f / (0.5 * img_size * s)].
inline Vec3 weak_to_perspective(const WeakPerspectiveCam& cam) {
  if (!(cam.scale > 0.0)) throw CameraError("weak-perspective scale must be positive");
  if (!(cam.image_size > 0.0)) throw CameraError("image size must be positive");
  return {cam.tx, cam.ty, cam.focal / (0.5 * cam.image_size * cam.scale)};
}

inline Vec2 project(const Intrinsics& k, const Vec3& point) {
  if (!(point.z() > 0.0)) throw CameraError("point is behind the camera");
  return {k.focal_x * point.x() / point.z() + k.principal_x,
          k.focal_y * point.y() / point.z() + k.principal_y};
}

/// Ray through a continuous pixel position, scaled so that z = 1.
inline Vec3 pixel_ray(const Intrinsics& k, const Vec2& pixel) {
  return {(pixel.x() - k.principal_x) / k.focal_x, (pixel.y() - k.principal_y) / k.focal_y, 1.0};
}

inline Vec3 unproject(const Intrinsics& k, const Vec2& pixel, double depth) {
  if (!(depth > 0.0)) throw CameraError("depth must be positive");
  return pixel_ray(k, pixel) * depth;
}

}  // namespace nrdepth
