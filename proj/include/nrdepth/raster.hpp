#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "nrdepth/camera.hpp"
#include "nrdepth/grid.hpp"
#include "nrdepth/log.hpp"
#include "nrdepth/mesh.hpp"

namespace nrdepth {

/// Per-pixel depth in meters; invalid (off-silhouette) pixels hold NaN.
struct DepthMap {
  Grid<double> values;

  DepthMap() = default;
  DepthMap(int width, int height) : values(width, height, kInvalidDepth) {}
  explicit DepthMap(Grid<double> v) : values(std::move(v)) {}

  int width() const noexcept { return values.width(); }
  int height() const noexcept { return values.height(); }
  bool valid(int x, int y) const { return std::isfinite(values(x, y)); }
  double operator()(int x, int y) const { return values(x, y); }
  double& operator()(int x, int y) { return values(x, y); }

  Mask silhouette() const {
    Mask m(width(), height(), 0);
    for (std::size_t i = 0; i < values.size(); ++i) m[i] = std::isfinite(values[i]) ? 1 : 0;
    return m;
  }
};

/// Per-pixel rigid transform from the target frame to one reference frame.
struct MotionMap {
  Grid<RigidTransform> transforms;
  Mask valid;

  MotionMap() = default;
  MotionMap(int width, int height) : transforms(width, height), valid(width, height, 0) {}

  int width() const noexcept { return transforms.width(); }
  int height() const noexcept { return transforms.height(); }
};

/// Z-buffer output: depth plus the index of the front-most face per pixel (-1 for none).
/// Every face is also binned into the pixels its projected bounding box overlaps (CSR,
/// row-major), so sub-pixel lookups can test exactly the faces that may contain a point.
struct RenderBuffers {
  DepthMap depth;
  Grid<std::int32_t> face;
  std::vector<std::uint32_t> bin_start;  // size w*h + 1
  std::vector<std::int32_t> bin_faces;
};

namespace detail {

inline constexpr double kNearPlane = 1e-6;
inline constexpr double kDepthTie = 1e-9;

/// Depth along the pixel ray (z = 1 scaling) where it meets the plane through a, b, c.
inline std::optional<double> ray_plane_depth(const Vec3& ray, const Vec3& a, const Vec3& b,
                                             const Vec3& c) {
  const Vec3 n = (b - a).cross(c - a);
  const double denom = n.dot(ray);
  if (denom == 0.0) return std::nullopt;
  const double z = n.dot(a) / denom;
  if (!(z > 0.0) || !std::isfinite(z)) return std::nullopt;
  return z;
}

// Edge ownership for pixel centers lying exactly on an edge of a positively oriented
// triangle: each shared edge is owned by exactly one of its two triangles.
inline bool owns_edge(double dx, double dy) { return dy > 0.0 || (dy == 0.0 && dx < 0.0); }

}  // namespace detail

/// Rasterize a camera-frame mesh. A pixel is covered when its center lies inside a face
/// (shared edges resolved by a fixed ownership rule); depth is the exact ray-plane
/// intersection of the covering face; ties within 1e-9 m go to the lower face index.
inline RenderBuffers rasterize(const TriMesh& mesh, const Intrinsics& k) {
  k.validate();
  RenderBuffers out{DepthMap(k.width, k.height), Grid<std::int32_t>(k.width, k.height, -1), {}, {}};
  bool any_in_front = false;
  std::vector<std::pair<std::uint32_t, std::int32_t>> binned;  // (pixel, face)

  for (std::size_t fi = 0; fi < mesh.faces.size(); ++fi) {
    const auto& f = mesh.faces[fi];
    const Vec3& a = mesh.vertices[static_cast<std::size_t>(f[0])];
    const Vec3& b = mesh.vertices[static_cast<std::size_t>(f[1])];
    const Vec3& c = mesh.vertices[static_cast<std::size_t>(f[2])];
    if (a.z() <= detail::kNearPlane || b.z() <= detail::kNearPlane || c.z() <= detail::kNearPlane)
      continue;
    any_in_front = true;

    std::array<Vec2, 3> s{project(k, a), project(k, b), project(k, c)};
    double area = (s[1] - s[0]).x() * (s[2] - s[0]).y() - (s[1] - s[0]).y() * (s[2] - s[0]).x();
    if (area == 0.0 || !std::isfinite(area)) continue;
    if (area < 0.0) {
      std::swap(s[1], s[2]);
      area = -area;
    }

    const double min_u = std::min({s[0].x(), s[1].x(), s[2].x()});
    const double max_u = std::max({s[0].x(), s[1].x(), s[2].x()});
    const double min_v = std::min({s[0].y(), s[1].y(), s[2].y()});
    const double max_v = std::max({s[0].y(), s[1].y(), s[2].y()});
    const int x0 = std::max(0, static_cast<int>(std::ceil(min_u - 0.5)));
    const int x1 = std::min(k.width - 1, static_cast<int>(std::floor(max_u - 0.5)));
    const int y0 = std::max(0, static_cast<int>(std::ceil(min_v - 0.5)));
    const int y1 = std::min(k.height - 1, static_cast<int>(std::floor(max_v - 0.5)));

    const int bx0 = std::max(0, static_cast<int>(std::floor(min_u)));
    const int bx1 = std::min(k.width - 1, static_cast<int>(std::floor(max_u)));
    const int by0 = std::max(0, static_cast<int>(std::floor(min_v)));
    const int by1 = std::min(k.height - 1, static_cast<int>(std::floor(max_v)));
    for (int y = by0; y <= by1; ++y)
      for (int x = bx0; x <= bx1; ++x)
        binned.emplace_back(static_cast<std::uint32_t>(y * k.width + x), static_cast<std::int32_t>(fi));

    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const Vec2 p = pixel_center(x, y);
        bool inside = true;
        for (int e = 0; e < 3 && inside; ++e) {
          const Vec2& p0 = s[static_cast<std::size_t>(e)];
          const Vec2& p1 = s[static_cast<std::size_t>((e + 1) % 3)];
          const double dx = p1.x() - p0.x();
          const double dy = p1.y() - p0.y();
          const double w = dx * (p.y() - p0.y()) - dy * (p.x() - p0.x());
          inside = w > 0.0 || (w == 0.0 && detail::owns_edge(dx, dy));
        }
        if (!inside) continue;
        const auto z = detail::ray_plane_depth(pixel_ray(k, p), a, b, c);
        if (!z) continue;
        double& zbuf = out.depth(x, y);
        auto& fbuf = out.face(x, y);
        const bool empty = fbuf < 0;
        const bool closer = *z < zbuf - detail::kDepthTie;
        const bool tie_wins = !empty && std::abs(*z - zbuf) <= detail::kDepthTie &&
                              static_cast<std::int32_t>(fi) < fbuf;
        if (empty || closer || tie_wins) {
          zbuf = *z;
          fbuf = static_cast<std::int32_t>(fi);
        }
      }
    }
  }
  if (!any_in_front && !mesh.faces.empty()) log::warn("mesh lies entirely behind the camera");

  // Counting sort keeps faces in index order within each pixel.
  const std::size_t pixels = static_cast<std::size_t>(k.width) * static_cast<std::size_t>(k.height);
  out.bin_start.assign(pixels + 1, 0);
  for (const auto& [pixel, face] : binned) ++out.bin_start[pixel + 1];
  for (std::size_t i = 0; i < pixels; ++i) out.bin_start[i + 1] += out.bin_start[i];
  out.bin_faces.resize(binned.size());
  std::vector<std::uint32_t> cursor(out.bin_start.begin(), out.bin_start.end() - 1);
  for (const auto& [pixel, face] : binned) out.bin_faces[cursor[pixel]++] = face;
  return out;
}

inline DepthMap render_depth(const TriMesh& mesh, const Intrinsics& k) {
  return rasterize(mesh, k).depth;
}

namespace detail {

/// Whether the projection of face `fi` contains the continuous image position `q`.
inline bool face_contains(const TriMesh& mesh, const Intrinsics& k, std::int32_t fi, const Vec2& q) {
  const auto& f = mesh.faces[static_cast<std::size_t>(fi)];
  std::array<Vec2, 3> s;
  for (int i = 0; i < 3; ++i) {
    const Vec3& v = mesh.vertices[static_cast<std::size_t>(f[static_cast<std::size_t>(i)])];
    if (!(v.z() > kNearPlane)) return false;
    s[static_cast<std::size_t>(i)] = project(k, v);
  }
  auto cross = [&](const Vec2& a, const Vec2& b) {
    return (b.x() - a.x()) * (q.y() - a.y()) - (b.y() - a.y()) * (q.x() - a.x());
  };
  const double w0 = cross(s[0], s[1]), w1 = cross(s[1], s[2]), w2 = cross(s[2], s[0]);
  return (w0 >= 0.0 && w1 >= 0.0 && w2 >= 0.0) || (w0 <= 0.0 && w1 <= 0.0 && w2 <= 0.0);
}

}  // namespace detail

/// Depth of the rendered surface along the ray through a continuous image position: the
/// nearest binned face of the containing pixel whose projection contains the position.
/// Empty when the ray misses every face or the position is outside the image. Buffers
/// without bins fall back to the plane of the containing pixel's z-buffer face.
inline std::optional<double> rendered_depth_at(const RenderBuffers& render, const TriMesh& mesh,
                                               const Intrinsics& k, const Vec2& pixel) {
  const int x = static_cast<int>(std::floor(pixel.x()));
  const int y = static_cast<int>(std::floor(pixel.y()));
  if (!render.face.contains(x, y)) return std::nullopt;
  const Vec3 ray = pixel_ray(k, pixel);
  auto depth_on = [&](std::int32_t fi) {
    const auto& f = mesh.faces[static_cast<std::size_t>(fi)];
    return detail::ray_plane_depth(ray, mesh.vertices[static_cast<std::size_t>(f[0])],
                                   mesh.vertices[static_cast<std::size_t>(f[1])],
                                   mesh.vertices[static_cast<std::size_t>(f[2])]);
  };

  if (render.bin_start.empty()) {
    const auto fi = render.face(x, y);
    if (fi < 0) return std::nullopt;
    return depth_on(fi);
  }
  const std::size_t cell = render.face.index(x, y);
  std::optional<double> best;
  for (auto i = render.bin_start[cell]; i < render.bin_start[cell + 1]; ++i) {
    const auto fi = render.bin_faces[i];
    if (!detail::face_contains(mesh, k, fi, pixel)) continue;
    const auto z = depth_on(fi);
    if (z && (!best || *z < *best)) best = z;
  }
  return best;
}

/// Default visibility tolerance (meters).
inline constexpr double kVisibilityTolerance = 0.005;

/// A point is visible when it projects inside the image onto a covered pixel and its depth
/// is no more than `tolerance` behind the rendered surface there.
inline bool point_visible(const RenderBuffers& render, const TriMesh& mesh, const Intrinsics& k,
                          const Vec3& point, double tolerance = kVisibilityTolerance) {
  if (!(point.z() > detail::kNearPlane)) return false;
  const Vec2 q = project(k, point);
  if (!(q.x() >= 0.0 && q.y() >= 0.0 && q.x() < k.width && q.y() < k.height)) return false;
  const auto surface = rendered_depth_at(render, mesh, k, q);
  return surface && point.z() <= *surface + tolerance;
}

inline std::vector<std::uint8_t> visibility(const TriMesh& mesh_in_view, const Intrinsics& k,
                                            std::span<const Vec3> query_points,
                                            double tolerance = kVisibilityTolerance) {
  const auto render = rasterize(mesh_in_view, k);
  std::vector<std::uint8_t> out(query_points.size(), 0);
  for (std::size_t i = 0; i < query_points.size(); ++i)
    out[i] = point_visible(render, mesh_in_view, k, query_points[i], tolerance) ? 1 : 0;
  return out;
}

/// Motion map over a precomputed target render. A covered pixel takes the mean transform
/// of its face's three vertices; faces touching a degenerate vertex stay invalid.
inline MotionMap render_motion_map(const RenderBuffers& target_render, const TriMesh& target,
                                   const VertexTransforms& transforms) {
  if (transforms.transforms.size() != target.vertices.size())
    throw TopologyError("transform count does not match vertex count");
  const int w = target_render.depth.width();
  const int h = target_render.depth.height();
  MotionMap out(w, h);

  // Faces are shared by many pixels; average once per face.
  std::vector<std::int8_t> face_state(target.faces.size(), 0);  // 0 unseen, 1 ok, -1 degenerate
  std::vector<RigidTransform> face_mean(target.faces.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const auto fi = target_render.face(x, y);
      if (fi < 0) continue;
      const auto f = static_cast<std::size_t>(fi);
      if (face_state[f] == 0) {
        const auto& face = target.faces[f];
        bool degenerate = false;
        std::array<RigidTransform, 3> corner;
        for (int c = 0; c < 3; ++c) {
          const auto v = static_cast<std::size_t>(face[static_cast<std::size_t>(c)]);
          degenerate = degenerate || (!transforms.degenerate.empty() && transforms.degenerate[v]);
          corner[static_cast<std::size_t>(c)] = transforms.transforms[v];
        }
        face_state[f] = degenerate ? -1 : 1;
        if (!degenerate) face_mean[f] = average_transform(corner);
      }
      if (face_state[f] > 0) {
        out.transforms(x, y) = face_mean[f];
        out.valid(x, y) = 1;
      }
    }
  return out;
}

inline MotionMap render_motion_map(const TriMesh& target, const TriMesh& reference,
                                   const VertexTransforms& transforms, const Intrinsics& k) {
  if (target.vertices.size() != reference.vertices.size())
    throw TopologyError("target and reference meshes differ in vertex count");
  return render_motion_map(rasterize(target, k), target, transforms);
}

}  // namespace nrdepth
