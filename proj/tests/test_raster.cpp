#include <gtest/gtest.h>

#include <random>

#include "nrdepth/mesh.hpp"
#include "nrdepth/raster.hpp"
#include "oracles.hpp"

using namespace nrdepth;

namespace {

const Intrinsics kK{100, 100, 32, 32, 64, 64};

// Square at depth z spanning pixel columns/rows [lo, hi) exactly.
TriMesh square(double z, double lo, double hi, int first_index = 0) {
  auto w = [&](double u) { return (u - 32.0) * z / 100.0; };
  TriMesh m;
  m.vertices = {Vec3(w(lo), w(lo), z), Vec3(w(hi), w(lo), z), Vec3(w(hi), w(hi), z), Vec3(w(lo), w(hi), z)};
  m.faces = {{first_index + 0, first_index + 1, first_index + 2}, {first_index + 0, first_index + 2, first_index + 3}};
  return m;
}

TriMesh wavy() {
  return oracle::grid_mesh(21, 21, 0.03, -0.3, -0.3, [](double x, double y) {
    return 1.5 + 0.1 * std::sin(9 * x + 1) * std::cos(7 * y) + 0.2 * x;
  });
}

}  // namespace

TEST(Rasterize, SquareCoversExactPixelsOnce) {
  const auto r = rasterize(square(2.0, 8, 24), kK);
  EXPECT_EQ(count_set(r.depth.silhouette()), 256u);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) {
      const bool inside = x >= 8 && x < 24 && y >= 8 && y < 24;
      EXPECT_EQ(r.depth.valid(x, y), inside) << x << "," << y;
      if (inside) {
        EXPECT_NEAR(r.depth(x, y), 2.0, 1e-12);
      }
      // Pixel centers on the shared diagonal belong to exactly one of the two faces.
      if (inside && x > y) {
        EXPECT_EQ(r.face(x, y), 0);
      }
      if (inside && x < y) {
        EXPECT_EQ(r.face(x, y), 1);
      }
    }
}

TEST(Rasterize, AdjacentSquaresLeaveNoGapsOrOverlaps) {
  TriMesh m = square(2.0, 4, 20);
  const TriMesh right = square(2.0, 20, 36);
  // Share the edge: reuse the two vertices of the right square's left side.
  m.vertices.push_back(right.vertices[1]);
  m.vertices.push_back(right.vertices[2]);
  m.faces.push_back({1, 4, 5});
  m.faces.push_back({1, 5, 2});
  const auto r = rasterize(m, kK);
  EXPECT_EQ(count_set(r.depth.silhouette()), 16u * 32u);
}

TEST(Rasterize, NearerSurfaceWins) {
  TriMesh m = square(3.0, 0, 64);
  const TriMesh front = square(1.5, 10, 20, 4);
  m.vertices.insert(m.vertices.end(), front.vertices.begin(), front.vertices.end());
  m.faces.insert(m.faces.end(), front.faces.begin(), front.faces.end());
  const auto r = rasterize(m, kK);
  EXPECT_NEAR(r.depth(15, 15), 1.5, 1e-12);
  EXPECT_GE(r.face(15, 15), 2);
  EXPECT_NEAR(r.depth(30, 30), 3.0, 1e-12);
}

TEST(Rasterize, DepthTieGoesToLowerFaceIndex) {
  TriMesh m = square(2.0, 0, 64);
  const TriMesh copy = square(2.0, 0, 64, 4);
  m.vertices.insert(m.vertices.end(), copy.vertices.begin(), copy.vertices.end());
  m.faces.insert(m.faces.end(), copy.faces.begin(), copy.faces.end());
  const auto r = rasterize(m, kK);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) EXPECT_LT(r.face(x, y), 2);
}

TEST(Rasterize, BehindCameraRendersNothing) {
  const auto r = rasterize(square(-2.0, 8, 24), kK);
  EXPECT_EQ(count_set(r.depth.silhouette()), 0u);
  TriMesh straddle = square(2.0, 8, 24);
  straddle.vertices[0].z() = -1.0;  // triangles touching this vertex are dropped
  const auto s = rasterize(straddle, kK);
  EXPECT_EQ(count_set(s.depth.silhouette()), 0u);
}

TEST(Rasterize, MatchesRayCastOracle) {
  const TriMesh m = wavy();
  const auto r = rasterize(m, kK);
  const oracle::Caster cast(m, kK);
  std::size_t mismatched = 0;
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) {
      const auto d = cast.depth(pixel_center(x, y));
      if (d.has_value() != r.depth.valid(x, y)) {
        ++mismatched;
        continue;
      }
      if (d) {
        EXPECT_NEAR(*d, r.depth(x, y), 1e-9);
      }
    }
  EXPECT_EQ(mismatched, 0u);
}

TEST(Visibility, ToleranceIsFiveMillimeters) {
  const TriMesh m = square(2.0, 0, 64);
  const Vec3 on = unproject(kK, Vec2(20.3, 40.8), 2.0);
  const std::vector<Vec3> pts{on, on * (2.004 / 2.0), on * (2.006 / 2.0), on * (1.0 / 2.0)};
  EXPECT_EQ(visibility(m, kK, pts), (std::vector<std::uint8_t>{1, 1, 0, 1}));
}

TEST(Visibility, OutsideImageOrBehindIsInvisible) {
  const TriMesh m = square(2.0, 0, 64);
  const std::vector<Vec3> pts{Vec3(5, 0, 2), Vec3(0, 0, -1)};
  EXPECT_EQ(visibility(m, kK, pts), (std::vector<std::uint8_t>{0, 0}));
}

TEST(Visibility, UsesFacePlaneAtTheProjectedPosition) {
  // On a slanted surface, a surface point is visible even though the pixel-center depth of
  // its pixel differs by more than the tolerance.
  TriMesh m = square(2.0, 0, 64);
  for (auto& v : m.vertices) v.z() += 2.0 * v.x();
  const auto r = rasterize(m, kK);
  const Vec2 q(30.99, 12.01);
  const auto depth = rendered_depth_at(r, m, kK, q);
  ASSERT_TRUE(depth.has_value());
  EXPECT_TRUE(point_visible(r, m, kK, unproject(kK, q, *depth)));
}

TEST(MotionMap, IdentityTransformsAreExact) {
  const TriMesh m = wavy();
  VertexTransforms vt;
  vt.transforms.assign(m.vertices.size(), RigidTransform::identity());
  vt.degenerate.assign(m.vertices.size(), 0);
  const auto r = rasterize(m, kK);
  const auto mm = render_motion_map(r, m, vt);
  EXPECT_EQ(mm.valid, r.depth.silhouette());
  for (std::size_t i = 0; i < mm.valid.size(); ++i)
    if (mm.valid[i]) {
      EXPECT_EQ(mm.transforms[i].rotation, Mat3::Identity());
      EXPECT_EQ(mm.transforms[i].translation, Vec3::Zero());
    }
}

TEST(MotionMap, GlobalRigidMotionIsRecoveredPerPixel) {
  const TriMesh m = wavy();
  const RigidTransform g{Eigen::AngleAxisd(0.2, Vec3(0.3, 1, 0.1).normalized()).toRotationMatrix(), Vec3(0.05, -0.02, 0.1)};
  const auto mm = render_motion_map(m, oracle::transformed(m, g), all_vertex_transforms(m, oracle::transformed(m, g), build_two_ring(m.faces, m.vertices.size())), kK);
  std::size_t n = 0;
  for (std::size_t i = 0; i < mm.valid.size(); ++i)
    if (mm.valid[i]) {
      ++n;
      EXPECT_LT(rotation_angle_between(mm.transforms[i].rotation, g.rotation), 1e-9);
      EXPECT_LT((mm.transforms[i].translation - g.translation).norm(), 1e-9);
    }
  EXPECT_GT(n, 1000u);
}
