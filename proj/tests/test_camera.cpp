#include <gtest/gtest.h>

#include "nrdepth/camera.hpp"

using namespace nrdepth;

TEST(Camera, WeakPerspectiveConversionIsFrozen) {
  // z = f / (0.5 * size * s) = 500 / 256
  const Vec3 t = weak_to_perspective({1.0, 0.1, -0.2});
  EXPECT_DOUBLE_EQ(t.z(), 1.953125);
  EXPECT_DOUBLE_EQ(t.x(), 0.1);
  EXPECT_DOUBLE_EQ(t.y(), -0.2);
  EXPECT_DOUBLE_EQ(weak_to_perspective({0.5, 0, 0, 1000.0, 256.0}).z(), 15.625);
}

TEST(Camera, WeakPerspectiveRejectsNonPositiveScale) {
  EXPECT_THROW(weak_to_perspective({0.0, 0, 0}), CameraError);
  EXPECT_THROW(weak_to_perspective({-1.0, 0, 0}), CameraError);
}

TEST(Camera, ProjectIsFrozen) {
  const Intrinsics k{100, 100, 32, 32, 64, 64};
  const Vec2 q = project(k, Vec3(0.1, -0.2, 2.0));
  EXPECT_DOUBLE_EQ(q.x(), 37.0);
  EXPECT_DOUBLE_EQ(q.y(), 22.0);
}

TEST(Camera, UnprojectInvertsProject) {
  const Intrinsics k{310, 290, 120.3, 131.7, 256, 240};
  for (double d : {0.5, 1.8, 7.0})
    for (int y = 0; y < 240; y += 37)
      for (int x = 0; x < 256; x += 41) {
        const Vec3 p = unproject(k, pixel_center(x, y), d);
        EXPECT_DOUBLE_EQ(p.z(), d);
        const Vec2 q = project(k, p);
        EXPECT_NEAR(q.x(), x + 0.5, 1e-12);
        EXPECT_NEAR(q.y(), y + 0.5, 1e-12);
      }
}

TEST(Camera, BehindCameraAndNonPositiveDepthThrow) {
  const Intrinsics k{100, 100, 32, 32, 64, 64};
  EXPECT_THROW(project(k, Vec3(0, 0, 0)), CameraError);
  EXPECT_THROW(project(k, Vec3(0, 0, -1)), CameraError);
  EXPECT_THROW(unproject(k, pixel_center(1, 1), 0.0), CameraError);
}

TEST(Camera, PixelCenterConvention) {
  EXPECT_EQ(pixel_center(0, 0), Vec2(0.5, 0.5));
  EXPECT_EQ(pixel_center(3, 7), Vec2(3.5, 7.5));
}

TEST(Camera, IntrinsicsMatrixAndScaling) {
  const Intrinsics k{500, 400, 256, 250, 512, 500};
  Mat3 m;
  m << 500, 0, 256, 0, 400, 250, 0, 0, 1;
  EXPECT_EQ(k.matrix(), m);
  const Intrinsics h = k.scaled(0.5);
  EXPECT_EQ(h, (Intrinsics{250, 200, 128, 125, 256, 250}));
  EXPECT_TRUE(k.principal_inside());
  EXPECT_FALSE((Intrinsics{500, 500, 600, 10, 512, 512}).principal_inside());
}

TEST(Camera, InvalidIntrinsicsRejected) {
  EXPECT_THROW((Intrinsics{0, 100, 1, 1, 8, 8}).validate(), Error);
  EXPECT_THROW((Intrinsics{100, 100, 1, 1, 0, 8}).validate(), Error);
}
