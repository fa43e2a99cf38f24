#pragma once

#include <cmath>
#include <random>

#include "nrdepth/masks.hpp"
#include "nrdepth/photometric.hpp"

namespace fixture {

using namespace nrdepth;

/// Smooth random color field: 0.5 + sum of a few plane waves per channel.
inline Image smooth_image(std::mt19937_64& rng, int w, int h, double cycles = 3.0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image img(w, h);
  for (int c = 0; c < Image::kChannels; ++c) {
    double kx[4], ky[4], ph[4], amp[4];
    for (int i = 0; i < 4; ++i) {
      kx[i] = (u(rng) - 0.5) * 2.0 * M_PI * cycles / w;
      ky[i] = (u(rng) - 0.5) * 2.0 * M_PI * cycles / h;
      ph[i] = 2.0 * M_PI * u(rng);
      amp[i] = 0.05 + 0.07 * u(rng);
    }
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double v = 0.5;
        for (int i = 0; i < 4; ++i) v += amp[i] * std::sin(kx[i] * x + ky[i] * y + ph[i]);
        img(x, y, c) = v;
      }
  }
  return img;
}

/// Random tuple with smooth images, smoothly varying per-pixel motion, an elliptical
/// silhouette, and random validation masks. Warps move pixels by a few pixels.
inline FrameTuple random_tuple(std::uint64_t seed, int w = 32, int h = 32, int references = 3,
                               double mask_density = 0.85) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  FrameTuple t;
  t.target_frame = 0;
  t.intrinsics = {1.25 * w, 1.25 * w, 0.5 * w + 0.3, 0.5 * h - 0.2, w, h};
  t.base_depth = DepthMap(w, h);
  const double a = 0.2 + 0.2 * u(rng), b = 0.2 * u(rng), c = 2.0 * M_PI * u(rng);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double ex = (x + 0.5 - 0.5 * w) / (0.47 * w), ey = (y + 0.5 - 0.5 * h) / (0.42 * h);
      if (ex * ex + ey * ey > 1.0) continue;
      t.base_depth(x, y) = 2.0 + a * std::sin(0.2 * x + c) * std::cos(0.15 * y) + b * ex;
    }
  t.target_image = smooth_image(rng, w, h);
  for (int r = 0; r < references; ++r) {
    ReferenceView view;
    view.frame = r + 1;
    view.image = smooth_image(rng, w, h);
    view.motion = MotionMap(w, h);
    view.mask = Mask(w, h, 0);
    const Vec3 axis = Vec3(u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5).normalized();
    const double angle0 = 0.03 * (u(rng) - 0.5);
    const Vec3 t0(0.12 * (u(rng) - 0.5), 0.12 * (u(rng) - 0.5), 0.1 * (u(rng) - 0.5));
    const double phase = 2.0 * M_PI * u(rng);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        if (!t.base_depth.valid(x, y)) continue;
        const double s = std::sin(0.13 * x + 0.07 * y + phase);
        view.motion.transforms(x, y) = {
            Eigen::AngleAxisd(angle0 * (1.0 + 0.5 * s), axis).toRotationMatrix(),
            t0 + Vec3(0.01 * s, -0.01 * s, 0.005 * s)};
        view.motion.valid(x, y) = 1;
        view.mask(x, y) = u(rng) < mask_density ? 1 : 0;
      }
    t.references.push_back(std::move(view));
  }
  return t;
}

/// Random offsets in [-amp, amp] on the silhouette, zero elsewhere.
inline Grid<double> random_offsets(std::uint64_t seed, const FrameTuple& t, double amp) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-amp, amp);
  Grid<double> o(t.width(), t.height(), 0.0);
  for (std::size_t i = 0; i < o.size(); ++i)
    if (std::isfinite(t.base_depth.values[i])) o[i] = u(rng);
  return o;
}

}  // namespace fixture
