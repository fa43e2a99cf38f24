#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <vector>

#include "nrdepth/camera.hpp"
#include "nrdepth/grid.hpp"
#include "nrdepth/masks.hpp"
#include "nrdepth/raster.hpp"

namespace nrdepth {

struct PhotoParams {
  double alpha = 0.9;        // SSIM_cs weight against L1
  int ssim_window = 7;       // odd side length
  double ssim_c = 0.03 * 0.03;
};

struct LossWeights {
  double smooth = 1e-5;
  double regularizer = 1e-6;
};

struct LossConfig {
  PhotoParams photo;
  LossWeights weights;
};

struct LossBreakdown {
  double photo = 0.0;
  double smooth = 0.0;
  double regularizer = 0.0;
  double total = 0.0;
  std::vector<double> per_reference;
};

inline double combine_losses(double photo, double smooth, double regularizer,
                             const LossWeights& w) {
  return photo + w.smooth * smooth + w.regularizer * regularizer;
}

/// base + offset on silhouette pixels; NaN elsewhere.
inline DepthMap compose_offsets(const DepthMap& base, const Grid<double>& offsets) {
  require_same_shape(base.values, offsets, "compose_depth");
  DepthMap out(base.width(), base.height());
  for (std::size_t i = 0; i < offsets.size(); ++i)
    if (std::isfinite(base.values[i])) out.values[i] = base.values[i] + offsets[i];
  return out;
}

// ---------------------------------------------------------------------------------------
// Warping and sampling

/// Camera-frame point of pixel (x, y) at `depth`, carried by `transform`.
inline Vec3 warp_point(const Intrinsics& k, const RigidTransform& transform, int x, int y,
                       double depth) {
  return transform.rotation * (pixel_ray(k, pixel_center(x, y)) * depth) + transform.translation;
}

struct WarpField {
  Grid<Vec2> coords;  // continuous coordinates in the reference image
  Mask valid;
};

/// p_r = project(K, R * unproject(K, p_t, D(p_t)) + t). Pixels that land behind the camera
/// or outside the image are flagged invalid.
inline WarpField warp_pixels(const Intrinsics& k, const MotionMap& motion, const DepthMap& depth) {
  require_same_shape(motion.transforms, depth.values, "warp_pixels");
  WarpField out{Grid<Vec2>(depth.width(), depth.height(), Vec2::Zero()),
                Mask(depth.width(), depth.height(), 0)};
  for (int y = 0; y < depth.height(); ++y)
    for (int x = 0; x < depth.width(); ++x) {
      if (!motion.valid(x, y) || !depth.valid(x, y) || !(depth(x, y) > 0.0)) continue;
      const Vec3 p = warp_point(k, motion.transforms(x, y), x, y, depth(x, y));
      if (!(p.z() > detail::kNearPlane)) continue;
      const Vec2 q = project(k, p);
      if (!(q.x() >= 0.0 && q.y() >= 0.0 && q.x() <= k.width && q.y() <= k.height)) continue;
      out.coords(x, y) = q;
      out.valid(x, y) = 1;
    }
  return out;
}

/// True when all four texels of the bilinear footprint at continuous `q` exist.
inline bool bilinear_in_range(int width, int height, const Vec2& q) {
  const double x = q.x() - 0.5;
  const double y = q.y() - 0.5;
  return width >= 2 && height >= 2 && x >= 0.0 && y >= 0.0 && x <= width - 1 && y <= height - 1;
}

struct BilinearFootprint {
  int x0 = 0;
  int y0 = 0;
  double fx = 0.0;
  double fy = 0.0;
};

/// Texel cell of continuous `q` (texel centers at +0.5). Caller checks bilinear_in_range.
inline BilinearFootprint bilinear_footprint(int width, int height, const Vec2& q) {
  const double x = q.x() - 0.5;
  const double y = q.y() - 0.5;
  BilinearFootprint f;
  f.x0 = std::min(static_cast<int>(std::floor(x)), width - 2);
  f.y0 = std::min(static_cast<int>(std::floor(y)), height - 2);
  f.fx = x - f.x0;
  f.fy = y - f.y0;
  return f;
}

/// Bilinear value at `f`, with optional partial derivatives in the continuous coordinates.
inline double bilinear_value(const Grid<double>& plane, const BilinearFootprint& f,
                             double* d_du = nullptr, double* d_dv = nullptr) {
  const double i00 = plane(f.x0, f.y0);
  const double i10 = plane(f.x0 + 1, f.y0);
  const double i01 = plane(f.x0, f.y0 + 1);
  const double i11 = plane(f.x0 + 1, f.y0 + 1);
  const double top = (1.0 - f.fx) * i00 + f.fx * i10;
  const double bottom = (1.0 - f.fx) * i01 + f.fx * i11;
  if (d_du) *d_du = (1.0 - f.fy) * (i10 - i00) + f.fy * (i11 - i01);
  if (d_dv) *d_dv = bottom - top;
  return (1.0 - f.fy) * top + f.fy * bottom;
}

struct SampledImage {
  Image image;
  Mask valid;
};

/// Synthesize an image by bilinear lookup at per-pixel continuous coordinates.
inline SampledImage sample_bilinear(const Image& image, const WarpField& warp) {
  const int w = warp.coords.width();
  const int h = warp.coords.height();
  SampledImage out{Image(w, h), Mask(w, h, 0)};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!warp.valid(x, y)) continue;
      const Vec2& q = warp.coords(x, y);
      if (!bilinear_in_range(image.width(), image.height(), q)) continue;
      const auto f = bilinear_footprint(image.width(), image.height(), q);
      for (int c = 0; c < Image::kChannels; ++c) out.image(x, y, c) = bilinear_value(image.channel(c), f);
      out.valid(x, y) = 1;
    }
  return out;
}

// ---------------------------------------------------------------------------------------
// SSIM_cs and the photometric term

namespace detail {

/// Clipped square-window sums, separable. Values outside the image contribute nothing.
inline Grid<double> box_sum(const Grid<double>& in, int radius) {
  const int w = in.width();
  const int h = in.height();
  Grid<double> rows(w, h, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = std::max(0, x - radius); i <= std::min(w - 1, x + radius); ++i) s += in(i, y);
      rows(x, y) = s;
    }
  Grid<double> out(w, h, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int j = std::max(0, y - radius); j <= std::min(h - 1, y + radius); ++j) s += rows(x, j);
      out(x, y) = s;
    }
  return out;
}

struct WindowStats {
  double n = 0.0;
  double mean_a = 0.0;
  double mean_b = 0.0;
  double var_a = 0.0;
  double var_b = 0.0;
  double cov = 0.0;
};

/// Masked window moments around (x, y), centered two-pass. `count`, `sum_a`, `sum_b` are
/// box sums of mask, mask*a, mask*b.
inline WindowStats window_stats(const Grid<double>& a, const Grid<double>& b, const Mask& mask,
                                const Grid<double>& count, const Grid<double>& sum_a,
                                const Grid<double>& sum_b, int x, int y, int radius) {
  WindowStats s;
  s.n = count(x, y);
  s.mean_a = sum_a(x, y) / s.n;
  s.mean_b = sum_b(x, y) / s.n;
  const int x0 = std::max(0, x - radius), x1 = std::min(a.width() - 1, x + radius);
  const int y0 = std::max(0, y - radius), y1 = std::min(a.height() - 1, y + radius);
  for (int j = y0; j <= y1; ++j)
    for (int i = x0; i <= x1; ++i) {
      if (!mask(i, j)) continue;
      const double da = a(i, j) - s.mean_a;
      const double db = b(i, j) - s.mean_b;
      s.var_a += da * da;
      s.var_b += db * db;
      s.cov += da * db;
    }
  s.var_a /= s.n;
  s.var_b /= s.n;
  s.cov /= s.n;
  return s;
}

inline Grid<double> masked_product(const Grid<double>& a, const Mask& mask) {
  Grid<double> out(a.width(), a.height(), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    if (mask[i]) out[i] = a[i];
  return out;
}

inline Grid<double> mask_as_double(const Mask& mask) {
  Grid<double> out(mask.width(), mask.height(), 0.0);
  for (std::size_t i = 0; i < mask.size(); ++i) out[i] = mask[i] ? 1.0 : 0.0;
  return out;
}

inline double sign(double v) { return (v > 0.0) - (v < 0.0); }

}  // namespace detail

/// (2*cov + c) / (var_a + var_b + c) over w x w windows restricted to `mask`, evaluated at
/// mask pixels (0 elsewhere). Windows are clipped at the image border.
inline Grid<double> ssim_cs(const Grid<double>& a, const Grid<double>& b, const Mask& mask,
                            int window, double c) {
  require_same_shape(a, b, "ssim_cs");
  require_same_shape(a, mask, "ssim_cs");
  if (window < 1 || window % 2 == 0) throw InputError("SSIM window must be a positive odd size");
  const int r = window / 2;
  const auto count = detail::box_sum(detail::mask_as_double(mask), r);
  const auto sum_a = detail::box_sum(detail::masked_product(a, mask), r);
  const auto sum_b = detail::box_sum(detail::masked_product(b, mask), r);
  Grid<double> out(a.width(), a.height(), 0.0);
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x) {
      if (!mask(x, y)) continue;
      const auto s = detail::window_stats(a, b, mask, count, sum_a, sum_b, x, y, r);
      out(x, y) = (2.0 * s.cov + c) / (s.var_a + s.var_b + c);
    }
  return out;
}

inline Grid<double> ssim_cs(const Grid<double>& a, const Grid<double>& b, int window, double c) {
  return ssim_cs(a, b, Mask(a.width(), a.height(), 1), window, c);
}

namespace detail {

/// Masked mean over active pixels of alpha*(1 - SSIM_cs)/2 + (1 - alpha)*|a - b|, averaged
/// over channels. When `grad` is given it receives dLoss/d(synthesized) per channel.
inline double photo_term(const Image& target, const Image& synthesized, const Mask& active,
                         const PhotoParams& params, std::array<Grid<double>, 3>* grad) {
  const int w = target.width();
  const int h = target.height();
  const std::size_t n_active = count_set(active);
  if (grad)
    for (auto& g : *grad) g = Grid<double>(w, h, 0.0);
  if (n_active == 0) return 0.0;
  if (params.ssim_window < 1 || params.ssim_window % 2 == 0)
    throw InputError("SSIM window must be a positive odd size");

  const int r = params.ssim_window / 2;
  const double c = params.ssim_c;
  const double alpha = params.alpha;
  const double norm = 1.0 / (static_cast<double>(n_active) * Image::kChannels);
  const auto count = box_sum(mask_as_double(active), r);

  long double total = 0.0L;
  for (int ch = 0; ch < Image::kChannels; ++ch) {
    const Grid<double>& a = target.channel(ch);
    const Grid<double> b = masked_product(synthesized.channel(ch), active);
    const auto sum_a = box_sum(masked_product(a, active), r);
    const auto sum_b = box_sum(b, r);

    Grid<double> coef_a, coef_a_mean, coef_b, coef_b_mean;
    if (grad) {
      coef_a = coef_a_mean = coef_b = coef_b_mean = Grid<double>(w, h, 0.0);
    }
    const double g = -alpha * 0.5 * norm;  // dLoss/dSSIM at each active pixel

    long double channel_sum = 0.0L;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        if (!active(x, y)) continue;
        const auto s = window_stats(a, b, active, count, sum_a, sum_b, x, y, r);
        const double num = 2.0 * s.cov + c;
        const double den = s.var_a + s.var_b + c;
        const double ssim = num / den;
        channel_sum += alpha * 0.5 * (1.0 - ssim) + (1.0 - alpha) * std::abs(a(x, y) - b(x, y));
        if (grad) {
          const double ca = 2.0 * g / (s.n * den);
          const double cb = 2.0 * g * num / (s.n * den * den);
          coef_a(x, y) = ca;
          coef_a_mean(x, y) = ca * s.mean_a;
          coef_b(x, y) = cb;
          coef_b_mean(x, y) = cb * s.mean_b;
        }
      }
    total += channel_sum;

    if (grad) {
      const auto sa = box_sum(coef_a, r);
      const auto sam = box_sum(coef_a_mean, r);
      const auto sb = box_sum(coef_b, r);
      const auto sbm = box_sum(coef_b_mean, r);
      auto& out = (*grad)[static_cast<std::size_t>(ch)];
      const double l1 = (1.0 - alpha) * norm;
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          if (!active(x, y)) continue;
          out(x, y) = a(x, y) * sa(x, y) - sam(x, y) - b(x, y) * sb(x, y) + sbm(x, y) +
                      l1 * sign(b(x, y) - a(x, y));
        }
    }
  }
  return static_cast<double>(total * static_cast<long double>(norm));
}

}  // namespace detail

/// L_photo^r: masked mean of the SSIM_cs/L1 blend; 0 when no pixel is active.
inline double photo_loss_one_ref(const Image& target, const Image& synthesized, const Mask& active,
                                 const PhotoParams& params = {}) {
  if (target.width() != synthesized.width() || target.height() != synthesized.height())
    throw InputError("photo_loss_one_ref: image size mismatch");
  require_same_shape(target.channel(0), active, "photo_loss_one_ref");
  return detail::photo_term(target, synthesized, active, params, nullptr);
}

// ---------------------------------------------------------------------------------------
// Shape terms. Both operate on the residual composed - base over silhouette pixels.

namespace detail {

inline Grid<double> residual(const DepthMap& composed, const DepthMap& base) {
  require_same_shape(composed.values, base.values, "shape loss");
  Grid<double> out(base.width(), base.height(), kInvalidDepth);
  for (std::size_t i = 0; i < out.size(); ++i)
    if (std::isfinite(base.values[i]) && std::isfinite(composed.values[i]))
      out[i] = composed.values[i] - base.values[i];
  return out;
}

inline double smooth_of_residual(const Grid<double>& d, Grid<double>* grad, double weight) {
  long double sum = 0.0L;
  for (int y = 0; y < d.height(); ++y)
    for (int x = 0; x < d.width(); ++x) {
      if (!std::isfinite(d(x, y))) continue;
      if (x + 1 < d.width() && std::isfinite(d(x + 1, y))) {
        const double diff = d(x + 1, y) - d(x, y);
        sum += std::abs(diff);
        if (grad) {
          (*grad)(x + 1, y) += weight * sign(diff);
          (*grad)(x, y) -= weight * sign(diff);
        }
      }
      if (y + 1 < d.height() && std::isfinite(d(x, y + 1))) {
        const double diff = d(x, y + 1) - d(x, y);
        sum += std::abs(diff);
        if (grad) {
          (*grad)(x, y + 1) += weight * sign(diff);
          (*grad)(x, y) -= weight * sign(diff);
        }
      }
    }
  return static_cast<double>(sum);
}

inline double regularizer_of_residual(const Grid<double>& d, Grid<double>* grad, double weight) {
  long double sum = 0.0L;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!std::isfinite(d[i])) continue;
    sum += std::abs(d[i]);
    if (grad) (*grad)[i] += weight * sign(d[i]);
  }
  return static_cast<double>(sum);
}

}  // namespace detail

/// Sum over valid forward-difference pairs of |grad D_composed - grad D_base|, x and y.
inline double smooth_loss(const DepthMap& composed, const DepthMap& base) {
  return detail::smooth_of_residual(detail::residual(composed, base), nullptr, 0.0);
}

/// Sum over valid pixels of |D_composed - D_base|.
inline double regularizer_loss(const DepthMap& composed, const DepthMap& base) {
  return detail::regularizer_of_residual(detail::residual(composed, base), nullptr, 0.0);
}

// ---------------------------------------------------------------------------------------
// Full objective

/// Total loss over one tuple as a function of the per-pixel detail offset (meters), with
/// its analytic gradient. Static per-pixel quantities are precomputed once.
class PhotoObjective {
 public:
  PhotoObjective(const FrameTuple& tuple, LossConfig config)
      : tuple_(&tuple), config_(config) {
    tuple.validate();
    const int w = tuple.width();
    const int h = tuple.height();
    rays_ = Grid<Vec3>(w, h, Vec3::Zero());
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) rays_(x, y) = pixel_ray(tuple.intrinsics, pixel_center(x, y));
  }

  const FrameTuple& tuple() const { return *tuple_; }
  const LossConfig& config() const { return config_; }

  /// Loss at `offsets`; fills `gradient` (d total / d offset) when non-null. Pixels outside
  /// the silhouette get zero gradient.
  LossBreakdown evaluate(const Grid<double>& offsets, Grid<double>* gradient = nullptr) const {
    const FrameTuple& t = *tuple_;
    require_same_shape(t.base_depth.values, offsets, "detail map");
    const int w = t.width();
    const int h = t.height();
    const Intrinsics& k = t.intrinsics;
    const DepthMap composed = compose_offsets(t.base_depth, offsets);
    if (gradient) *gradient = Grid<double>(w, h, 0.0);

    LossBreakdown out;
    long double photo = 0.0L;
    std::array<Grid<double>, 3> dsynth;
    for (const auto& ref : t.references) {
      Image synth(w, h);
      Mask active(w, h, 0);
      Grid<Vec3> d_point;  // d(warped point)/d depth
      Grid<Vec3> point;
      if (gradient) {
        d_point = Grid<Vec3>(w, h, Vec3::Zero());
        point = Grid<Vec3>(w, h, Vec3::Zero());
      }
      std::vector<BilinearFootprint> footprints(static_cast<std::size_t>(w) * h);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          if (!ref.mask(x, y) || !ref.motion.valid(x, y) || !composed.valid(x, y)) continue;
          const double depth = composed(x, y);
          if (!(depth > 0.0)) continue;
          const RigidTransform& tr = ref.motion.transforms(x, y);
          const Vec3 p = warp_point(k, tr, x, y, depth);
          if (!(p.z() > detail::kNearPlane)) continue;
          const Vec2 q = project(k, p);
          if (!bilinear_in_range(ref.image.width(), ref.image.height(), q)) continue;
          const auto f = bilinear_footprint(ref.image.width(), ref.image.height(), q);
          footprints[active.index(x, y)] = f;
          for (int c = 0; c < Image::kChannels; ++c)
            synth(x, y, c) = bilinear_value(ref.image.channel(c), f);
          active(x, y) = 1;
          if (gradient) {
            point(x, y) = p;
            d_point(x, y) = tr.rotation * rays_(x, y);
          }
        }

      const double term = detail::photo_term(t.target_image, synth, active, config_.photo,
                                             gradient ? &dsynth : nullptr);
      out.per_reference.push_back(term);
      photo += term;

      if (gradient) {
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x) {
            if (!active(x, y)) continue;
            const Vec3& p = point(x, y);
            const Vec3& dp = d_point(x, y);
            const double inv_z = 1.0 / p.z();
            const double du = k.focal_x * (dp.x() * p.z() - p.x() * dp.z()) * inv_z * inv_z;
            const double dv = k.focal_y * (dp.y() * p.z() - p.y() * dp.z()) * inv_z * inv_z;
            const auto& f = footprints[active.index(x, y)];
            double g = 0.0;
            for (int c = 0; c < Image::kChannels; ++c) {
              double di_du = 0.0, di_dv = 0.0;
              bilinear_value(ref.image.channel(c), f, &di_du, &di_dv);
              g += dsynth[static_cast<std::size_t>(c)](x, y) * (di_du * du + di_dv * dv);
            }
            (*gradient)(x, y) += g;
          }
      }
    }
    out.photo = static_cast<double>(photo);

    const auto resid = detail::residual(composed, t.base_depth);
    out.smooth = detail::smooth_of_residual(resid, gradient, config_.weights.smooth);
    out.regularizer = detail::regularizer_of_residual(resid, gradient, config_.weights.regularizer);
    out.total = combine_losses(out.photo, out.smooth, out.regularizer, config_.weights);
    return out;
  }

 private:
  const FrameTuple* tuple_;
  LossConfig config_;
  Grid<Vec3> rays_;
};

/// L_photo = sum over references of L_photo^r.
inline double photo_loss(const FrameTuple& tuple, const Grid<double>& offsets,
                         const LossConfig& config = {}) {
  return PhotoObjective(tuple, config).evaluate(offsets).photo;
}

inline LossBreakdown total_loss(const FrameTuple& tuple, const Grid<double>& offsets,
                                const LossConfig& config = {}) {
  return PhotoObjective(tuple, config).evaluate(offsets);
}

inline Grid<double> total_loss_gradient(const FrameTuple& tuple, const Grid<double>& offsets,
                                        const LossConfig& config = {}) {
  Grid<double> grad;
  PhotoObjective(tuple, config).evaluate(offsets, &grad);
  return grad;
}

}  // namespace nrdepth
