#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "nrdepth/camera.hpp"
#include "nrdepth/grid.hpp"
#include "nrdepth/log.hpp"
#include "nrdepth/raster.hpp"

namespace nrdepth {

/// One reference frame of a tuple, resampled to the working resolution.
struct ReferenceView {
  int frame = 0;
  MotionMap motion;  // target -> this reference
  Mask mask;         // validation mask M_r
  Image image;
};

/// A target frame and its reference frames, everything at one working resolution.
struct FrameTuple {
  int target_frame = 0;
  Intrinsics intrinsics;
  DepthMap base_depth;
  Image target_image;
  std::vector<ReferenceView> references;

  int width() const { return base_depth.width(); }
  int height() const { return base_depth.height(); }

  /// Throws InputError when maps disagree in size with the base depth.
  void validate(bool require_images = true) const {
    const int w = width();
    const int h = height();
    if (intrinsics.width != w || intrinsics.height != h)
      throw InputError("tuple intrinsics do not match the base depth size");
    if (require_images && (target_image.width() != w || target_image.height() != h))
      throw InputError("target image does not match the base depth size");
    for (const auto& r : references) {
      if (r.motion.width() != w || r.motion.height() != h || r.mask.width() != w ||
          r.mask.height() != h)
        throw InputError("reference " + std::to_string(r.frame) + ": map size mismatch");
      if (require_images && (r.image.width() != w || r.image.height() != h))
        throw InputError("reference " + std::to_string(r.frame) + ": image size mismatch");
    }
  }
};

/// Target index with the reference indices it groups.
struct TupleIndex {
  int target = 0;
  std::vector<int> references;
  bool operator==(const TupleIndex&) const = default;
};

/// |t| per valid motion pixel, 0 elsewhere.
inline Grid<double> pixel_baseline(const MotionMap& motion) {
  Grid<double> out(motion.width(), motion.height(), 0.0);
  for (std::size_t i = 0; i < out.size(); ++i)
    if (motion.valid[i]) out[i] = motion.transforms[i].translation.norm();
  return out;
}

struct MaskParams {
  double pixel_baseline_min = 0.05;  // meters
  double visibility_tolerance = kVisibilityTolerance;
};

/// M_r over precomputed target/reference renders. A pixel is valid when its surface point
/// is visible in the target render, the transformed point is visible in the reference
/// render, and its baseline exceeds the threshold.
inline Mask validation_mask(const MotionMap& motion, const RenderBuffers& target_render,
                            const TriMesh& target_mesh, const RenderBuffers& reference_render,
                            const TriMesh& reference_mesh, const Intrinsics& k,
                            const MaskParams& params = {}) {
  Mask out(motion.width(), motion.height(), 0);
  for (int y = 0; y < motion.height(); ++y)
    for (int x = 0; x < motion.width(); ++x) {
      if (!motion.valid(x, y) || !target_render.depth.valid(x, y)) continue;
      const auto& tr = motion.transforms(x, y);
      if (!(tr.translation.norm() > params.pixel_baseline_min)) continue;
      const Vec3 surface = unproject(k, pixel_center(x, y), target_render.depth(x, y));
      if (!point_visible(target_render, target_mesh, k, surface, params.visibility_tolerance))
        continue;
      if (!point_visible(reference_render, reference_mesh, k, tr.apply(surface),
                         params.visibility_tolerance))
        continue;
      out(x, y) = 1;
    }
  return out;
}

inline Mask validation_mask(const MotionMap& motion, const TriMesh& target_mesh,
                            const TriMesh& reference_mesh, const Intrinsics& k,
                            const MaskParams& params = {}) {
  return validation_mask(motion, rasterize(target_mesh, k), target_mesh,
                         rasterize(reference_mesh, k), reference_mesh, k, params);
}

/// Mean pixel baseline pooled over the valid pixels of every reference motion map.
/// Empty when no reference has a valid pixel.
inline std::optional<double> tuple_mean_baseline(const FrameTuple& tuple) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& r : tuple.references)
    for (std::size_t i = 0; i < r.motion.valid.size(); ++i)
      if (r.motion.valid[i]) {
        sum += r.motion.transforms[i].translation.norm();
        ++count;
      }
  if (count == 0) return std::nullopt;
  return sum / static_cast<double>(count);
}

/// Keeps tuples whose pooled mean baseline is at least `min_mean_baseline`.
inline std::vector<FrameTuple> filter_tuples(std::vector<FrameTuple> tuples,
                                             double min_mean_baseline = 0.5) {
  std::vector<FrameTuple> kept;
  for (auto& t : tuples) {
    const auto mean = tuple_mean_baseline(t);
    if (!mean) {
      log::info("tuple " + std::to_string(t.target_frame) + " removed: no valid motion pixels");
      continue;
    }
    if (*mean >= min_mean_baseline) kept.push_back(std::move(t));
  }
  return kept;
}

inline const std::vector<int>& default_reference_offsets() {
  static const std::vector<int> offsets{-9, -8, -7, -5, -4, 4, 5, 7, 8, 9};
  return offsets;
}

/// Targets every `gap` frames from frame 0; references are target + offset clipped to the
/// sequence, in ascending order. Tuples with fewer than `min_references` survivors drop.
inline std::vector<TupleIndex> group_tuples(int sequence_length, int gap,
                                            const std::vector<int>& offsets,
                                            std::size_t min_references = 2) {
  if (gap < 1) throw InputError("tuple gap must be at least 1");
  std::vector<int> sorted = offsets;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  sorted.erase(std::remove(sorted.begin(), sorted.end(), 0), sorted.end());

  std::vector<TupleIndex> out;
  for (int t = 0; t < sequence_length; t += gap) {
    TupleIndex tuple{t, {}};
    for (int o : sorted)
      if (t + o >= 0 && t + o < sequence_length) tuple.references.push_back(t + o);
    if (tuple.references.size() >= min_references && !tuple.references.empty())
      out.push_back(std::move(tuple));
  }
  if (out.empty())
    log::warn("sequence of " + std::to_string(sequence_length) +
              " frames is too short to form a tuple");
  return out;
}

}  // namespace nrdepth
