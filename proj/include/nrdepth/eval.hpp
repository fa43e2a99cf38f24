#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <vector>

#include "nrdepth/camera.hpp"
#include "nrdepth/error.hpp"
#include "nrdepth/mesh.hpp"
#include "nrdepth/raster.hpp"

namespace nrdepth {

using PointCloud = std::vector<Vec3>;

inline PointCloud depth_to_cloud(const DepthMap& depth, const Intrinsics& k) {
  PointCloud cloud;
  for (int y = 0; y < depth.height(); ++y)
    for (int x = 0; x < depth.width(); ++x)
      if (depth.valid(x, y) && depth(x, y) > 0.0)
        cloud.push_back(unproject(k, pixel_center(x, y), depth(x, y)));
  return cloud;
}

inline PointCloud transform_cloud(const PointCloud& cloud, const RigidTransform& t) {
  PointCloud out;
  out.reserve(cloud.size());
  for (const auto& p : cloud) out.push_back(t.apply(p));
  return out;
}

/// Exact nearest-neighbor queries over a static point set.
class KdTree {
 public:
  explicit KdTree(const PointCloud& points) : points_(&points) {
    order_.resize(points.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    nodes_.reserve(points.size());
    if (!points.empty()) build(0, points.size(), 0);
  }

  struct Hit {
    std::size_t index = 0;
    double squared_distance = std::numeric_limits<double>::infinity();
  };

  Hit nearest(const Vec3& query) const {
    Hit best;
    if (!nodes_.empty()) search(0, query, best);
    return best;
  }

 private:
  struct Node {
    std::size_t point = 0;
    int axis = 0;
    int left = -1;
    int right = -1;
  };

  int build(std::size_t begin, std::size_t end, int depth) {
    if (begin >= end) return -1;
    const int axis = depth % 3;
    const std::size_t mid = begin + (end - begin) / 2;
    const auto& pts = *points_;
    std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                     order_.begin() + static_cast<std::ptrdiff_t>(mid),
                     order_.begin() + static_cast<std::ptrdiff_t>(end),
                     [&](std::size_t a, std::size_t b) {
                       return pts[a](axis) < pts[b](axis) || (pts[a](axis) == pts[b](axis) && a < b);
                     });
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back({order_[mid], axis, -1, -1});
    const int left = build(begin, mid, depth + 1);
    const int right = build(mid + 1, end, depth + 1);
    nodes_[static_cast<std::size_t>(id)].left = left;
    nodes_[static_cast<std::size_t>(id)].right = right;
    return id;
  }

  void search(int id, const Vec3& q, Hit& best) const {
    const Node& node = nodes_[static_cast<std::size_t>(id)];
    const Vec3& p = (*points_)[node.point];
    const double d2 = (p - q).squaredNorm();
    if (d2 < best.squared_distance || (d2 == best.squared_distance && node.point < best.index))
      best = {node.point, d2};
    const double diff = q(node.axis) - p(node.axis);
    const int near = diff < 0.0 ? node.left : node.right;
    const int far = diff < 0.0 ? node.right : node.left;
    if (near >= 0) search(near, q, best);
    if (far >= 0 && diff * diff <= best.squared_distance) search(far, q, best);
  }

  const PointCloud* points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

struct IcpOptions {
  int max_iterations = 100;
  double tolerance = 1e-14;     // stop when the objective improves by less than this (m^2)
  double trim_fraction = 0.0;   // drop this fraction of worst correspondences (0 = off)
  bool centroid_init = true;    // start from the translation that aligns the centroids
  bool multi_start = true;      // also try rotated starts about the source centroid
};

struct IcpResult {
  RigidTransform transform;          // source -> target
  std::vector<double> objective;     // mean squared correspondence distance per iteration
  int iterations = 0;                // Kabsch updates applied
  bool converged = false;            // correspondence set stopped changing
};

namespace detail {

/// One ICP descent from `init`.
inline IcpResult icp_descent(const PointCloud& source, const PointCloud& target, const KdTree& tree,
                             const RigidTransform& init, const IcpOptions& options) {
  IcpResult result;
  result.transform = init;

  struct Match {
    std::size_t src;
    std::size_t dst;
    double d2;
  };
  std::vector<Match> matches(source.size());
  std::vector<std::size_t> previous;
  const std::size_t keep = options.trim_fraction > 0.0
                               ? std::max<std::size_t>(3, static_cast<std::size_t>(std::ceil(
                                                              (1.0 - options.trim_fraction) *
                                                              static_cast<double>(source.size()))))
                               : source.size();

  for (int it = 0;; ++it) {
    std::vector<std::size_t> current(source.size());
    for (std::size_t i = 0; i < source.size(); ++i) {
      const auto hit = tree.nearest(result.transform.apply(source[i]));
      matches[i] = {i, hit.index, hit.squared_distance};
      current[i] = hit.index;
    }
    std::vector<Match> kept = matches;
    if (keep < kept.size()) {
      std::stable_sort(kept.begin(), kept.end(),
                       [](const Match& a, const Match& b) { return a.d2 < b.d2; });
      kept.resize(keep);
    }
    long double sum = 0.0L;
    for (const auto& m : kept) sum += m.d2;
    result.objective.push_back(static_cast<double>(sum / static_cast<long double>(kept.size())));

    if (it > 0 && current == previous) {
      result.converged = true;
      break;
    }
    if (it >= options.max_iterations) break;
    if (it > 1) {
      const auto n = result.objective.size();
      if (result.objective[n - 2] - result.objective[n - 1] < options.tolerance) break;
    }
    previous = std::move(current);

    Vec3 cs = Vec3::Zero(), ct = Vec3::Zero();
    for (const auto& m : kept) {
      cs += source[m.src];
      ct += target[m.dst];
    }
    cs /= static_cast<double>(kept.size());
    ct /= static_cast<double>(kept.size());
    std::vector<Vec3> a, b;
    a.reserve(kept.size());
    b.reserve(kept.size());
    for (const auto& m : kept) {
      a.push_back(source[m.src] - cs);
      b.push_back(target[m.dst] - ct);
    }
    Mat3 r;
    if (!kabsch_rotation(a, b, r)) r.setIdentity();
    result.transform = {r, ct - r * cs};
    result.iterations = it + 1;
  }
  return result;
}

inline Vec3 centroid(const PointCloud& cloud) {
  Vec3 c = Vec3::Zero();
  for (const auto& p : cloud) c += p;
  return c / static_cast<double>(cloud.size());
}

/// Identity plus +-10 and +-20 degree turns about 13 axes (cube face, edge and corner
/// directions up to sign).
inline const std::vector<Mat3>& start_rotations() {
  static const std::vector<Mat3> starts = [] {
    std::vector<Mat3> out{Mat3::Identity()};
    std::vector<Vec3> axes;
    for (int x = -1; x <= 1; ++x)
      for (int y = -1; y <= 1; ++y)
        for (int z = -1; z <= 1; ++z) {
          const Vec3 a(x, y, z);
          // one representative per +-pair: first non-zero component positive
          const double lead = x != 0 ? x : (y != 0 ? y : z);
          if (lead > 0) axes.push_back(a.normalized());
        }
    for (const auto& axis : axes)
      for (double deg : {-20.0, -10.0, 10.0, 20.0})
        out.push_back(Eigen::AngleAxisd(deg * std::numbers::pi / 180.0, axis).toRotationMatrix());
    return out;
  }();
  return starts;
}

}  // namespace detail

/// Point-to-point ICP: nearest-neighbor correspondences, Kabsch update, until the
/// correspondence set stops changing, the objective stalls, or the iteration cap.
/// With multi_start, each start rotation is first descended on a subsample and the one with
/// the lowest objective is refined on the full clouds.
inline IcpResult icp_register(const PointCloud& source, const PointCloud& target,
                              const IcpOptions& options = {}) {
  if (source.empty() || target.empty()) throw InputError("ICP needs non-empty clouds");
  if (options.trim_fraction < 0.0 || options.trim_fraction >= 1.0)
    throw InputError("ICP trim fraction must be in [0, 1)");
  const KdTree tree(target);
  const Vec3 cs = detail::centroid(source);
  const Vec3 ct = options.centroid_init ? detail::centroid(target) : cs;

  auto start = [&](const Mat3& r) { return RigidTransform{r, ct - r * cs}; };
  RigidTransform init = start(Mat3::Identity());
  if (!options.centroid_init) init = RigidTransform::identity();

  if (options.multi_start) {
    constexpr std::size_t kSubsample = 600;
    const std::size_t stride = std::max<std::size_t>(1, source.size() / kSubsample);
    PointCloud sub;
    for (std::size_t i = 0; i < source.size(); i += stride) sub.push_back(source[i]);
    IcpOptions coarse = options;
    coarse.max_iterations = std::min(options.max_iterations, 40);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& r : detail::start_rotations()) {
      const RigidTransform s = options.centroid_init ? start(r) : RigidTransform{r, cs - r * cs};
      const auto res = detail::icp_descent(sub, target, tree, s, coarse);
      if (res.objective.back() < best) {
        best = res.objective.back();
        init = res.transform;
      }
    }
  }
  return detail::icp_descent(source, target, tree, init, options);
}

struct AccuracyReport {
  std::vector<double> thresholds;  // meters
  std::vector<double> accuracy;    // percent of result points within each threshold
  double mae = 0.0;                // meters
  std::size_t points = 0;
};

inline const std::vector<double>& default_thresholds() {
  static const std::vector<double> t{0.01, 0.02, 0.04};
  return t;
}

/// Per result point, the distance to its nearest truth point; accuracy@tau is the percentage
/// of distances <= tau and MAE their mean.
inline AccuracyReport accuracy_and_mae(const PointCloud& result, const PointCloud& truth,
                                       const std::vector<double>& thresholds = default_thresholds()) {
  if (result.empty() || truth.empty()) throw InputError("accuracy needs non-empty clouds");
  const KdTree tree(truth);
  AccuracyReport report;
  report.thresholds = thresholds;
  report.points = result.size();
  std::vector<std::size_t> within(thresholds.size(), 0);
  long double sum = 0.0L;
  for (const auto& p : result) {
    const double d = std::sqrt(tree.nearest(p).squared_distance);
    sum += d;
    for (std::size_t t = 0; t < thresholds.size(); ++t) within[t] += d <= thresholds[t];
  }
  report.mae = static_cast<double>(sum / static_cast<long double>(result.size()));
  for (auto w : within)
    report.accuracy.push_back(100.0 * static_cast<double>(w) / static_cast<double>(result.size()));
  return report;
}

}  // namespace nrdepth
