#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "nrdepth/error.hpp"
#include "nrdepth/grid.hpp"
#include "nrdepth/masks.hpp"
#include "nrdepth/photometric.hpp"
#include "nrdepth/raster.hpp"

namespace nrdepth {

/// Per-pixel detail parameterized by unbounded raw values; the offset in meters is
/// 2*bound*sigmoid(raw) - bound, so it never leaves (-bound, +bound).
class DetailMap {
 public:
  static constexpr double kDefaultBound = 0.1;

  DetailMap() = default;
  DetailMap(int width, int height, double bound = kDefaultBound)
      : raw_(width, height, 0.0), bound_(bound) {}
  DetailMap(Grid<double> raw, double bound = kDefaultBound) : raw_(std::move(raw)), bound_(bound) {}

  int width() const noexcept { return raw_.width(); }
  int height() const noexcept { return raw_.height(); }
  double bound() const noexcept { return bound_; }

  Grid<double>& raw() noexcept { return raw_; }
  const Grid<double>& raw() const noexcept { return raw_; }

  static double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

  double offset_of(double raw) const { return 2.0 * bound_ * sigmoid(raw) - bound_; }

  /// d offset / d raw
  double slope_of(double raw) const {
    const double s = sigmoid(raw);
    return 2.0 * bound_ * s * (1.0 - s);
  }

  Grid<double> offsets() const {
    Grid<double> out(width(), height(), 0.0);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = offset_of(raw_[i]);
    return out;
  }

  bool operator==(const DetailMap&) const = default;

 private:
  Grid<double> raw_;
  double bound_ = kDefaultBound;
};

/// base + offset on silhouette pixels; invalid elsewhere.
inline DepthMap compose_depth(const DepthMap& base, const DetailMap& detail) {
  if (base.width() != detail.width() || base.height() != detail.height())
    throw InputError("compose_depth: base and detail sizes differ");
  return compose_offsets(base, detail.offsets());
}

/// Subtract the median over valid pixels (mean of the two middle values for even counts).
inline DepthMap zero_median_normalize(const DepthMap& depth) {
  std::vector<double> valid;
  for (double v : depth.values.values())
    if (std::isfinite(v)) valid.push_back(v);
  DepthMap out = depth;
  if (valid.empty()) return out;
  const std::size_t mid = valid.size() / 2;
  std::nth_element(valid.begin(), valid.begin() + static_cast<std::ptrdiff_t>(mid), valid.end());
  double median = valid[mid];
  if (valid.size() % 2 == 0) {
    const double lower = *std::max_element(valid.begin(), valid.begin() + static_cast<std::ptrdiff_t>(mid));
    median = 0.5 * (lower + median);
  }
  for (auto& v : out.values.values())
    if (std::isfinite(v)) v -= median;
  return out;
}

struct OptimizerConfig {
  double step_size = 1e-2;           // Adam learning rate on raw parameters
  int iterations = 300;              // budget; 0 returns the initial map
  double convergence_tol = 1e-6;     // relative decrease over the window
  int convergence_window = 20;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double detail_bound = DetailMap::kDefaultBound;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(step_size > 0.0)) throw InputError("step size must be positive");
    if (iterations < 0) throw InputError("iteration budget must be non-negative");
    if (convergence_window < 1) throw InputError("convergence window must be at least 1");
    if (!(detail_bound > 0.0)) throw InputError("detail bound must be positive");
  }
};

struct RefineResult {
  DetailMap detail;
  std::vector<LossBreakdown> trace;  // trace[i] is the loss of iterate i (0 = initial)
  std::size_t best_iteration = 0;
  LossBreakdown best;
};

namespace detail {

inline std::string describe_nonfinite(const Grid<double>& grad) {
  std::ostringstream os;
  std::size_t shown = 0, count = 0;
  for (int y = 0; y < grad.height(); ++y)
    for (int x = 0; x < grad.width(); ++x)
      if (!std::isfinite(grad(x, y))) {
        ++count;
        if (shown < 8) {
          os << (shown ? ", " : "") << '(' << x << ',' << y << ')';
          ++shown;
        }
      }
  return std::to_string(count) + " pixel(s): " + os.str();
}

}  // namespace detail

/// First-order descent (Adam) on the raw detail parameters against the tuple's total loss.
/// Returns the best iterate seen; deterministic for identical inputs.
inline RefineResult optimize_detail(const FrameTuple& tuple, const OptimizerConfig& config,
                                    const LossConfig& loss_config = {},
                                    const DetailMap* initial = nullptr) {
  config.validate();
  const PhotoObjective objective(tuple, loss_config);
  DetailMap current = initial ? *initial : DetailMap(tuple.width(), tuple.height(), config.detail_bound);
  if (current.width() != tuple.width() || current.height() != tuple.height())
    throw InputError("initial detail map size differs from the tuple");

  const std::size_t n = current.raw().size();
  std::vector<double> m(n, 0.0), v(n, 0.0);
  Grid<double> grad;

  RefineResult result;
  result.detail = current;
  double beta1_pow = 1.0, beta2_pow = 1.0;

  for (int it = 0;; ++it) {
    const bool last = it >= config.iterations;
    LossBreakdown loss = objective.evaluate(current.offsets(), last ? nullptr : &grad);
    if (!std::isfinite(loss.total))
      throw NumericalError("non-finite loss at iteration " + std::to_string(it));
    result.trace.push_back(loss);
    if (it == 0 || loss.total < result.best.total) {
      result.best = loss;
      result.best_iteration = static_cast<std::size_t>(it);
      result.detail = current;
    }
    if (last) break;

    if (it >= config.convergence_window) {
      const double before = result.trace[static_cast<std::size_t>(it - config.convergence_window)].total;
      const double decrease = before - loss.total;
      if (decrease < config.convergence_tol * std::max(std::abs(before), 1e-300)) break;
    }

    auto& raw = current.raw();
    beta1_pow *= config.beta1;
    beta2_pow *= config.beta2;
    bool finite = true;
    for (std::size_t i = 0; i < n; ++i) {
      const double g = grad[i] * current.slope_of(raw[i]);
      if (!std::isfinite(g)) {
        finite = false;
        continue;
      }
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g;
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g * g;
      const double m_hat = m[i] / (1.0 - beta1_pow);
      const double v_hat = v[i] / (1.0 - beta2_pow);
      raw[i] -= config.step_size * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
    if (!finite)
      throw NumericalError("non-finite gradient at iteration " + std::to_string(it) + ": " +
                           detail::describe_nonfinite(grad));
  }
  return result;
}

/// Input a learned predictor sees: the target image and the zero-median base depth.
struct PredictorInput {
  Image image;
  DepthMap zero_median_depth;
};

inline PredictorInput predictor_input(const FrameTuple& tuple) {
  return {tuple.target_image, zero_median_normalize(tuple.base_depth)};
}

/// Produces a bounded detail map for a tuple.
class DetailPredictor {
 public:
  virtual ~DetailPredictor() = default;
  virtual DetailMap predict(const FrameTuple& tuple) = 0;
};

/// Built-in predictor: per-tuple direct optimization of the loss.
class DirectOptimizationPredictor final : public DetailPredictor {
 public:
  explicit DirectOptimizationPredictor(OptimizerConfig optimizer = {}, LossConfig loss = {})
      : optimizer_(optimizer), loss_(loss) {}

  DetailMap predict(const FrameTuple& tuple) override {
    last_ = optimize_detail(tuple, optimizer_, loss_);
    return last_.detail;
  }

  const RefineResult& last_result() const { return last_; }

 private:
  OptimizerConfig optimizer_;
  LossConfig loss_;
  RefineResult last_;
};

}  // namespace nrdepth
