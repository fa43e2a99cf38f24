#pragma once

#include <algorithm>
#include <array>
#include <cassert>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "nrdepth/error.hpp"

namespace nrdepth {

/// Dense row-major 2D array addressed as (x, y).
template <typename T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;
  Grid(int width, int height, T fill = T{})
      : width_(width), height_(height),
        values_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill) {
    if (width < 0 || height < 0) throw InputError("grid dimensions must be non-negative");
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  bool contains(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }

  T& operator()(int x, int y) {
    assert(contains(x, y));
    return values_[index(x, y)];
  }
  const T& operator()(int x, int y) const {
    assert(contains(x, y));
    return values_[index(x, y)];
  }

  T& operator[](std::size_t i) { return values_[i]; }
  const T& operator[](std::size_t i) const { return values_[i]; }

  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  std::span<T> values() & noexcept { return values_; }
  std::span<const T> values() const& noexcept { return values_; }
  std::span<const T> values() && = delete;  // would dangle

  void fill(const T& value) { std::fill(values_.begin(), values_.end(), value); }

  template <typename U>
  bool same_shape(const Grid<U>& other) const noexcept {
    return width_ == other.width() && height_ == other.height();
  }

  bool operator==(const Grid& other) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> values_;
};

/// Boolean per-pixel map. Stored as bytes so it can be addressed and spanned like any grid.
using Mask = Grid<std::uint8_t>;

template <typename A, typename B>
void require_same_shape(const Grid<A>& a, const Grid<B>& b, const char* what) {
  if (!a.same_shape(b)) throw InputError(std::string(what) + ": dimension mismatch");
}

inline std::size_t count_set(const Mask& mask) {
  std::size_t n = 0;
  for (auto v : mask.values()) n += v != 0;
  return n;
}

/// Three-channel image with intensities in [0, 1], stored as separate planes.
class Image {
 public:
  static constexpr int kChannels = 3;

  Image() = default;
  Image(int width, int height, double fill = 0.0)
      : planes_{Grid<double>(width, height, fill), Grid<double>(width, height, fill),
                Grid<double>(width, height, fill)} {}

  int width() const noexcept { return planes_[0].width(); }
  int height() const noexcept { return planes_[0].height(); }

  Grid<double>& channel(int c) { return planes_[static_cast<std::size_t>(c)]; }
  const Grid<double>& channel(int c) const { return planes_[static_cast<std::size_t>(c)]; }

  double& operator()(int x, int y, int c) { return channel(c)(x, y); }
  double operator()(int x, int y, int c) const { return channel(c)(x, y); }

  bool operator==(const Image& other) const = default;

 private:
  std::array<Grid<double>, kChannels> planes_;
};

/// Average non-overlapping factor x factor blocks. Dimensions must be divisible by factor.
inline Image downsample_average(const Image& image, int factor) {
  if (factor < 1 || image.width() % factor != 0 || image.height() % factor != 0)
    throw InputError("image size is not an integer multiple of the working resolution");
  if (factor == 1) return image;
  const int w = image.width() / factor;
  const int h = image.height() / factor;
  const double norm = 1.0 / (factor * factor);
  Image out(w, h);
  for (int c = 0; c < Image::kChannels; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double sum = 0.0;
        for (int dy = 0; dy < factor; ++dy)
          for (int dx = 0; dx < factor; ++dx) sum += image(x * factor + dx, y * factor + dy, c);
        out(x, y, c) = sum * norm;
      }
  return out;
}

inline constexpr double kInvalidDepth = std::numeric_limits<double>::quiet_NaN();

}  // namespace nrdepth
