#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include <png.h>

#include "nrdepth/error.hpp"
#include "nrdepth/grid.hpp"
#include "nrdepth/io/pfm.hpp"

namespace nrdepth::io {

namespace detail {

inline void write_png_raw(const std::filesystem::path& path, int width, int height,
                          std::uint32_t format, const std::vector<std::uint8_t>& pixels) {
  ensure_parent(path);
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = format;
  if (!png_image_write_to_file(&image, path.c_str(), 0, pixels.data(), 0, nullptr))
    throw InputError("cannot write " + path.string() + ": " + image.message);
}

inline std::vector<std::uint8_t> read_png_raw(const std::filesystem::path& path,
                                              std::uint32_t format, int& width, int& height) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str()))
    throw InputError("cannot read " + path.string() + ": " + image.message);
  image.format = format;
  std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, pixels.data(), 0, nullptr)) {
    png_image_free(&image);
    throw InputError("cannot decode " + path.string() + ": " + image.message);
  }
  width = static_cast<int>(image.width);
  height = static_cast<int>(image.height);
  return pixels;
}

inline std::uint8_t quantize(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace detail

/// 8-bit grayscale PNG: 0 invalid, 255 valid.
inline void write_mask_png(const std::filesystem::path& path, const Mask& mask) {
  std::vector<std::uint8_t> px(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) px[i] = mask[i] ? 255 : 0;
  detail::write_png_raw(path, mask.width(), mask.height(), PNG_FORMAT_GRAY, px);
}

inline Mask read_mask_png(const std::filesystem::path& path) {
  int w = 0, h = 0;
  const auto px = detail::read_png_raw(path, PNG_FORMAT_GRAY, w, h);
  Mask out(w, h, 0);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = px[i] >= 128 ? 1 : 0;
  return out;
}

/// 8-bit RGB PNG from intensities in [0, 1].
inline void write_image_png(const std::filesystem::path& path, const Image& image) {
  std::vector<std::uint8_t> px(static_cast<std::size_t>(image.width()) * image.height() * 3);
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x)
      for (int c = 0; c < 3; ++c)
        px[(static_cast<std::size_t>(y) * image.width() + x) * 3 + c] = detail::quantize(image(x, y, c));
  detail::write_png_raw(path, image.width(), image.height(), PNG_FORMAT_RGB, px);
}

inline Image read_image_png(const std::filesystem::path& path) {
  int w = 0, h = 0;
  const auto px = detail::read_png_raw(path, PNG_FORMAT_RGB, w, h);
  Image out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        out(x, y, c) = px[(static_cast<std::size_t>(y) * w + x) * 3 + c] / 255.0;
  return out;
}

}  // namespace nrdepth::io
