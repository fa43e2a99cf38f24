#pragma once

#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "nrdepth/error.hpp"
#include "nrdepth/grid.hpp"

namespace nrdepth::io {

namespace detail {

inline void write_f32_le(std::ostream& os, float v) {
  std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
  unsigned char b[4] = {static_cast<unsigned char>(bits), static_cast<unsigned char>(bits >> 8),
                        static_cast<unsigned char>(bits >> 16), static_cast<unsigned char>(bits >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline float read_f32(const unsigned char* b, bool little) {
  std::uint32_t bits = little ? (std::uint32_t{b[0]} | std::uint32_t{b[1]} << 8 |
                                 std::uint32_t{b[2]} << 16 | std::uint32_t{b[3]} << 24)
                              : (std::uint32_t{b[3]} | std::uint32_t{b[2]} << 8 |
                                 std::uint32_t{b[1]} << 16 | std::uint32_t{b[0]} << 24);
  return std::bit_cast<float>(bits);
}

inline std::vector<unsigned char> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void ensure_parent(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
}

}  // namespace detail

/// Single-channel PFM ("Pf"), little-endian (scale -1.0), rows stored bottom to top.
/// Non-finite values are written as NaN.
inline void write_pfm(const std::filesystem::path& path, const Grid<double>& values) {
  detail::ensure_parent(path);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot write " + path.string());
  os << "Pf\n" << values.width() << ' ' << values.height() << "\n-1.0\n";
  for (int y = values.height() - 1; y >= 0; --y)
    for (int x = 0; x < values.width(); ++x) {
      const double v = values(x, y);
      detail::write_f32_le(os, std::isfinite(v) ? static_cast<float>(v)
                                                : std::numeric_limits<float>::quiet_NaN());
    }
  if (!os) throw InputError("failed writing " + path.string());
}

inline Grid<double> read_pfm(const std::filesystem::path& path) {
  const auto bytes = detail::read_all(path);
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
    std::string t;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) t.push_back(static_cast<char>(bytes[pos++]));
    return t;
  };
  const std::string magic = token();
  if (magic != "Pf") throw InputError(path.string() + ": not a single-channel PFM");
  int w = 0, h = 0;
  double scale = 0.0;
  try {
    w = std::stoi(token());
    h = std::stoi(token());
    scale = std::stod(token());
  } catch (const std::exception&) {
    throw InputError(path.string() + ": malformed PFM header");
  }
  ++pos;  // single whitespace before the raster
  if (w <= 0 || h <= 0 || scale == 0.0) throw InputError(path.string() + ": bad PFM header");
  const std::size_t need = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 4;
  if (bytes.size() < pos + need) throw InputError(path.string() + ": truncated PFM raster");
  const bool little = scale < 0.0;
  Grid<double> out(w, h);
  const unsigned char* p = bytes.data() + pos;
  for (int y = h - 1; y >= 0; --y)
    for (int x = 0; x < w; ++x, p += 4) out(x, y) = detail::read_f32(p, little);
  return out;
}

}  // namespace nrdepth::io
