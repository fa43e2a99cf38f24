#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>

#include "nrdepth/io/pfm.hpp"
#include "nrdepth/raster.hpp"

namespace nrdepth::io {

/// Motion map container: "NRMM", u32 version (1), u32 width, u32 height, then per pixel
/// (row-major) 12 little-endian f32 (rotation row-major, translation), then a validity
/// bitmask, one bit per pixel row-major, LSB first, padded to a byte.
inline constexpr std::uint32_t kNrmmVersion = 1;

namespace detail {
inline void write_u32_le(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}
inline std::uint32_t read_u32_le(const unsigned char* b) {
  return std::uint32_t{b[0]} | std::uint32_t{b[1]} << 8 | std::uint32_t{b[2]} << 16 |
         std::uint32_t{b[3]} << 24;
}
}  // namespace detail

inline void write_nrmm(const std::filesystem::path& path, const MotionMap& motion) {
  detail::ensure_parent(path);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot write " + path.string());
  os.write("NRMM", 4);
  detail::write_u32_le(os, kNrmmVersion);
  detail::write_u32_le(os, static_cast<std::uint32_t>(motion.width()));
  detail::write_u32_le(os, static_cast<std::uint32_t>(motion.height()));
  for (std::size_t i = 0; i < motion.transforms.size(); ++i) {
    const auto& t = motion.transforms[i];
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) detail::write_f32_le(os, static_cast<float>(t.rotation(r, c)));
    for (int r = 0; r < 3; ++r) detail::write_f32_le(os, static_cast<float>(t.translation(r)));
  }
  std::vector<unsigned char> bits((motion.valid.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < motion.valid.size(); ++i)
    if (motion.valid[i]) bits[i / 8] |= static_cast<unsigned char>(1u << (i % 8));
  os.write(reinterpret_cast<const char*>(bits.data()), static_cast<std::streamsize>(bits.size()));
  if (!os) throw InputError("failed writing " + path.string());
}

inline MotionMap read_nrmm(const std::filesystem::path& path) {
  const auto bytes = detail::read_all(path);
  if (bytes.size() < 16 || std::string(bytes.begin(), bytes.begin() + 4) != "NRMM")
    throw InputError(path.string() + ": not an NRMM motion map");
  const auto version = detail::read_u32_le(bytes.data() + 4);
  if (version != kNrmmVersion)
    throw InputError(path.string() + ": unsupported NRMM version " + std::to_string(version));
  const auto w = detail::read_u32_le(bytes.data() + 8);
  const auto h = detail::read_u32_le(bytes.data() + 12);
  const std::size_t pixels = static_cast<std::size_t>(w) * h;
  const std::size_t need = 16 + pixels * 48 + (pixels + 7) / 8;
  if (w == 0 || h == 0 || w > (1u << 16) || h > (1u << 16) || bytes.size() != need)
    throw InputError(path.string() + ": NRMM size mismatch");
  MotionMap out(static_cast<int>(w), static_cast<int>(h));
  const unsigned char* p = bytes.data() + 16;
  for (std::size_t i = 0; i < pixels; ++i) {
    auto& t = out.transforms[i];
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c, p += 4) t.rotation(r, c) = detail::read_f32(p, true);
    for (int r = 0; r < 3; ++r, p += 4) t.translation(r) = detail::read_f32(p, true);
  }
  for (std::size_t i = 0; i < pixels; ++i) out.valid[i] = (p[i / 8] >> (i % 8)) & 1u;
  return out;
}

}  // namespace nrdepth::io
