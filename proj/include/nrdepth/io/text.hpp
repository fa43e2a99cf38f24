#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "nrdepth/camera.hpp"
#include "nrdepth/error.hpp"
#include "nrdepth/io/pfm.hpp"
#include "nrdepth/masks.hpp"
#include "nrdepth/mesh.hpp"
#include "nrdepth/photometric.hpp"

namespace nrdepth::io {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

/// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& text, const std::string& context) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc{} || res.ptr != t.data() + t.size() || t.empty())
    throw InputError(context + ": expected a number, got '" + t + "'");
  return v;
}

inline long long parse_int(const std::string& text, const std::string& context) {
  const std::string t = trim(text);
  long long v = 0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc{} || res.ptr != t.data() + t.size() || t.empty())
    throw InputError(context + ": expected an integer, got '" + t + "'");
  return v;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(trim(cur));
  return out;
}

// --- Wavefront OBJ (v / f records) ---------------------------------------------------

inline TriMesh read_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  TriMesh mesh;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (tag == "v") {
      std::string a, b, c;
      if (!(ls >> a >> b >> c)) throw InputError(where + ": vertex needs three coordinates");
      mesh.vertices.emplace_back(parse_double(a, where), parse_double(b, where), parse_double(c, where));
    } else if (tag == "f") {
      std::vector<int> idx;
      std::string tok;
      while (ls >> tok) {
        const auto slash = tok.find('/');
        const auto n = parse_int(tok.substr(0, slash), where);
        const long long resolved = n < 0 ? static_cast<long long>(mesh.vertices.size()) + n : n - 1;
        idx.push_back(static_cast<int>(resolved));
      }
      if (idx.size() != 3) throw InputError(where + ": only triangular faces are supported");
      mesh.faces.push_back({idx[0], idx[1], idx[2]});
    }
  }
  validate_topology(mesh.faces, mesh.vertices.size());
  return mesh;
}

inline void write_obj(const std::filesystem::path& path, const TriMesh& mesh) {
  detail::ensure_parent(path);
  std::ofstream os(path);
  if (!os) throw InputError("cannot write " + path.string());
  for (const auto& v : mesh.vertices)
    os << "v " << format_double(v.x()) << ' ' << format_double(v.y()) << ' ' << format_double(v.z()) << '\n';
  for (const auto& f : mesh.faces) os << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
}

// --- Sequence manifest ------------------------------------------------------------------

struct FrameEntry {
  std::filesystem::path mesh;
  std::filesystem::path image;  // may be empty
};

/// Text manifest: `key = value` lines for the intrinsics and frame rate, then one
/// `frame = <mesh.obj> [image.png]` line per frame in order. Paths are relative to the
/// manifest's directory.
struct SequenceManifest {
  Intrinsics intrinsics;
  double frame_rate = 30.0;
  std::vector<FrameEntry> frames;
  std::filesystem::path directory;

  std::filesystem::path resolve(const std::filesystem::path& p) const {
    return p.is_absolute() ? p : directory / p;
  }
};

inline SequenceManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open manifest " + path.string());
  SequenceManifest m;
  m.directory = path.parent_path();
  bool seen[6] = {};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw InputError(where + ": expected 'key = value'");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key == "frame") {
      std::istringstream vs(value);
      FrameEntry e;
      std::string mesh, image;
      if (!(vs >> mesh)) throw InputError(where + ": frame needs a mesh path");
      vs >> image;
      e.mesh = mesh;
      e.image = image;
      m.frames.push_back(e);
    } else if (key == "focal_x") { m.intrinsics.focal_x = parse_double(value, where); seen[0] = true; }
    else if (key == "focal_y") { m.intrinsics.focal_y = parse_double(value, where); seen[1] = true; }
    else if (key == "principal_x") { m.intrinsics.principal_x = parse_double(value, where); seen[2] = true; }
    else if (key == "principal_y") { m.intrinsics.principal_y = parse_double(value, where); seen[3] = true; }
    else if (key == "width") { m.intrinsics.width = static_cast<int>(parse_int(value, where)); seen[4] = true; }
    else if (key == "height") { m.intrinsics.height = static_cast<int>(parse_int(value, where)); seen[5] = true; }
    else if (key == "frame_rate") m.frame_rate = parse_double(value, where);
    else throw InputError(where + ": unknown manifest key '" + key + "'");
  }
  for (bool s : seen)
    if (!s) throw InputError(path.string() + ": manifest is missing intrinsics keys");
  try {
    m.intrinsics.validate();
  } catch (const CameraError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  if (m.frames.empty()) throw InputError(path.string() + ": manifest lists no frames");
  return m;
}

inline void write_manifest(const std::filesystem::path& path, const SequenceManifest& m) {
  detail::ensure_parent(path);
  std::ofstream os(path);
  if (!os) throw InputError("cannot write " + path.string());
  const auto& k = m.intrinsics;
  os << "# body mesh sequence\n"
     << "focal_x = " << format_double(k.focal_x) << '\n'
     << "focal_y = " << format_double(k.focal_y) << '\n'
     << "principal_x = " << format_double(k.principal_x) << '\n'
     << "principal_y = " << format_double(k.principal_y) << '\n'
     << "width = " << k.width << '\n'
     << "height = " << k.height << '\n'
     << "frame_rate = " << format_double(m.frame_rate) << '\n';
  for (const auto& f : m.frames) {
    os << "frame = " << f.mesh.generic_string();
    if (!f.image.empty()) os << ' ' << f.image.generic_string();
    os << '\n';
  }
}

/// Loads every frame; all frames must carry the identical face list.
inline TriMeshSequence load_sequence(const SequenceManifest& m) {
  TriMeshSequence seq;
  seq.frame_rate = m.frame_rate;
  for (std::size_t i = 0; i < m.frames.size(); ++i) {
    TriMesh mesh = read_obj(m.resolve(m.frames[i].mesh));
    if (i == 0) {
      seq.topology = mesh.faces;
    } else if (mesh.faces != seq.topology) {
      throw TopologyError("frame " + std::to_string(i) + " (" + m.frames[i].mesh.string() +
                          ") has a different face list");
    }
    seq.frames.push_back(std::move(mesh.vertices));
  }
  seq.validate();
  return seq;
}

// --- Tuple lists: "target: ref,ref,..." -------------------------------------------------

inline void write_tuple_list(const std::filesystem::path& path, const std::vector<TupleIndex>& tuples) {
  detail::ensure_parent(path);
  std::ofstream os(path);
  if (!os) throw InputError("cannot write " + path.string());
  for (const auto& t : tuples) {
    os << t.target << ':';
    for (std::size_t i = 0; i < t.references.size(); ++i) os << (i ? "," : " ") << t.references[i];
    os << '\n';
  }
}

inline std::vector<TupleIndex> read_tuple_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open tuple list " + path.string());
  std::vector<TupleIndex> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    const auto colon = t.find(':');
    if (colon == std::string::npos) throw InputError(where + ": expected 'target: refs'");
    TupleIndex ti;
    ti.target = static_cast<int>(parse_int(t.substr(0, colon), where));
    const std::string refs = trim(t.substr(colon + 1));
    if (!refs.empty())
      for (const auto& r : split(refs, ',')) ti.references.push_back(static_cast<int>(parse_int(r, where)));
    out.push_back(std::move(ti));
  }
  return out;
}

// --- Loss logs: "iter, photo, smooth, reg, total" --------------------------------------

inline void write_loss_log(const std::filesystem::path& path, const std::vector<LossBreakdown>& trace) {
  detail::ensure_parent(path);
  std::ofstream os(path);
  if (!os) throw InputError("cannot write " + path.string());
  os << "# iter, photo, smooth, reg, total\n";
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto& l = trace[i];
    os << i << ", " << format_double(l.photo) << ", " << format_double(l.smooth) << ", "
       << format_double(l.regularizer) << ", " << format_double(l.total) << '\n';
  }
}

inline std::vector<LossBreakdown> read_loss_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open loss log " + path.string());
  std::vector<LossBreakdown> out;
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto f = split(t, ',');
    if (f.size() != 5) throw InputError(path.string() + ": loss log lines need 5 fields");
    LossBreakdown l;
    l.photo = parse_double(f[1], path.string());
    l.smooth = parse_double(f[2], path.string());
    l.regularizer = parse_double(f[3], path.string());
    l.total = parse_double(f[4], path.string());
    out.push_back(l);
  }
  return out;
}

// --- ASCII XYZ point clouds -------------------------------------------------------------

inline void write_xyz(const std::filesystem::path& path, const std::vector<Vec3>& points) {
  detail::ensure_parent(path);
  std::ofstream os(path);
  if (!os) throw InputError("cannot write " + path.string());
  for (const auto& p : points)
    os << format_double(p.x()) << ' ' << format_double(p.y()) << ' ' << format_double(p.z()) << '\n';
}

inline std::vector<Vec3> read_xyz(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  std::vector<Vec3> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::istringstream ls(t);
    std::string a, b, c;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (!(ls >> a >> b >> c)) throw InputError(where + ": expected x y z");
    out.emplace_back(parse_double(a, where), parse_double(b, where), parse_double(c, where));
  }
  return out;
}

}  // namespace nrdepth::io
