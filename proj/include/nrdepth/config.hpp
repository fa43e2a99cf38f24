#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "nrdepth/error.hpp"
#include "nrdepth/eval.hpp"
#include "nrdepth/io/text.hpp"
#include "nrdepth/masks.hpp"
#include "nrdepth/photometric.hpp"
#include "nrdepth/refine.hpp"
#include "nrdepth/synth.hpp"

namespace nrdepth {

/// Every tunable of a pipeline run. Serialized as flat `key = value` text.
struct PipelineConfig {
  std::string manifest;
  std::string output_dir;

  // Intrinsics overrides; NaN keeps the manifest value.
  double focal_x = std::nan("");
  double focal_y = std::nan("");
  double principal_x = std::nan("");
  double principal_y = std::nan("");

  double pixel_baseline_min = 0.05;
  double tuple_baseline_min = 0.5;
  double visibility_tolerance = 0.005;

  int target_gap = 3;
  std::vector<int> reference_offsets = default_reference_offsets();
  int min_references = 2;

  double alpha = 0.9;
  double gamma_smooth = 1e-5;
  double gamma_reg = 1e-6;
  int ssim_window = 7;
  double ssim_c = 0.03 * 0.03;

  double step_size = 1e-2;
  int iterations = 300;
  double convergence_tol = 1e-6;
  int convergence_window = 20;
  double detail_bound = 0.1;

  int working_resolution = 256;
  std::uint64_t seed = 0;

  int icp_iterations = 100;
  double icp_trim = 0.0;

  int synth_frames = 20;
  std::string synth_kind = "rigid";
  int synth_size = 256;
  double synth_focal = 300.0;
  double synth_bump = 0.03;
  double synth_motion_scale = 1.0;
  int synth_supersample = 1;
  double synth_shading_drift = 0.0;

  MaskParams mask_params() const { return {pixel_baseline_min, visibility_tolerance}; }

  LossConfig loss_config() const {
    return {PhotoParams{alpha, ssim_window, ssim_c}, LossWeights{gamma_smooth, gamma_reg}};
  }

  OptimizerConfig optimizer_config() const {
    OptimizerConfig o;
    o.step_size = step_size;
    o.iterations = iterations;
    o.convergence_tol = convergence_tol;
    o.convergence_window = convergence_window;
    o.detail_bound = detail_bound;
    o.seed = seed;
    return o;
  }

  IcpOptions icp_options() const {
    IcpOptions o;
    o.max_iterations = icp_iterations;
    o.trim_fraction = icp_trim;
    return o;
  }

  SceneSpec scene_spec() const {
    SceneSpec s;
    s.seed = seed;
    s.frames = synth_frames;
    s.kind = parse_motion_kind(synth_kind);
    s.bump.amplitude = synth_bump;
    s.motion_scale = synth_motion_scale;
    s.appearance.supersample = synth_supersample;
    s.appearance.shading_drift = synth_shading_drift;
    s.intrinsics = Intrinsics{synth_focal, synth_focal, synth_size / 2.0, synth_size / 2.0,
                              synth_size, synth_size};
    return s;
  }

  Intrinsics apply_overrides(Intrinsics k) const {
    if (std::isfinite(focal_x)) k.focal_x = focal_x;
    if (std::isfinite(focal_y)) k.focal_y = focal_y;
    if (std::isfinite(principal_x)) k.principal_x = principal_x;
    if (std::isfinite(principal_y)) k.principal_y = principal_y;
    return k;
  }

  void validate() const;
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  static const std::vector<std::string>& keys();

  std::string serialize() const;
  static PipelineConfig parse(const std::string& text, const std::string& origin = "config");
  static PipelineConfig load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  bool operator==(const PipelineConfig& other) const { return serialize() == other.serialize(); }
};

namespace config_detail {

struct Field {
  std::function<void(PipelineConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

inline std::string format_optional(double v) { return std::isfinite(v) ? io::format_double(v) : "none"; }

template <typename M>
Field double_field(M PipelineConfig::*member) {
  return {[member](PipelineConfig& c, const std::string& v, const std::string& where) {
            c.*member = io::parse_double(v, where);
          },
          [member](const PipelineConfig& c) { return io::format_double(c.*member); }};
}

template <typename M>
Field optional_field(M PipelineConfig::*member) {
  return {[member](PipelineConfig& c, const std::string& v, const std::string& where) {
            c.*member = (v == "none" || v.empty()) ? std::nan("") : io::parse_double(v, where);
          },
          [member](const PipelineConfig& c) { return format_optional(c.*member); }};
}

template <typename M>
Field int_field(M PipelineConfig::*member) {
  return {[member](PipelineConfig& c, const std::string& v, const std::string& where) {
            const auto n = io::parse_int(v, where);
            if constexpr (std::is_same_v<M, std::uint64_t>) {
              if (n < 0) throw InputError(where + ": expected a non-negative integer");
            }
            c.*member = static_cast<M>(n);
          },
          [member](const PipelineConfig& c) { return std::to_string(c.*member); }};
}

inline Field string_field(std::string PipelineConfig::*member) {
  return {[member](PipelineConfig& c, const std::string& v, const std::string&) { c.*member = v; },
          [member](const PipelineConfig& c) { return c.*member; }};
}

inline Field offsets_field() {
  return {[](PipelineConfig& c, const std::string& v, const std::string& where) {
            c.reference_offsets.clear();
            for (const auto& tok : io::split(v, ','))
              if (!tok.empty()) c.reference_offsets.push_back(static_cast<int>(io::parse_int(tok, where)));
          },
          [](const PipelineConfig& c) {
            std::string s;
            for (std::size_t i = 0; i < c.reference_offsets.size(); ++i)
              s += (i ? "," : "") + std::to_string(c.reference_offsets[i]);
            return s;
          }};
}

inline const std::vector<std::pair<std::string, Field>>& fields() {
  using C = PipelineConfig;
  static const std::vector<std::pair<std::string, Field>> table{
      {"manifest", string_field(&C::manifest)},
      {"output_dir", string_field(&C::output_dir)},
      {"focal_x", optional_field(&C::focal_x)},
      {"focal_y", optional_field(&C::focal_y)},
      {"principal_x", optional_field(&C::principal_x)},
      {"principal_y", optional_field(&C::principal_y)},
      {"pixel_baseline_min", double_field(&C::pixel_baseline_min)},
      {"tuple_baseline_min", double_field(&C::tuple_baseline_min)},
      {"visibility_tolerance", double_field(&C::visibility_tolerance)},
      {"target_gap", int_field(&C::target_gap)},
      {"reference_offsets", offsets_field()},
      {"min_references", int_field(&C::min_references)},
      {"alpha", double_field(&C::alpha)},
      {"gamma_smooth", double_field(&C::gamma_smooth)},
      {"gamma_reg", double_field(&C::gamma_reg)},
      {"ssim_window", int_field(&C::ssim_window)},
      {"ssim_c", double_field(&C::ssim_c)},
      {"step_size", double_field(&C::step_size)},
      {"iterations", int_field(&C::iterations)},
      {"convergence_tol", double_field(&C::convergence_tol)},
      {"convergence_window", int_field(&C::convergence_window)},
      {"detail_bound", double_field(&C::detail_bound)},
      {"working_resolution", int_field(&C::working_resolution)},
      {"seed", int_field(&C::seed)},
      {"icp_iterations", int_field(&C::icp_iterations)},
      {"icp_trim", double_field(&C::icp_trim)},
      {"synth_frames", int_field(&C::synth_frames)},
      {"synth_kind", string_field(&C::synth_kind)},
      {"synth_size", int_field(&C::synth_size)},
      {"synth_focal", double_field(&C::synth_focal)},
      {"synth_bump", double_field(&C::synth_bump)},
      {"synth_motion_scale", double_field(&C::synth_motion_scale)},
      {"synth_supersample", int_field(&C::synth_supersample)},
      {"synth_shading_drift", double_field(&C::synth_shading_drift)},
  };
  return table;
}

inline const Field* find(const std::string& key) {
  for (const auto& [k, f] : fields())
    if (k == key) return &f;
  return nullptr;
}

}  // namespace config_detail

inline const std::vector<std::string>& PipelineConfig::keys() {
  static const std::vector<std::string> k = [] {
    std::vector<std::string> out;
    for (const auto& [key, f] : config_detail::fields()) out.push_back(key);
    return out;
  }();
  return k;
}

inline void PipelineConfig::set(const std::string& key, const std::string& value) {
  const auto* f = config_detail::find(key);
  if (!f) throw InputError("unknown config key '" + key + "'");
  f->set(*this, io::trim(value), "config key '" + key + "'");
}

inline std::string PipelineConfig::get(const std::string& key) const {
  const auto* f = config_detail::find(key);
  if (!f) throw InputError("unknown config key '" + key + "'");
  return f->get(*this);
}

inline void PipelineConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw InputError("config: " + what);
  };
  for (double v : {focal_x, focal_y})
    require(std::isnan(v) || v > 0.0, "focal overrides must be positive");
  require(pixel_baseline_min >= 0.0, "pixel_baseline_min must be >= 0");
  require(tuple_baseline_min >= 0.0, "tuple_baseline_min must be >= 0");
  require(visibility_tolerance >= 0.0, "visibility_tolerance must be >= 0");
  require(target_gap >= 1, "target_gap must be >= 1");
  require(!reference_offsets.empty(), "reference_offsets must not be empty");
  for (int o : reference_offsets) require(o != 0, "reference_offsets must not contain 0");
  require(min_references >= 1, "min_references must be >= 1");
  require(alpha >= 0.0 && alpha <= 1.0, "alpha must be in [0, 1]");
  require(gamma_smooth >= 0.0 && gamma_reg >= 0.0, "loss weights must be >= 0");
  require(ssim_window >= 1 && ssim_window % 2 == 1, "ssim_window must be a positive odd integer");
  require(ssim_c > 0.0, "ssim_c must be positive");
  require(step_size > 0.0, "step_size must be positive");
  require(iterations >= 0, "iterations must be >= 0");
  require(convergence_tol >= 0.0, "convergence_tol must be >= 0");
  require(convergence_window >= 1, "convergence_window must be >= 1");
  require(detail_bound > 0.0, "detail_bound must be positive");
  require(working_resolution >= 2, "working_resolution must be >= 2");
  require(icp_iterations >= 0, "icp_iterations must be >= 0");
  require(icp_trim >= 0.0 && icp_trim < 1.0, "icp_trim must be in [0, 1)");
  require(synth_frames >= 1, "synth_frames must be >= 1");
  require(synth_kind == "rigid" || synth_kind == "articulated" || synth_kind == "bend",
          "synth_kind must be rigid, articulated or bend");
  require(synth_size >= 2, "synth_size must be >= 2");
  require(synth_focal > 0.0, "synth_focal must be positive");
  require(std::abs(synth_bump) <= 0.1, "synth_bump must be within the 10 cm detail bound");
  require(synth_motion_scale >= 0.0, "synth_motion_scale must be >= 0");
  require(synth_supersample >= 1 && synth_supersample <= 8, "synth_supersample must be in [1, 8]");
}

inline std::string PipelineConfig::serialize() const {
  std::string out;
  for (const auto& [key, f] : config_detail::fields()) out += key + " = " + f.get(*this) + "\n";
  return out;
}

inline PipelineConfig PipelineConfig::parse(const std::string& text, const std::string& origin) {
  PipelineConfig c;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = io::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw InputError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    c.set(io::trim(t.substr(0, eq)), t.substr(eq + 1));
  }
  c.validate();
  return c;
}

inline PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

inline void PipelineConfig::save(const std::filesystem::path& path) const {
  io::detail::ensure_parent(path);
  std::ofstream os(path);
  if (!os) throw InputError("cannot write " + path.string());
  os << serialize();
}

}  // namespace nrdepth
