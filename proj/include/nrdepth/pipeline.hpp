#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "nrdepth/config.hpp"
#include "nrdepth/eval.hpp"
#include "nrdepth/io/nrmm.hpp"
#include "nrdepth/io/pfm.hpp"
#include "nrdepth/io/png.hpp"
#include "nrdepth/io/text.hpp"
#include "nrdepth/log.hpp"
#include "nrdepth/masks.hpp"
#include "nrdepth/mesh.hpp"
#include "nrdepth/raster.hpp"
#include "nrdepth/refine.hpp"
#include "nrdepth/synth.hpp"

namespace nrdepth::pipeline {

namespace fs = std::filesystem;

inline std::string frame_tag(const char* prefix, int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%04d", prefix, index);
  return buf;
}

inline fs::path relative_to(const fs::path& target, const fs::path& base) {
  return fs::weakly_canonical(fs::absolute(target)).lexically_relative(fs::weakly_canonical(fs::absolute(base)));
}

// --- synth ----------------------------------------------------------------------------

struct SynthSummary {
  fs::path manifest;
  int frames = 0;
};

/// Writes a scene as manifest + OBJ meshes (coarse body) + PNG images (detailed surface)
/// + ground-truth depth PFMs under truth/.
inline SynthSummary cmd_synth(const PipelineConfig& config, const fs::path& out_dir) {
  config.validate();
  const SynthScene scene = generate_scene(config.scene_spec());
  io::SequenceManifest manifest;
  manifest.intrinsics = scene.intrinsics();
  manifest.frame_rate = scene.base.frame_rate;
  for (std::size_t f = 0; f < scene.base.size(); ++f) {
    const int fi = static_cast<int>(f);
    const fs::path mesh_rel = fs::path("meshes") / (frame_tag("frame_", fi) + ".obj");
    const fs::path image_rel = fs::path("images") / (frame_tag("frame_", fi) + ".png");
    io::write_obj(out_dir / mesh_rel, scene.base.frame(f));
    const auto rendered = render_appearance(scene, f);
    io::write_image_png(out_dir / image_rel, rendered.image);
    io::write_pfm(out_dir / "truth" / (frame_tag("depth_", fi) + ".pfm"), rendered.depth.values);
    manifest.frames.push_back({mesh_rel, image_rel});
  }
  const fs::path manifest_path = out_dir / "manifest.txt";
  io::write_manifest(manifest_path, manifest);
  return {manifest_path, static_cast<int>(scene.base.size())};
}

// --- motion ---------------------------------------------------------------------------

/// Working-resolution intrinsics: native when the image is not larger than the working
/// resolution, otherwise an exact integer downsampling.
inline Intrinsics working_intrinsics(const Intrinsics& native, int working_resolution, int& factor) {
  factor = 1;
  if (native.width <= working_resolution) return native;
  if (native.width % working_resolution != 0 || native.height % (native.width / working_resolution) != 0)
    throw InputError("image width " + std::to_string(native.width) +
                     " is not an integer multiple of the working resolution " +
                     std::to_string(working_resolution));
  factor = native.width / working_resolution;
  return native.scaled(1.0 / factor);
}

struct MotionSummary {
  std::vector<TupleIndex> grouped;
  std::vector<TupleIndex> accepted;
};

struct TupleFile {
  int target = 0;
  Intrinsics intrinsics;
  int image_factor = 1;
  std::string target_image;
  std::vector<std::pair<int, std::string>> references;  // frame, image path (relative)
};

inline void write_tuple_file(const fs::path& path, const TupleFile& t) {
  std::ofstream os(path);
  if (!os) throw InputError("cannot write " + path.string());
  const auto& k = t.intrinsics;
  os << "target = " << t.target << '\n'
     << "focal_x = " << io::format_double(k.focal_x) << '\n'
     << "focal_y = " << io::format_double(k.focal_y) << '\n'
     << "principal_x = " << io::format_double(k.principal_x) << '\n'
     << "principal_y = " << io::format_double(k.principal_y) << '\n'
     << "width = " << k.width << '\n'
     << "height = " << k.height << '\n'
     << "image_factor = " << t.image_factor << '\n'
     << "target_image = " << t.target_image << '\n';
  for (const auto& [frame, image] : t.references) os << "reference = " << frame << ' ' << image << '\n';
}

inline TupleFile read_tuple_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("missing tuple description " + path.string());
  TupleFile t;
  std::string line;
  while (std::getline(in, line)) {
    const std::string s = io::trim(line);
    if (s.empty() || s[0] == '#') continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw InputError(path.string() + ": expected 'key = value'");
    const std::string key = io::trim(s.substr(0, eq));
    const std::string value = io::trim(s.substr(eq + 1));
    const std::string where = path.string();
    if (key == "target") t.target = static_cast<int>(io::parse_int(value, where));
    else if (key == "focal_x") t.intrinsics.focal_x = io::parse_double(value, where);
    else if (key == "focal_y") t.intrinsics.focal_y = io::parse_double(value, where);
    else if (key == "principal_x") t.intrinsics.principal_x = io::parse_double(value, where);
    else if (key == "principal_y") t.intrinsics.principal_y = io::parse_double(value, where);
    else if (key == "width") t.intrinsics.width = static_cast<int>(io::parse_int(value, where));
    else if (key == "height") t.intrinsics.height = static_cast<int>(io::parse_int(value, where));
    else if (key == "image_factor") t.image_factor = static_cast<int>(io::parse_int(value, where));
    else if (key == "target_image") t.target_image = value;
    else if (key == "reference") {
      std::istringstream vs(value);
      int frame = 0;
      std::string image;
      if (!(vs >> frame)) throw InputError(where + ": reference needs a frame index");
      vs >> image;
      t.references.emplace_back(frame, image);
    } else {
      throw InputError(where + ": unknown key '" + key + "'");
    }
  }
  return t;
}

/// Groups frames into tuples, computes motion maps, base depth and validation masks at the
/// working resolution, filters by mean baseline, and writes each accepted tuple to
/// <out>/tNNNN/ plus <out>/tuples.txt.
inline MotionSummary cmd_motion(const PipelineConfig& config, const fs::path& manifest_path,
                                const fs::path& out_dir) {
  config.validate();
  const auto manifest = io::read_manifest(manifest_path);
  const auto sequence = io::load_sequence(manifest);
  const Intrinsics native = config.apply_overrides(manifest.intrinsics);
  int factor = 1;
  const Intrinsics k = working_intrinsics(native, config.working_resolution, factor);
  const auto adjacency = build_two_ring(sequence.topology, sequence.vertex_count());

  MotionSummary summary;
  summary.grouped = group_tuples(static_cast<int>(sequence.size()), config.target_gap,
                                 config.reference_offsets,
                                 static_cast<std::size_t>(config.min_references));

  std::map<int, RenderBuffers> renders;
  auto render_of = [&](int frame) -> const RenderBuffers& {
    auto it = renders.find(frame);
    if (it == renders.end())
      it = renders.emplace(frame, rasterize(sequence.frame(static_cast<std::size_t>(frame)), k)).first;
    return it->second;
  };

  fs::create_directories(out_dir);
  for (const auto& grouped : summary.grouped) {
    const TriMesh target = sequence.frame(static_cast<std::size_t>(grouped.target));
    const RenderBuffers& target_render = render_of(grouped.target);
    if (count_set(target_render.depth.silhouette()) == 0) {
      log::warn("frame " + std::to_string(grouped.target) + ": empty silhouette, tuple skipped");
      continue;
    }
    FrameTuple tuple;
    tuple.target_frame = grouped.target;
    tuple.intrinsics = k;
    tuple.base_depth = target_render.depth;
    for (int r : grouped.references) {
      const TriMesh reference = sequence.frame(static_cast<std::size_t>(r));
      const RenderBuffers& reference_render = render_of(r);
      if (count_set(reference_render.depth.silhouette()) == 0) {
        log::warn("frame " + std::to_string(r) + ": empty silhouette, reference skipped");
        continue;
      }
      const auto transforms = all_vertex_transforms(target, reference, adjacency);
      if (transforms.degenerate_count() > 0)
        log::warn("frames " + std::to_string(grouped.target) + "->" + std::to_string(r) + ": " +
                  std::to_string(transforms.degenerate_count()) + " degenerate vertices");
      ReferenceView view;
      view.frame = r;
      view.motion = render_motion_map(target_render, target, transforms);
      view.mask = validation_mask(view.motion, target_render, target, reference_render, reference, k,
                                  config.mask_params());
      tuple.references.push_back(std::move(view));
    }
    if (tuple.references.size() < static_cast<std::size_t>(config.min_references)) continue;
    const auto mean = tuple_mean_baseline(tuple);
    if (!mean) {
      log::info("tuple " + std::to_string(grouped.target) + " removed: no valid motion pixels");
      continue;
    }
    if (*mean < config.tuple_baseline_min) {
      log::info("tuple " + std::to_string(grouped.target) + " removed: mean baseline " +
                io::format_double(*mean) + " m");
      continue;
    }

    const fs::path dir = out_dir / frame_tag("t", grouped.target);
    fs::create_directories(dir);
    io::write_pfm(dir / "base_depth.pfm", tuple.base_depth.values);
    TupleFile file;
    file.target = grouped.target;
    file.intrinsics = k;
    file.image_factor = factor;
    auto image_path = [&](int frame) -> std::string {
      const auto& img = manifest.frames[static_cast<std::size_t>(frame)].image;
      return img.empty() ? std::string() : relative_to(manifest.resolve(img), dir).generic_string();
    };
    file.target_image = image_path(grouped.target);
    TupleIndex accepted{grouped.target, {}};
    for (const auto& view : tuple.references) {
      io::write_nrmm(dir / (frame_tag("r", view.frame) + ".nrmm"), view.motion);
      io::write_mask_png(dir / (frame_tag("r", view.frame) + "_mask.png"), view.mask);
      file.references.emplace_back(view.frame, image_path(view.frame));
      accepted.references.push_back(view.frame);
    }
    write_tuple_file(dir / "tuple.txt", file);
    summary.accepted.push_back(std::move(accepted));
  }
  io::write_tuple_list(out_dir / "tuples.txt", summary.accepted);
  return summary;
}

// --- refine ---------------------------------------------------------------------------

/// Reassembles a FrameTuple from a tuple directory written by cmd_motion.
inline FrameTuple load_tuple(const fs::path& dir) {
  const TupleFile file = read_tuple_file(dir / "tuple.txt");
  FrameTuple tuple;
  tuple.target_frame = file.target;
  tuple.intrinsics = file.intrinsics;
  tuple.base_depth.values = io::read_pfm(dir / "base_depth.pfm");
  auto load_image = [&](const std::string& rel) {
    if (rel.empty()) throw InputError(dir.string() + ": tuple has no image paths");
    return downsample_average(io::read_image_png(dir / rel), file.image_factor);
  };
  tuple.target_image = load_image(file.target_image);
  for (const auto& [frame, image] : file.references) {
    ReferenceView view;
    view.frame = frame;
    view.motion = io::read_nrmm(dir / (frame_tag("r", frame) + ".nrmm"));
    view.mask = io::read_mask_png(dir / (frame_tag("r", frame) + "_mask.png"));
    view.image = load_image(image);
    tuple.references.push_back(std::move(view));
  }
  tuple.validate();
  return tuple;
}

struct RefineSummary {
  int target = 0;
  LossBreakdown initial;
  LossBreakdown final_loss;
  std::size_t best_iteration = 0;
  std::size_t iterations = 0;
};

inline std::string summary_line(const RefineSummary& s) {
  return "target " + std::to_string(s.target) + ": photo=" + io::format_double(s.final_loss.photo) +
         " smooth=" + io::format_double(s.final_loss.smooth) +
         " reg=" + io::format_double(s.final_loss.regularizer) +
         " total=" + io::format_double(s.final_loss.total) + " (initial " +
         io::format_double(s.initial.total) + ", best iteration " + std::to_string(s.best_iteration) + ")";
}

/// Optimizes every tuple listed in <dir>/tuples.txt; writes detail.pfm (offset, meters),
/// composed.pfm and loss.log next to each tuple's inputs.
inline std::vector<RefineSummary> cmd_refine(const PipelineConfig& config, const fs::path& tuples_dir) {
  config.validate();
  const auto tuples = io::read_tuple_list(tuples_dir / "tuples.txt");
  std::vector<RefineSummary> out;
  for (const auto& t : tuples) {
    const fs::path dir = tuples_dir / frame_tag("t", t.target);
    const FrameTuple tuple = load_tuple(dir);
    const auto result = optimize_detail(tuple, config.optimizer_config(), config.loss_config());
    io::write_pfm(dir / "detail.pfm", result.detail.offsets());
    io::write_pfm(dir / "composed.pfm", compose_depth(tuple.base_depth, result.detail).values);
    io::write_loss_log(dir / "loss.log", result.trace);
    out.push_back({t.target, result.trace.front(), result.best, result.best_iteration, result.trace.size()});
  }
  return out;
}

// --- eval -----------------------------------------------------------------------------

/// Truth as a point cloud: ASCII .xyz, or a depth PFM unprojected with `k`.
inline PointCloud load_truth_cloud(const fs::path& path, const Intrinsics& k) {
  if (path.extension() == ".xyz") return io::read_xyz(path);
  const Grid<double> depth = io::read_pfm(path);
  if (depth.width() != k.width || depth.height() != k.height)
    throw InputError("truth depth " + path.string() + " does not match the intrinsics size");
  return depth_to_cloud(DepthMap{depth}, k);
}

struct EvalOutcome {
  AccuracyReport report;
  RigidTransform registration;
};

/// ICP-registers the result cloud to the truth, then nearest-neighbor accuracy and MAE.
inline EvalOutcome evaluate_clouds(const PointCloud& result, const PointCloud& truth,
                                   const PipelineConfig& config) {
  const auto icp = icp_register(result, truth, config.icp_options());
  return {accuracy_and_mae(transform_cloud(result, icp.transform), truth), icp.transform};
}

/// `truth_k` defaults to `k`; a refined depth at working resolution pairs with native-size truth.
inline EvalOutcome cmd_eval(const PipelineConfig& config, const fs::path& result_depth,
                            const fs::path& truth, const Intrinsics& k,
                            const std::optional<Intrinsics>& truth_k = std::nullopt) {
  const Grid<double> depth = io::read_pfm(result_depth);
  if (depth.width() != k.width || depth.height() != k.height)
    throw InputError("result depth " + result_depth.string() + " is " + std::to_string(depth.width()) +
                     "x" + std::to_string(depth.height()) + ", intrinsics say " +
                     std::to_string(k.width) + "x" + std::to_string(k.height));
  const PointCloud result = depth_to_cloud(DepthMap{depth}, k);
  const PointCloud truth_cloud = load_truth_cloud(truth, truth_k.value_or(k));
  if (result.empty() || truth_cloud.empty()) throw InputError("evaluation needs non-empty depth");
  return evaluate_clouds(result, truth_cloud, config);
}

/// Accuracy table in the layout of the published comparison (percent; MAE in cm), followed
/// by a key=value block.
inline std::string format_report(const std::vector<std::pair<std::string, AccuracyReport>>& rows) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-16s %8s %8s %8s %9s\n", "Method", "1.0cm", "2.0cm", "4.0cm", "MAE(cm)");
  out += buf;
  for (const auto& [name, r] : rows) {
    std::snprintf(buf, sizeof buf, "%-16s %8.2f %8.2f %8.2f %9.3f\n", name.c_str(), r.accuracy.at(0),
                  r.accuracy.at(1), r.accuracy.at(2), r.mae * 100.0);
    out += buf;
  }
  for (const auto& [name, r] : rows) {
    out += "\n[" + name + "]\n";
    for (std::size_t i = 0; i < r.thresholds.size(); ++i) {
      std::snprintf(buf, sizeof buf, "acc_%.1fcm = %.4f\n", r.thresholds[i] * 100.0, r.accuracy[i]);
      out += buf;
    }
    std::snprintf(buf, sizeof buf, "mae_cm = %.6f\npoints = %zu\n", r.mae * 100.0, r.points);
    out += buf;
  }
  return out;
}

// --- pipeline -------------------------------------------------------------------------

struct PipelineSummary {
  std::vector<RefineSummary> refined;
  std::vector<std::pair<int, AccuracyReport>> base_metrics;
  std::vector<std::pair<int, AccuracyReport>> refined_metrics;
};

/// synth -> motion -> refine -> eval under one output tree:
/// scene/, motion/, report.txt, config.txt.
inline PipelineSummary cmd_pipeline(const PipelineConfig& config, const fs::path& out_dir) {
  config.validate();
  fs::create_directories(out_dir);
  config.save(out_dir / "config.txt");
  const auto synth = cmd_synth(config, out_dir / "scene");
  const auto motion = cmd_motion(config, synth.manifest, out_dir / "motion");
  PipelineSummary summary;
  summary.refined = cmd_refine(config, out_dir / "motion");

  const Intrinsics native = io::read_manifest(synth.manifest).intrinsics;
  std::string report;
  for (const auto& t : motion.accepted) {
    const fs::path dir = out_dir / "motion" / frame_tag("t", t.target);
    const Intrinsics k = read_tuple_file(dir / "tuple.txt").intrinsics;
    const fs::path truth = out_dir / "scene" / "truth" / (frame_tag("depth_", t.target) + ".pfm");
    const auto base = cmd_eval(config, dir / "base_depth.pfm", truth, k, native);
    const auto refined = cmd_eval(config, dir / "composed.pfm", truth, k, native);
    const std::string table = format_report({{"base", base.report}, {"refined", refined.report}});
    std::ofstream(dir / "metrics.txt") << table;
    report += "== target " + std::to_string(t.target) + "\n" + table + "\n";
    summary.base_metrics.emplace_back(t.target, base.report);
    summary.refined_metrics.emplace_back(t.target, refined.report);
  }
  for (const auto& s : summary.refined) report += summary_line(s) + "\n";
  std::ofstream(out_dir / "report.txt") << report;
  return summary;
}

}  // namespace nrdepth::pipeline
