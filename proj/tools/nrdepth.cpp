#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "nrdepth/pipeline.hpp"

namespace fs = std::filesystem;
using namespace nrdepth;

namespace {

struct Common {
  std::string config_file;
  std::vector<std::string> overrides;
  bool quiet = false;
};

void add_common(CLI::App* app, Common& common) {
  app->add_option("-c,--config", common.config_file, "flat key = value configuration file");
  app->add_option("-s,--set", common.overrides, "override a configuration key (key=value)");
  app->add_flag("-q,--quiet", common.quiet, "suppress informational messages");
}

PipelineConfig resolve_config(const Common& common) {
  PipelineConfig config = common.config_file.empty() ? PipelineConfig{} : PipelineConfig::load(common.config_file);
  for (const auto& item : common.overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw InputError("--set expects key=value, got '" + item + "'");
    config.set(io::trim(item.substr(0, eq)), io::trim(item.substr(eq + 1)));
  }
  config.validate();
  log::set_quiet(common.quiet);
  return config;
}

Intrinsics eval_intrinsics(const std::string& tuple_dir, const std::string& manifest, const PipelineConfig& config) {
  if (!tuple_dir.empty()) return pipeline::read_tuple_file(fs::path(tuple_dir) / "tuple.txt").intrinsics;
  if (!manifest.empty()) return config.apply_overrides(io::read_manifest(manifest).intrinsics);
  throw InputError("eval needs --tuple or --manifest for the camera intrinsics");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Refine coarse human depth with multi-frame photo-consistency"};
  app.require_subcommand(1);
  Common common;

  std::string out_dir, manifest, tuples_dir, result, truth, tuple_dir;

  auto* synth = app.add_subcommand("synth", "write a synthetic scene (manifest, meshes, images, truth depth)");
  add_common(synth, common);
  synth->add_option("-o,--out", out_dir, "output directory")->required();

  auto* motion = app.add_subcommand("motion", "group tuples, compute motion maps, base depth and masks");
  add_common(motion, common);
  motion->add_option("-m,--manifest", manifest, "sequence manifest")->required();
  motion->add_option("-o,--out", out_dir, "output directory")->required();

  auto* refine = app.add_subcommand("refine", "optimize the detail map of every tuple");
  add_common(refine, common);
  refine->add_option("-t,--tuples", tuples_dir, "directory written by 'motion'")->required();

  auto* eval = app.add_subcommand("eval", "accuracy and MAE of a depth map against truth");
  add_common(eval, common);
  eval->add_option("-r,--result", result, "result depth (PFM)")->required();
  eval->add_option("-g,--truth", truth, "truth depth (PFM) or point cloud (.xyz)")->required();
  eval->add_option("--tuple", tuple_dir, "tuple directory supplying the result intrinsics");
  eval->add_option("-m,--manifest", manifest, "manifest supplying the intrinsics (of the truth, when --tuple is also given)");

  auto* run = app.add_subcommand("pipeline", "synth, motion, refine and eval in one output tree");
  add_common(run, common);
  run->add_option("-o,--out", out_dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const PipelineConfig config = resolve_config(common);
    if (synth->parsed()) {
      const auto s = pipeline::cmd_synth(config, out_dir);
      std::cout << "wrote " << s.frames << " frames, manifest " << s.manifest.string() << '\n';
    } else if (motion->parsed()) {
      const auto s = pipeline::cmd_motion(config, manifest, out_dir);
      std::cout << s.accepted.size() << " of " << s.grouped.size() << " tuples kept\n";
    } else if (refine->parsed()) {
      for (const auto& s : pipeline::cmd_refine(config, tuples_dir)) std::cout << pipeline::summary_line(s) << '\n';
    } else if (eval->parsed()) {
      const auto k = eval_intrinsics(tuple_dir, manifest, config);
      // With both given, the tuple describes the result and the manifest the native-size truth.
      std::optional<Intrinsics> truth_k;
      if (!tuple_dir.empty() && !manifest.empty())
        truth_k = config.apply_overrides(io::read_manifest(manifest).intrinsics);
      const auto outcome = pipeline::cmd_eval(config, result, truth, k, truth_k);
      std::cout << pipeline::format_report({{"result", outcome.report}});
    } else if (run->parsed()) {
      pipeline::cmd_pipeline(config, out_dir);
      std::cout << std::ifstream(fs::path(out_dir) / "report.txt").rdbuf();
    }
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
