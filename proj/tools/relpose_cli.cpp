// Command-line front end: synth -> match -> register -> evaluate pipelines
// over the on-disk scene-pair formats. Every stage is deterministic given
// --seed; outputs are independent of --threads.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "relpose/pipeline.hpp"

namespace fs = std::filesystem;
using namespace relpose;

namespace {

struct CommonOpts {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int threads = 0;
  std::string format = "json";
};

PipelineConfig resolve_config(const CommonOpts& opts) {
  PipelineConfig cfg;
  if (!opts.config_path.empty()) cfg = load_config(opts.config_path);
  if (opts.threads > 0) cfg.threads = opts.threads;
  return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& opts, bool with_format = false) {
  cmd->add_option("--config", opts.config_path,
                  "JSON config overriding pipeline defaults");
  cmd->add_option("--seed", opts.seed, "RNG seed")
      ->each([&opts](const std::string&) { opts.seed_given = true; });
  cmd->add_option("--threads", opts.threads,
                  "worker threads (0 = all cores); never changes results");
  if (with_format)
    cmd->add_option("--format", opts.format, "report format: json|csv")
        ->check(CLI::IsMember({"json", "csv"}));
}

void write_report(const nlohmann::json& report, const std::string& path,
                  const std::string& format) {
  if (format == "csv")
    io::detail::write_text(path, report_to_csv(report));
  else
    io::detail::write_text(path, report.dump(2) + "\n");
}

int cmd_synth(const std::string& spec_path, const std::string& out_dir,
              const CommonOpts& opts) {
  SyntheticSceneSpec spec = load_scene_spec(spec_path);
  if (opts.seed_given) spec.seed = opts.seed;
  ScenePair pair = generate_scene_pair(spec);
  std::string manifest = io::save_scene_pair(out_dir, pair);
  std::cout << manifest << "\n";
  return 0;
}

int cmd_match(const std::string& manifest_path, const std::string& out_path,
              const CommonOpts& opts) {
  PipelineConfig cfg = resolve_config(opts);
  io::LoadedScenePair scene = io::load_scene_pair(manifest_path);
  MatchSet matches = run_match(scene, cfg);
  io::save_matches_csv(out_path, matches);
  std::cout << out_path << "\n";
  return 0;
}

int cmd_register(const std::string& manifest_path,
                 const std::string& matches_path, const std::string& out_path,
                 const std::string& report_path, const CommonOpts& opts) {
  PipelineConfig cfg = resolve_config(opts);
  io::LoadedScenePair scene = io::load_scene_pair(manifest_path);
  MatchSet matches = io::load_matches_csv(matches_path);
  PoseEstimate est = run_register(scene, matches, cfg, opts.seed);
  io::save_pose(out_path, est.transform, "A_to_Q");
  if (!report_path.empty()) {
    nlohmann::json report = {{"inlier_count", est.inliers.size()},
                             {"rmse", est.rmse},
                             {"match_count", matches.pairs.size()},
                             {"seed", opts.seed},
                             {"config", to_json(cfg)}};
    write_report(report, report_path, opts.format);
  }
  std::cout << out_path << "\n";
  return 0;
}

int cmd_evaluate(const std::string& manifest_path, const std::string& pose_path,
                 const std::string& out_path, const CommonOpts& opts) {
  PipelineConfig cfg = resolve_config(opts);
  io::LoadedScenePair scene = io::load_scene_pair(manifest_path);
  io::LoadedPose pose = io::load_pose(pose_path);
  require(pose.frame == "A_to_Q", ErrorCode::malformed_header,
          pose_path + ": expected frame 'A_to_Q', got '" + pose.frame + "'");
  require(scene.gt_pose.has_value(), ErrorCode::invalid_argument,
          manifest_path + ": evaluation needs a gt_pose entry");

  PipelineReport report;
  report.estimated_pose = pose.transform;
  PoseErrors err;
  err.rotation_deg =
      rotation_distance(pose.transform.rotation, scene.gt_pose->rotation) *
      (180.0 / 3.14159265358979323846);
  err.translation_m =
      (pose.transform.translation - scene.gt_pose->translation).norm();
  report.pose_error = err;
  if (scene.object_pose_a)
    report.metrics = evaluate_pose(scene, pose.transform);
  report.miou = mask_miou(scene.mask_a, scene.mask_a, scene.mask_q, scene.mask_q);
  if (scene.gt_matches) report.losses = compute_losses(scene, cfg, opts.seed);

  nlohmann::json j = report_to_json(report, cfg, opts.seed);
  j.erase("matching");
  j.erase("registration");
  write_report(j, out_path, opts.format);
  std::cout << out_path << "\n";
  return 0;
}

int cmd_e2e(const std::string& spec_path, const std::string& out_dir,
            const CommonOpts& opts) {
  SyntheticSceneSpec spec = load_scene_spec(spec_path);
  if (opts.seed_given) spec.seed = opts.seed;
  PipelineConfig cfg = resolve_config(opts);

  ScenePair pair = generate_scene_pair(spec);
  io::save_scene_pair(out_dir, pair);
  io::LoadedScenePair scene = to_loaded(pair);

  PipelineReport report = run_pipeline(scene, cfg, spec.seed);
  fs::path dir(out_dir);
  io::save_pose((dir / "pose_estimated.json").string(), report.estimated_pose,
                "A_to_Q");
  std::string report_path =
      (dir / ("report." + opts.format)).string();
  write_report(report_to_json(report, cfg, spec.seed), report_path, opts.format);
  std::cout << report_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Relative 6D pose estimation core: synthetic scenes, masked "
               "descriptor matching, spatially-consistent registration, and "
               "symmetry-aware pose metrics"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::string spec_path, manifest_path, matches_path, pose_path;
  std::string out_path, report_path;

  auto* synth = app.add_subcommand("synth", "generate a scene pair from a spec");
  synth->add_option("--spec", spec_path, "scene spec JSON")->required();
  synth->add_option("--out", out_path, "output directory")->required();
  add_common(synth, opts);

  auto* match = app.add_subcommand("match", "masked NN matching on a manifest");
  match->add_option("--manifest", manifest_path, "scene manifest JSON")->required();
  match->add_option("--out", out_path, "output matches CSV")->required();
  add_common(match, opts);

  auto* reg = app.add_subcommand("register", "estimate the A->Q pose from matches");
  reg->add_option("--manifest", manifest_path, "scene manifest JSON")->required();
  reg->add_option("--matches", matches_path, "matches CSV")->required();
  reg->add_option("--out", out_path, "output pose JSON")->required();
  reg->add_option("--report", report_path, "optional registration report");
  add_common(reg, opts, true);

  auto* eval = app.add_subcommand("evaluate", "score a pose against ground truth");
  eval->add_option("--manifest", manifest_path, "scene manifest JSON")->required();
  eval->add_option("--pose", pose_path, "estimated pose JSON")->required();
  eval->add_option("--out", out_path, "output report path")->required();
  add_common(eval, opts, true);

  auto* e2e = app.add_subcommand("e2e", "synth + match + register + evaluate");
  e2e->add_option("--spec", spec_path, "scene spec JSON")->required();
  e2e->add_option("--out", out_path, "output directory")->required();
  add_common(e2e, opts, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    if (synth->parsed()) return cmd_synth(spec_path, out_path, opts);
    if (match->parsed()) return cmd_match(manifest_path, out_path, opts);
    if (reg->parsed())
      return cmd_register(manifest_path, matches_path, out_path, report_path, opts);
    if (eval->parsed()) return cmd_evaluate(manifest_path, pose_path, out_path, opts);
    if (e2e->parsed()) return cmd_e2e(spec_path, out_path, opts);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 5;
  }
  return 0;
}
