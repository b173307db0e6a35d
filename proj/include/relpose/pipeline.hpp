#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "relpose/config.hpp"
#include "relpose/io.hpp"
#include "relpose/metrics.hpp"
#include "relpose/registration.hpp"
#include "relpose/synth.hpp"

namespace relpose {

struct PoseErrors {
  double rotation_deg = 0.0;
  double translation_m = 0.0;
};

struct LossSummary {
  double positive = 0.0;
  double negative = 0.0;
  double segmentation = 0.0;
  double total = 0.0;
};

/// Full pipeline output for one scene pair.
struct PipelineReport {
  std::size_t match_count = 0;
  std::size_t lifted_count = 0;
  std::size_t inlier_count = 0;
  double rmse = 0.0;
  RigidTransform estimated_pose;  // A -> Q
  std::optional<PoseErrors> pose_error;
  std::optional<MetricReport> metrics;
  std::optional<double> miou;
  std::optional<LossSummary> losses;
};

inline io::LoadedScenePair to_loaded(const ScenePair& pair) {
  io::LoadedScenePair out;
  out.depth_a = pair.depth_a;
  out.depth_q = pair.depth_q;
  out.mask_a = pair.mask_a;
  out.mask_q = pair.mask_q;
  out.fmap_a = pair.fmap_a;
  out.fmap_q = pair.fmap_q;
  out.intrinsics_a = pair.intrinsics_a;
  out.intrinsics_q = pair.intrinsics_q;
  out.model = pair.model;
  out.gt_pose = pair.gt_pose;
  out.gt_matches = pair.gt_matches;
  out.object_pose_a = pair.object_pose_a;
  out.object_pose_q = pair.object_pose_q;
  return out;
}

/// Masked feature extraction followed by thresholded NN matching.
inline MatchSet run_match(const io::LoadedScenePair& scene,
                          const PipelineConfig& cfg) {
  FeatureList fa = extract_masked_features(scene.fmap_a, scene.mask_a);
  FeatureList fq = extract_masked_features(scene.fmap_q, scene.mask_q);
  return match_nearest_neighbor(fa, fq, cfg.mu_t, cfg.capacity,
                                cfg.mutual_filter, cfg.threads);
}

/// Lift matches through the depth maps and register, anchor onto query.
inline PoseEstimate run_register(const io::LoadedScenePair& scene,
                                 const MatchSet& matches,
                                 const PipelineConfig& cfg,
                                 std::uint64_t seed) {
  auto [pa, pq] = lift_matches_to_3d(matches, scene.depth_a, scene.depth_q,
                                     scene.intrinsics_a, scene.intrinsics_q);
  CorrespondenceSet3D corr{std::move(pa), std::move(pq)};
  return register_correspondences(corr, cfg.registration_params(seed));
}

/// Symmetry-aware metrics for a predicted relative pose. The object's pose
/// in the query view is gt_pose (resp. the estimate) composed with its
/// anchor pose, which keeps model points and symmetries in the model frame.
inline MetricReport evaluate_pose(const io::LoadedScenePair& scene,
                                  const RigidTransform& estimated) {
  require(scene.gt_pose.has_value(), ErrorCode::invalid_argument,
          "evaluate: manifest provides no ground-truth pose");
  require(scene.object_pose_a.has_value(), ErrorCode::invalid_argument,
          "evaluate: manifest provides no object_pose_a (model->anchor)");
  RigidTransform gt_q = compose(*scene.gt_pose, *scene.object_pose_a);
  RigidTransform pred_q = compose(estimated, *scene.object_pose_a);
  return average_recall(scene.model, gt_q, pred_q, scene.intrinsics_q,
                        scene.depth_q);
}

inline SoftMask to_soft(const Mask& m) {
  SoftMask s(m.width, m.height);
  for (std::size_t i = 0; i < m.values.size(); ++i)
    s.values[i] = m.values[i] ? 1.0 : 0.0;
  return s;
}

inline LossSummary compute_losses(const io::LoadedScenePair& scene,
                                  const PipelineConfig& cfg,
                                  std::uint64_t seed) {
  require(scene.gt_matches.has_value(), ErrorCode::empty_supervision,
          "losses: manifest provides no ground-truth matches");
  LossReport r = total_loss(scene.fmap_a, scene.fmap_q, to_soft(scene.mask_a),
                            to_soft(scene.mask_q), scene.mask_a, scene.mask_q,
                            *scene.gt_matches, cfg.loss_params(), cfg.capacity,
                            seed);
  return {r.positive, r.negative, r.segmentation, r.total};
}

/// match -> lift -> register -> evaluate; losses when supervision exists.
inline PipelineReport run_pipeline(const io::LoadedScenePair& scene,
                                   const PipelineConfig& cfg,
                                   std::uint64_t seed) {
  PipelineReport report;
  MatchSet matches = run_match(scene, cfg);
  report.match_count = matches.pairs.size();

  auto [pa, pq] = lift_matches_to_3d(matches, scene.depth_a, scene.depth_q,
                                     scene.intrinsics_a, scene.intrinsics_q);
  report.lifted_count = pa.size();
  CorrespondenceSet3D corr{std::move(pa), std::move(pq)};
  PoseEstimate est = register_correspondences(corr, cfg.registration_params(seed));
  report.inlier_count = est.inliers.size();
  report.rmse = est.rmse;
  report.estimated_pose = est.transform;

  if (scene.gt_pose) {
    PoseErrors err;
    err.rotation_deg =
        rotation_distance(est.transform.rotation, scene.gt_pose->rotation) *
        (180.0 / 3.14159265358979323846);
    err.translation_m =
        (est.transform.translation - scene.gt_pose->translation).norm();
    report.pose_error = err;
    if (scene.object_pose_a)
      report.metrics = evaluate_pose(scene, est.transform);
  }
  // The pipeline's masks are both prediction and reference here; the miou
  // field reports the quality of whatever mask source the manifest supplies.
  report.miou = mask_miou(scene.mask_a, scene.mask_a, scene.mask_q, scene.mask_q);
  if (scene.gt_matches) report.losses = compute_losses(scene, cfg, seed);
  return report;
}

inline nlohmann::json report_to_json(const PipelineReport& r,
                                     const PipelineConfig& cfg,
                                     std::uint64_t seed) {
  nlohmann::json j;
  j["seed"] = seed;
  j["config"] = to_json(cfg);
  j["matching"] = {{"match_count", r.match_count},
                   {"lifted_count", r.lifted_count}};
  j["registration"] = {
      {"inlier_count", r.inlier_count},
      {"rmse", r.rmse},
      {"pose",
       {{"rotation", r.estimated_pose.rotation.m},
        {"translation",
         {r.estimated_pose.translation.x, r.estimated_pose.translation.y,
          r.estimated_pose.translation.z}},
        {"frame", "A_to_Q"}}}};
  if (r.pose_error) {
    j["pose_error"] = {{"rotation_deg", r.pose_error->rotation_deg},
                       {"translation_m", r.pose_error->translation_m}};
  }
  if (r.metrics) {
    j["metrics"] = {{"add_err", r.metrics->add_err},
                    {"adds_err", r.metrics->adds_err},
                    {"add_recall_01d", r.metrics->add_recall_flag},
                    {"vsd_recall", r.metrics->vsd_recall},
                    {"mssd_recall", r.metrics->mssd_recall},
                    {"mspd_recall", r.metrics->mspd_recall},
                    {"ar", r.metrics->ar}};
  }
  if (r.miou) j["metrics"]["miou"] = *r.miou;
  if (r.losses) {
    j["losses"] = {{"positive", r.losses->positive},
                   {"negative", r.losses->negative},
                   {"segmentation", r.losses->segmentation},
                   {"total", r.losses->total}};
  }
  j["metadata"] = {
      {"mspd_threshold_basis", "image_width"},
      {"vsd_recall_grid", "tolerance x theta, 10x10, fractions of diameter"},
      {"ar_definition", "mean(vsd_recall, mssd_recall, mspd_recall)"}};
  return j;
}

namespace detail {

inline void flatten_json(const nlohmann::json& j, const std::string& prefix,
                         std::vector<std::pair<std::string, std::string>>& out) {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it)
      flatten_json(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(),
                   out);
  } else if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i)
      flatten_json(j[i], prefix + "[" + std::to_string(i) + "]", out);
  } else {
    out.emplace_back(prefix, j.dump());
  }
}

}  // namespace detail

/// key,value rows, sorted by key; scalar formatting identical to the JSON
/// encoding so both report formats stay byte-stable.
inline std::string report_to_csv(const nlohmann::json& j) {
  std::vector<std::pair<std::string, std::string>> rows;
  detail::flatten_json(j, "", rows);
  std::sort(rows.begin(), rows.end());
  std::string out = "key,value\n";
  for (auto& [k, v] : rows) out += k + "," + v + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// SyntheticSceneSpec <-> JSON (the `synth`/`e2e` --spec file format).
// ---------------------------------------------------------------------------

namespace detail {

inline RigidTransform pose_from_json(const nlohmann::json& j,
                                     const std::string& where) {
  RigidTransform t;
  try {
    t.rotation.m = j.at("rotation").get<std::array<double, 9>>();
    auto tr = j.at("translation").get<std::array<double, 3>>();
    t.translation = {tr[0], tr[1], tr[2]};
  } catch (const nlohmann::json::exception&) {
    fail(ErrorCode::malformed_header,
         where + ": pose needs 'rotation' (9 numbers) and 'translation' (3)");
  }
  require(t.is_valid(1e-6), ErrorCode::malformed_header,
          where + ": pose rotation is not orthonormal with det +1");
  return t;
}

}  // namespace detail

inline SyntheticSceneSpec scene_spec_from_json(const nlohmann::json& j,
                                               const std::string& where) {
  static const std::set<std::string> known = {
      "shape", "scale", "seed", "descriptor_dim", "descriptor_noise_sigma",
      "outlier_fraction", "depth_noise_sigma", "distractor_count",
      "image_width", "image_height", "focal", "model_points", "splat_radius",
      "match_capacity", "pose_a", "pose_q"};
  for (auto it = j.begin(); it != j.end(); ++it)
    require(known.count(it.key()) > 0, ErrorCode::invalid_argument,
            where + ": unknown scene spec key '" + it.key() + "'");
  SyntheticSceneSpec spec;
  if (j.contains("shape"))
    spec.object_shape = object_shape_from_name(j.at("shape").get<std::string>());
  spec.object_scale = j.value("scale", spec.object_scale);
  spec.seed = j.value("seed", spec.seed);
  spec.descriptor_dim = j.value("descriptor_dim", spec.descriptor_dim);
  spec.descriptor_noise_sigma =
      j.value("descriptor_noise_sigma", spec.descriptor_noise_sigma);
  spec.outlier_fraction = j.value("outlier_fraction", spec.outlier_fraction);
  spec.depth_noise_sigma = j.value("depth_noise_sigma", spec.depth_noise_sigma);
  spec.distractor_count = j.value("distractor_count", spec.distractor_count);
  spec.image_width = j.value("image_width", spec.image_width);
  spec.image_height = j.value("image_height", spec.image_height);
  spec.focal = j.value("focal", spec.focal);
  spec.model_points = j.value("model_points", spec.model_points);
  spec.splat_radius = j.value("splat_radius", spec.splat_radius);
  spec.match_capacity = j.value("match_capacity", spec.match_capacity);
  if (j.contains("pose_a"))
    spec.pose_a = detail::pose_from_json(j.at("pose_a"), where + ": pose_a");
  if (j.contains("pose_q"))
    spec.pose_q = detail::pose_from_json(j.at("pose_q"), where + ": pose_q");
  spec.validate();
  return spec;
}

inline SyntheticSceneSpec load_scene_spec(const std::string& path) {
  return scene_spec_from_json(io::detail::parse_json_file(path), path);
}

}  // namespace relpose
