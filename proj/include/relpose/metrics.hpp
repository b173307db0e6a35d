#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "relpose/geometry.hpp"
#include "relpose/render.hpp"

namespace relpose {

/// 3D model as a point set with its diameter (max pairwise point distance)
/// and a discrete symmetry list that always contains the identity.
/// Continuous symmetries must be discretized by the caller (e.g. 36-step
/// sampling about a cylinder axis).
struct ObjectModel {
  PointCloud points;
  double diameter = 0.0;
  std::vector<RigidTransform> symmetries{RigidTransform::identity()};

  bool symmetric() const { return symmetries.size() > 1; }

  void validate() const {
    require(!points.empty(), ErrorCode::empty_model, "object model: no points");
    require(diameter > 0.0, ErrorCode::invalid_argument,
            "object model: diameter must be positive");
    bool has_identity = false;
    for (const auto& s : symmetries)
      if (s.rotation.max_abs_diff(Mat3::identity()) <= 1e-9 &&
          s.translation.norm() <= 1e-9)
        has_identity = true;
    require(has_identity, ErrorCode::invalid_argument,
            "object model: symmetry list must contain the identity");
    double max_d2 = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i)
      for (std::size_t j = i + 1; j < points.size(); ++j)
        max_d2 = std::max(max_d2,
                          (points.points[i] - points.points[j]).squared_norm());
    require(diameter + 1e-6 >= std::sqrt(max_d2), ErrorCode::invalid_argument,
            "object model: diameter smaller than max pairwise point distance");
  }
};

struct MetricReport {
  double add_err = 0.0;
  double adds_err = 0.0;
  bool add_recall_flag = false;  // ADD(S)-0.1d
  double vsd_recall = 0.0;
  double mssd_recall = 0.0;
  double mspd_recall = 0.0;
  double ar = 0.0;  // mean of the three recalls
};

/// Mean matched-point distance between the two posed models.
inline double add_error(const ObjectModel& model, const RigidTransform& gt,
                        const RigidTransform& pred) {
  require(!model.points.empty(), ErrorCode::empty_model, "add_error: empty model");
  double s = 0.0;
  for (const Vec3& p : model.points.points)
    s += (gt.apply(p) - pred.apply(p)).norm();
  return s / static_cast<double>(model.points.size());
}

/// Mean closest-point distance (symmetric variant of ADD).
inline double adds_error(const ObjectModel& model, const RigidTransform& gt,
                         const RigidTransform& pred) {
  require(!model.points.empty(), ErrorCode::empty_model, "adds_error: empty model");
  std::vector<Vec3> pred_pts;
  pred_pts.reserve(model.points.size());
  for (const Vec3& p : model.points.points) pred_pts.push_back(pred.apply(p));
  double s = 0.0;
  for (const Vec3& p : model.points.points) {
    Vec3 g = gt.apply(p);
    double best = std::numeric_limits<double>::infinity();
    for (const Vec3& q : pred_pts)
      best = std::min(best, (g - q).squared_norm());
    s += std::sqrt(best);
  }
  return s / static_cast<double>(model.points.size());
}

/// ADD(S)-0.1d: the symmetry-appropriate error is below 10% of the diameter.
inline bool add_recall_01d(const ObjectModel& model, const RigidTransform& gt,
                           const RigidTransform& pred) {
  double err = model.symmetric() ? adds_error(model, gt, pred)
                                 : add_error(model, gt, pred);
  return err < 0.1 * model.diameter;
}

/// Maximum symmetry-aware surface distance:
/// min over symmetries s of max_i |gt(s(p_i)) - pred(p_i)|.
inline double mssd(const ObjectModel& model, const RigidTransform& gt,
                   const RigidTransform& pred) {
  require(!model.points.empty(), ErrorCode::empty_model, "mssd: empty model");
  double best = std::numeric_limits<double>::infinity();
  for (const RigidTransform& s : model.symmetries) {
    RigidTransform gs = compose(gt, s);
    double worst = 0.0;
    for (const Vec3& p : model.points.points)
      worst = std::max(worst, (gs.apply(p) - pred.apply(p)).norm());
    best = std::min(best, worst);
  }
  return best;
}

/// Maximum symmetry-aware projection distance in pixels.
inline double mspd(const ObjectModel& model, const RigidTransform& gt,
                   const RigidTransform& pred, const CameraIntrinsics& k) {
  require(!model.points.empty(), ErrorCode::empty_model, "mspd: empty model");
  double best = std::numeric_limits<double>::infinity();
  for (const RigidTransform& s : model.symmetries) {
    RigidTransform gs = compose(gt, s);
    double worst = 0.0;
    for (const Vec3& p : model.points.points) {
      PixelDepth a = project_point(k, gs.apply(p));
      PixelDepth b = project_point(k, pred.apply(p));
      double du = a.u - b.u, dv = a.v - b.v;
      worst = std::max(worst, std::sqrt(du * du + dv * dv));
    }
    best = std::min(best, worst);
  }
  return best;
}

namespace detail {

/// Splat radius for VSD rendering: max(1, round(0.5 * fx * spacing / z)),
/// with spacing the model's median nearest-neighbor distance.
inline std::vector<int> vsd_radii(const PointCloud& cam_points,
                                  const CameraIntrinsics& k, double spacing) {
  std::vector<int> r(cam_points.size(), 1);
  for (std::size_t i = 0; i < cam_points.size(); ++i) {
    double z = cam_points.points[i].z;
    if (z <= 0.0) continue;
    r[i] = std::max(1, static_cast<int>(std::lround(0.5 * k.fx * spacing / z)));
  }
  return r;
}

inline DepthMap render_posed_model(const ObjectModel& model,
                                   const RigidTransform& pose,
                                   const CameraIntrinsics& k, double spacing) {
  PointCloud cam = apply(pose, model.points);
  try {
    return render_points(cam, k, vsd_radii(cam, k, spacing)).depth;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::out_of_frustum) return DepthMap(k.width, k.height);
    throw;
  }
}

}  // namespace detail

/// Visible surface discrepancy. Both poses are rendered by z-buffer point
/// splatting; a rendered pixel is visible when its depth is within
/// `tolerance` of the scene depth (invalid scene depth imposes no occlusion).
/// The error is the fraction of the visibility-mask union where the two
/// renders disagree: a pixel outside the intersection, or inside it with
/// depths differing by more than `tolerance`. Raises empty-render when the
/// union is empty (e.g. object fully outside the frustum).
inline double vsd(const ObjectModel& model, const RigidTransform& gt,
                  const RigidTransform& pred, const DepthMap& scene_depth,
                  const CameraIntrinsics& k, double tolerance) {
  require(!model.points.empty(), ErrorCode::empty_model, "vsd: empty model");
  require(scene_depth.width == k.width && scene_depth.height == k.height,
          ErrorCode::dimension_mismatch,
          "vsd: scene depth dimensions differ from intrinsics");
  double spacing = detail::median_nn_spacing(model.points);
  DepthMap dg = detail::render_posed_model(model, gt, k, spacing);
  DepthMap dp = detail::render_posed_model(model, pred, k, spacing);

  std::size_t union_count = 0, mismatch = 0;
  for (std::size_t i = 0; i < dg.values.size(); ++i) {
    double zg = dg.values[i], zp = dp.values[i], zs = scene_depth.values[i];
    bool vis_g = zg > 0.0 && (zs <= 0.0 || zg <= zs + tolerance);
    bool vis_p = zp > 0.0 && (zs <= 0.0 || zp <= zs + tolerance);
    if (!vis_g && !vis_p) continue;
    ++union_count;
    if (!(vis_g && vis_p) || std::abs(zg - zp) > tolerance) ++mismatch;
  }
  require(union_count > 0, ErrorCode::empty_render,
          "vsd: no visible surface under either pose");
  return static_cast<double>(mismatch) / static_cast<double>(union_count);
}

/// BOP-style average recall. MSSD and VSD thresholds sweep 5%..50% of the
/// object diameter in 10 steps; MSPD thresholds sweep 5%..50% of the image
/// width; VSD recall additionally averages over misalignment tolerances
/// 5%..50% of the diameter (a 10x10 grid).
inline MetricReport average_recall(const ObjectModel& model,
                                   const RigidTransform& gt,
                                   const RigidTransform& pred,
                                   const CameraIntrinsics& k,
                                   const DepthMap& scene_depth) {
  MetricReport r;
  r.add_err = add_error(model, gt, pred);
  r.adds_err = adds_error(model, gt, pred);
  r.add_recall_flag = add_recall_01d(model, gt, pred);

  const double d = model.diameter;
  double mssd_val = mssd(model, gt, pred);
  double mspd_val = mspd(model, gt, pred, k);

  int mssd_pass = 0, mspd_pass = 0, vsd_pass = 0;
  for (int step = 1; step <= 10; ++step) {
    double frac = 0.05 * step;
    if (mssd_val < frac * d) ++mssd_pass;
    if (mspd_val < frac * k.width) ++mspd_pass;
  }
  for (int tol_step = 1; tol_step <= 10; ++tol_step) {
    double e = vsd(model, gt, pred, scene_depth, k, 0.05 * tol_step * d);
    for (int theta_step = 1; theta_step <= 10; ++theta_step)
      if (e < 0.05 * theta_step) ++vsd_pass;
  }
  r.mssd_recall = mssd_pass / 10.0;
  r.mspd_recall = mspd_pass / 10.0;
  r.vsd_recall = vsd_pass / 100.0;
  r.ar = (r.vsd_recall + r.mssd_recall + r.mspd_recall) / 3.0;
  return r;
}

/// IoU per view, averaged over the two views. Two empty masks in a view
/// count as IoU 1.
inline double mask_miou(const Mask& pred_a, const Mask& gt_a,
                        const Mask& pred_q, const Mask& gt_q) {
  auto iou = [](const Mask& p, const Mask& g) {
    require(p.width == g.width && p.height == g.height,
            ErrorCode::dimension_mismatch, "mask_miou: dimensions differ");
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < p.values.size(); ++i) {
      bool pp = p.values[i] != 0, gg = g.values[i] != 0;
      inter += (pp && gg);
      uni += (pp || gg);
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
  };
  return 0.5 * (iou(pred_a, gt_a) + iou(pred_q, gt_q));
}

}  // namespace relpose
