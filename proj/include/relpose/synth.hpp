#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "relpose/loss.hpp"
#include "relpose/matching.hpp"
#include "relpose/metrics.hpp"
#include "relpose/registration.hpp"
#include "relpose/render.hpp"
#include "relpose/rng.hpp"

namespace relpose {

enum class ObjectShape { box, cylinder, sphere, composite };

inline const char* object_shape_name(ObjectShape s) {
  switch (s) {
    case ObjectShape::box: return "box";
    case ObjectShape::cylinder: return "cylinder";
    case ObjectShape::sphere: return "sphere";
    case ObjectShape::composite: return "composite";
  }
  return "unknown";
}

inline ObjectShape object_shape_from_name(const std::string& name) {
  if (name == "box") return ObjectShape::box;
  if (name == "cylinder") return ObjectShape::cylinder;
  if (name == "sphere") return ObjectShape::sphere;
  if (name == "composite") return ObjectShape::composite;
  fail(ErrorCode::invalid_argument, "unknown object shape '" + name + "'");
}

/// Everything needed to generate one ground-truth-complete scene pair.
/// Shape scale conventions: box side = scale, sphere radius = scale,
/// cylinder radius = scale/2 with height = scale.
struct SyntheticSceneSpec {
  ObjectShape object_shape = ObjectShape::box;
  double object_scale = 0.12;
  std::optional<RigidTransform> pose_a, pose_q;  // sampled from seed if absent
  int descriptor_dim = 32;
  double descriptor_noise_sigma = 0.0;
  double outlier_fraction = 0.0;
  double depth_noise_sigma = 0.0;
  int distractor_count = 0;
  std::uint64_t seed = 0;
  int image_width = 192, image_height = 192;
  double focal = 250.0;
  int model_points = 20000;
  int splat_radius = 0;  // <= 0 selects the spacing-derived radius
  std::size_t match_capacity = 2000;

  void validate() const {
    require(object_scale > 0.0, ErrorCode::invalid_argument,
            "scene spec: object scale must be positive");
    require(outlier_fraction >= 0.0 && outlier_fraction < 1.0,
            ErrorCode::invalid_argument,
            "scene spec: outlier fraction must be in [0, 1)");
    require(descriptor_dim >= 1, ErrorCode::invalid_argument,
            "scene spec: descriptor dim must be >= 1");
    require(depth_noise_sigma >= 0.0 && descriptor_noise_sigma >= 0.0,
            ErrorCode::invalid_argument, "scene spec: negative noise sigma");
    require(image_width > 0 && image_height > 0 && focal > 0.0,
            ErrorCode::invalid_argument, "scene spec: bad camera settings");
    require(model_points >= 16, ErrorCode::invalid_argument,
            "scene spec: need at least 16 model points");
    require(distractor_count >= 0, ErrorCode::invalid_argument,
            "scene spec: negative distractor count");
  }

  CameraIntrinsics intrinsics() const {
    return {focal, focal, image_width / 2.0, image_height / 2.0, image_width,
            image_height};
  }
};

/// A generated anchor/query pair with full ground truth.
struct ScenePair {
  DepthMap depth_a, depth_q;
  Mask mask_a, mask_q;
  FeatureMap fmap_a, fmap_q;
  CameraIntrinsics intrinsics_a, intrinsics_q;
  RigidTransform gt_pose;  // T_{A->Q}
  MatchSupervision gt_matches;
  ObjectModel model;                       // model frame
  RigidTransform object_pose_a, object_pose_q;  // model -> camera
};

namespace detail {

constexpr double kPi = 3.14159265358979323846;

/// Grid-sample the six faces of a cube at the given spacing. Regular grids
/// keep the nearest-neighbor spacing equal to the cell size, which the splat
/// radius rules rely on for gap-free rendering.
inline void push_cube_surface(std::vector<Vec3>& pts, const Vec3& center,
                              double side, double cell) {
  double h = 0.5 * side;
  int n = std::max(2, static_cast<int>(std::lround(side / cell)));
  auto coord = [&](int i) { return -h + (i + 0.5) * side / n; };
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double a = coord(i), b = coord(j);
      pts.push_back(center + Vec3{h, a, b});
      pts.push_back(center + Vec3{-h, a, b});
      pts.push_back(center + Vec3{a, h, b});
      pts.push_back(center + Vec3{a, -h, b});
      pts.push_back(center + Vec3{a, b, h});
      pts.push_back(center + Vec3{a, b, -h});
    }
  }
}

inline void push_cube_corners(std::vector<Vec3>& pts, const Vec3& center,
                              double side) {
  double h = 0.5 * side;
  for (int sx : {-1, 1})
    for (int sy : {-1, 1})
      for (int sz : {-1, 1}) pts.push_back(center + Vec3{sx * h, sy * h, sz * h});
}

inline std::vector<RigidTransform> z_rotation_symmetries(int steps) {
  std::vector<RigidTransform> out;
  out.reserve(steps);
  for (int k = 0; k < steps; ++k) {
    double angle = 2.0 * 3.14159265358979323846 * k / steps;
    out.push_back({rotation_about_axis({0, 0, 1}, angle), {}});
  }
  return out;
}

/// Diameter is the max pairwise distance over the deterministic extreme
/// points; by convexity no random surface sample can exceed it.
inline double diameter_of(const std::vector<Vec3>& extremes) {
  double best = 0.0;
  for (std::size_t i = 0; i < extremes.size(); ++i)
    for (std::size_t j = i + 1; j < extremes.size(); ++j)
      best = std::max(best, (extremes[i] - extremes[j]).squared_norm());
  return std::sqrt(best);
}

}  // namespace detail

/// Deterministic quasi-uniform surface sampling of a primitive. `density`
/// is the approximate target point count; grids are sized so the spacing is
/// near sqrt(area / density). The shape's extreme points are always included,
/// so the stored diameter equals the exact max pairwise distance. `seed` is
/// accepted for interface stability; current sampling is grid-based.
inline ObjectModel sample_object(ObjectShape shape, double scale, int density,
                                 std::uint64_t seed) {
  (void)seed;
  require(scale > 0.0, ErrorCode::invalid_argument,
          "sample_object: scale must be positive");
  require(density >= 16, ErrorCode::invalid_argument,
          "sample_object: need at least 16 points");
  ObjectModel model;
  std::vector<Vec3>& pts = model.points.points;

  switch (shape) {
    case ObjectShape::box: {
      double cell = std::sqrt(6.0 * scale * scale / density);
      detail::push_cube_corners(pts, {}, scale);
      detail::push_cube_surface(pts, {}, scale, cell);
      std::vector<Vec3> corners(pts.begin(), pts.begin() + 8);
      model.diameter = detail::diameter_of(corners);
      model.symmetries = detail::z_rotation_symmetries(4);
      break;
    }
    case ObjectShape::cylinder: {
      double r = 0.5 * scale, h = scale;
      double area = 2.0 * detail::kPi * r * (h + r);
      double cell = std::sqrt(area / density);
      std::vector<Vec3> rim;
      for (int k = 0; k < 4; ++k) {
        double a = detail::kPi * 0.5 * k;
        rim.push_back({r * std::cos(a), r * std::sin(a), 0.5 * h});
        rim.push_back({r * std::cos(a), r * std::sin(a), -0.5 * h});
      }
      pts = rim;
      int n_theta = std::max(8, static_cast<int>(std::lround(2.0 * detail::kPi * r / cell)));
      int n_z = std::max(2, static_cast<int>(std::lround(h / cell)));
      for (int i = 0; i < n_theta; ++i) {
        double a = 2.0 * detail::kPi * i / n_theta;
        for (int j = 0; j < n_z; ++j) {
          double z = -0.5 * h + (j + 0.5) * h / n_z;
          pts.push_back({r * std::cos(a), r * std::sin(a), z});
        }
      }
      int n_rings = std::max(1, static_cast<int>(std::lround(r / cell)));
      for (int sign : {-1, 1}) {
        pts.push_back({0, 0, sign * 0.5 * h});
        for (int j = 0; j < n_rings; ++j) {
          double rho = (j + 0.5) * r / n_rings;
          int n_ring = std::max(4, static_cast<int>(std::lround(2.0 * detail::kPi * rho / cell)));
          for (int i = 0; i < n_ring; ++i) {
            double a = 2.0 * detail::kPi * i / n_ring;
            pts.push_back({rho * std::cos(a), rho * std::sin(a), sign * 0.5 * h});
          }
        }
      }
      model.diameter = detail::diameter_of(rim);
      model.symmetries = detail::z_rotation_symmetries(36);
      break;
    }
    case ObjectShape::sphere: {
      // Fibonacci lattice; poles on all three axes pin the exact diameter.
      double r = scale;
      for (int axis = 0; axis < 3; ++axis)
        for (int sign : {-1, 1}) {
          Vec3 p{};
          (axis == 0 ? p.x : axis == 1 ? p.y : p.z) = sign * r;
          pts.push_back(p);
        }
      int n = std::max(16, density - 6);
      double golden = detail::kPi * (3.0 - std::sqrt(5.0));
      for (int i = 0; i < n; ++i) {
        double z = 1.0 - 2.0 * (i + 0.5) / n;
        double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
        double a = golden * i;
        pts.push_back({r * rho * std::cos(a), r * rho * std::sin(a), r * z});
      }
      model.diameter = 2.0 * r;
      model.symmetries = {RigidTransform::identity()};
      break;
    }
    case ObjectShape::composite: {
      // Main cube plus a half-size cube attached off-center on its top face;
      // the lateral offset removes every rotational symmetry.
      double s = scale;
      Vec3 knob_center{0.125 * s, 0.0, 0.75 * s};
      double area = 6.0 * s * s + 6.0 * 0.25 * s * s;
      double cell = std::sqrt(area / density);
      detail::push_cube_corners(pts, {}, s);
      detail::push_cube_corners(pts, knob_center, 0.5 * s);
      std::vector<Vec3> corners = pts;
      detail::push_cube_surface(pts, {}, s, cell);
      detail::push_cube_surface(pts, knob_center, 0.5 * s, cell);
      model.diameter = detail::diameter_of(corners);
      model.symmetries = {RigidTransform::identity()};
      break;
    }
  }
  return model;
}

namespace detail {

inline std::vector<int> harness_radii(const PointCloud& cam_points,
                                      const CameraIntrinsics& k, double spacing,
                                      int fixed_radius) {
  if (fixed_radius > 0)
    return std::vector<int>{fixed_radius};
  // Grid-sampled surfaces have NN spacing == cell size; a disk of ~0.85x the
  // projected cell covers the worst-case (diagonal) pixel at 0.707x.
  std::vector<int> r(cam_points.size(), 1);
  for (std::size_t i = 0; i < cam_points.size(); ++i) {
    double z = cam_points.points[i].z;
    if (z <= 0.0) continue;
    r[i] = std::max(1, static_cast<int>(std::lround(0.85 * spacing * k.fx / z)));
  }
  return r;
}

}  // namespace detail

/// Render the posed model as a z-buffered splat depth map plus its exact
/// footprint mask. splat_radius <= 0 selects a per-point radius derived from
/// the model's median nearest-neighbor spacing.
inline RenderResult render_depth(const ObjectModel& model,
                                 const RigidTransform& pose,
                                 const CameraIntrinsics& k,
                                 int splat_radius = 0,
                                 double spacing_hint = 0.0) {
  require(!model.points.empty(), ErrorCode::empty_model, "render_depth: empty model");
  PointCloud cam = apply(pose, model.points);
  double spacing = splat_radius > 0
                       ? 0.0
                       : (spacing_hint > 0.0 ? spacing_hint
                                             : detail::median_nn_spacing(model.points));
  return render_points(cam, k, detail::harness_radii(cam, k, spacing, splat_radius));
}

/// Ground-truth supervision: every point that survives the z-buffer at its
/// own center pixel in BOTH views contributes its continuous pixel pair.
/// Subsampled to `capacity` with the injected seed when necessary.
inline MatchSupervision generate_gt_matches(const RenderResult& render_a,
                                            const RenderResult& render_q,
                                            std::size_t capacity,
                                            std::uint64_t seed) {
  require(render_a.proj_u.size() == render_q.proj_u.size(),
          ErrorCode::dimension_mismatch,
          "generate_gt_matches: renders cover different point counts");
  auto visible_at = [](const RenderResult& r, std::size_t i, int& u, int& v) {
    double pu = r.proj_u[i], pv = r.proj_v[i];
    if (!std::isfinite(pu) || !std::isfinite(pv)) return false;
    u = static_cast<int>(std::lround(pu));
    v = static_cast<int>(std::lround(pv));
    if (!r.depth.in_bounds(u, v)) return false;
    return r.owner[static_cast<std::size_t>(v) * r.depth.width + u] ==
           static_cast<std::int32_t>(i);
  };

  MatchSupervision sup;
  for (std::size_t i = 0; i < render_a.proj_u.size(); ++i) {
    int ua, va, uq, vq;
    if (!visible_at(render_a, i, ua, va) || !visible_at(render_q, i, uq, vq))
      continue;
    sup.pairs.push_back(
        {render_a.proj_u[i], render_a.proj_v[i], render_q.proj_u[i], render_q.proj_v[i]});
  }
  require(!sup.pairs.empty(), ErrorCode::no_covisible_points,
          "generate_gt_matches: no point visible in both views");
  if (capacity > 0 && sup.pairs.size() > capacity) {
    Rng rng(seed);
    MatchSupervision kept;
    for (std::size_t i :
         rng.sample_without_replacement(sup.pairs.size(), capacity))
      kept.pairs.push_back(sup.pairs[i]);
    sup = std::move(kept);
  }
  return sup;
}

/// Per-pixel descriptor synthesis. Each 3D point carries a fixed random unit
/// descriptor; object pixels receive their owning point's descriptor plus
/// renormalized isotropic noise, an `outlier_fraction` of them a fresh random
/// descriptor, and background pixels random descriptors.
inline std::pair<FeatureMap, FeatureMap> synth_feature_maps(
    const RenderResult& render_a, const RenderResult& render_q,
    std::size_t point_count, int descriptor_dim, double noise_sigma,
    double outlier_fraction, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<double>> point_desc(point_count);
  for (auto& d : point_desc) d = rng.unit_vector(descriptor_dim);

  auto fill = [&](const RenderResult& render) {
    FeatureMap fmap(render.depth.height, render.depth.width, descriptor_dim);
    for (int v = 0; v < fmap.height; ++v) {
      for (int u = 0; u < fmap.width; ++u) {
        auto dst = fmap.at(u, v);
        std::int32_t owner =
            render.owner[static_cast<std::size_t>(v) * fmap.width + u];
        if (owner >= 0) {
          if (outlier_fraction > 0.0 && rng.uniform() < outlier_fraction) {
            auto d = rng.unit_vector(descriptor_dim);
            std::copy(d.begin(), d.end(), dst.begin());
            continue;
          }
          const auto& base = point_desc[static_cast<std::size_t>(owner)];
          if (noise_sigma > 0.0) {
            double n2 = 0.0;
            for (int c = 0; c < descriptor_dim; ++c) {
              dst[c] = base[c] + rng.normal(0.0, noise_sigma);
              n2 += dst[c] * dst[c];
            }
            double inv = n2 > 1e-12 ? 1.0 / std::sqrt(n2) : 0.0;
            if (inv == 0.0) {
              auto d = rng.unit_vector(descriptor_dim);
              std::copy(d.begin(), d.end(), dst.begin());
            } else {
              for (int c = 0; c < descriptor_dim; ++c) dst[c] *= inv;
            }
          } else {
            std::copy(base.begin(), base.end(), dst.begin());
          }
        } else {
          auto d = rng.unit_vector(descriptor_dim);
          std::copy(d.begin(), d.end(), dst.begin());
        }
      }
    }
    return fmap;
  };

  FeatureMap fa = fill(render_a);
  FeatureMap fq = fill(render_q);
  return {std::move(fa), std::move(fq)};
}

namespace detail {

inline RigidTransform sample_object_pose(Rng& rng) {
  Mat3 rot = rng.rotation();
  Vec3 t{rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05),
         rng.uniform(0.50, 0.62)};
  return {rot, t};
}

/// Query pose: a bounded rotation away from the anchor pose (5..45 degrees,
/// uniform axis) with an independently sampled translation, so the two views
/// always share visible surface while absolute orientations stay uniform.
inline RigidTransform sample_query_pose(Rng& rng, const RigidTransform& pose_a) {
  Vec3 axis = rng.unit_vec3();
  double angle = rng.uniform(5.0, 45.0) * (3.14159265358979323846 / 180.0);
  Mat3 rot = rotation_about_axis(axis, angle) * pose_a.rotation;
  Vec3 t{rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05),
         rng.uniform(0.50, 0.62)};
  return {rot, t};
}

/// Splat distractor geometry into an existing render (depth + owner id -2),
/// then rebuild the mask as the pixels still owned by the object.
inline void add_distractors(RenderResult& render, const CameraIntrinsics& k,
                            const Vec3& object_center, int count,
                            double object_scale, Rng& rng) {
  for (int d = 0; d < count; ++d) {
    ObjectShape shape = (d % 2 == 0) ? ObjectShape::sphere : ObjectShape::box;
    double scale = 0.4 * object_scale * rng.uniform(0.8, 1.3);
    ObjectModel prim = sample_object(shape, scale, 1500, rng.next_u64());
    double angle = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
    double radius = rng.uniform(0.10, 0.20);
    Vec3 center = object_center + Vec3{radius * std::cos(angle),
                                       radius * std::sin(angle),
                                       rng.uniform(0.08, 0.25)};
    RigidTransform pose{rng.rotation(), center};
    PointCloud cam = apply(pose, prim.points);
    double spacing = median_nn_spacing(prim.points);
    auto radii = harness_radii(cam, k, spacing, 0);
    for (std::size_t i = 0; i < cam.points.size(); ++i) {
      const Vec3& p = cam.points[i];
      if (p.z <= 0.0) continue;
      int cu = static_cast<int>(std::lround(k.fx * p.x / p.z + k.cx));
      int cv = static_cast<int>(std::lround(k.fy * p.y / p.z + k.cy));
      bool touched = false;
      splat_disk(render.depth, render.zkey, render.owner, cu, cv, radii[i], p.z,
                 cone_slope(p.z, k.fx), -2, touched);
    }
  }
  for (int v = 0; v < render.depth.height; ++v)
    for (int u = 0; u < render.depth.width; ++u)
      render.mask.set(
          u, v,
          render.owner[static_cast<std::size_t>(v) * render.depth.width + u] >= 0);
}

inline void add_depth_noise(DepthMap& depth, double sigma, Rng& rng) {
  if (sigma <= 0.0) return;
  for (double& z : depth.values) {
    if (z <= 0.0) continue;
    z = std::max(1e-3, z + rng.normal(0.0, sigma));
  }
}

}  // namespace detail

/// Generate a complete scene pair. Identical specs (including seed) produce
/// bit-identical results.
inline ScenePair generate_scene_pair(const SyntheticSceneSpec& spec) {
  spec.validate();
  ScenePair out;
  out.intrinsics_a = spec.intrinsics();
  out.intrinsics_q = spec.intrinsics();

  out.model = sample_object(spec.object_shape, spec.object_scale,
                            spec.model_points, mix_seed(spec.seed, 0));

  Rng pose_rng(mix_seed(spec.seed, 1));
  out.object_pose_a =
      spec.pose_a ? *spec.pose_a : detail::sample_object_pose(pose_rng);
  out.object_pose_q = spec.pose_q
                          ? *spec.pose_q
                          : detail::sample_query_pose(pose_rng, out.object_pose_a);
  out.gt_pose = compose(out.object_pose_q, invert(out.object_pose_a));

  double spacing = spec.splat_radius > 0
                       ? 0.0
                       : detail::median_nn_spacing(out.model.points);
  RenderResult render_a = render_depth(out.model, out.object_pose_a,
                                       out.intrinsics_a, spec.splat_radius, spacing);
  RenderResult render_q = render_depth(out.model, out.object_pose_q,
                                       out.intrinsics_q, spec.splat_radius, spacing);

  if (spec.distractor_count > 0) {
    Rng distract_rng(mix_seed(spec.seed, 2));
    detail::add_distractors(render_a, out.intrinsics_a,
                            out.object_pose_a.translation,
                            spec.distractor_count, spec.object_scale,
                            distract_rng);
    detail::add_distractors(render_q, out.intrinsics_q,
                            out.object_pose_q.translation,
                            spec.distractor_count, spec.object_scale,
                            distract_rng);
  }

  out.gt_matches = generate_gt_matches(render_a, render_q, spec.match_capacity,
                                       mix_seed(spec.seed, 3));

  auto fmaps = synth_feature_maps(render_a, render_q, out.model.points.size(),
                                  spec.descriptor_dim,
                                  spec.descriptor_noise_sigma,
                                  spec.outlier_fraction, mix_seed(spec.seed, 4));
  out.fmap_a = std::move(fmaps.first);
  out.fmap_q = std::move(fmaps.second);

  Rng noise_rng(mix_seed(spec.seed, 5));
  detail::add_depth_noise(render_a.depth, spec.depth_noise_sigma, noise_rng);
  detail::add_depth_noise(render_q.depth, spec.depth_noise_sigma, noise_rng);

  out.depth_a = std::move(render_a.depth);
  out.depth_q = std::move(render_q.depth);
  out.mask_a = std::move(render_a.mask);
  out.mask_q = std::move(render_q.mask);
  return out;
}

/// Lift ground-truth supervision to paired 3D points: depth is looked up at
/// the rounded pixel, backprojection uses the continuous coordinates. Pairs
/// with invalid depth in either view are dropped.
inline CorrespondenceSet3D lift_supervision(const MatchSupervision& sup,
                                            const DepthMap& depth_a,
                                            const DepthMap& depth_q,
                                            const CameraIntrinsics& k_a,
                                            const CameraIntrinsics& k_q) {
  CorrespondenceSet3D out;
  for (const auto& p : sup.pairs) {
    int ua = static_cast<int>(std::lround(p.u_a));
    int va = static_cast<int>(std::lround(p.v_a));
    int uq = static_cast<int>(std::lround(p.u_q));
    int vq = static_cast<int>(std::lround(p.v_q));
    if (!depth_a.in_bounds(ua, va) || !depth_q.in_bounds(uq, vq)) continue;
    double da = depth_a.at(ua, va), dq = depth_q.at(uq, vq);
    if (da <= 0.0 || dq <= 0.0) continue;
    out.src.points.push_back(backproject_pixel(k_a, p.u_a, p.v_a, da));
    out.dst.points.push_back(backproject_pixel(k_q, p.u_q, p.v_q, dq));
  }
  require(!out.src.points.empty(), ErrorCode::all_invalid_depth,
          "lift_supervision: every pair had invalid depth");
  return out;
}

}  // namespace relpose
