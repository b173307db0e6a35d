#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "relpose/geometry.hpp"

namespace relpose {

/// Z-buffered point-splat render of a camera-frame point cloud. `owner`
/// stores, per pixel, the index of the point that won the z-buffer (-1 for
/// background); `proj_u`/`proj_v` hold each point's continuous projection
/// (NaN when behind the camera). `zkey` is the cone-splat comparison buffer
/// (see splat_disk); `depth` always holds the winning point's true z.
struct RenderResult {
  DepthMap depth;
  Mask mask;
  std::vector<std::int32_t> owner;
  std::vector<double> zkey;
  std::vector<double> proj_u, proj_v;
  std::size_t rendered_points = 0;  // points that splatted at least one pixel
};

namespace detail {

/// Median nearest-neighbor spacing of a point set. Exact up to 4096 points;
/// above that the query side is stride-subsampled (deterministic).
inline double median_nn_spacing(const PointCloud& pc) {
  const std::size_t n = pc.size();
  if (n < 2) return 0.0;
  const std::size_t max_queries = 1024;
  const std::size_t stride = n <= max_queries ? 1 : (n + max_queries - 1) / max_queries;
  std::vector<double> nn;
  nn.reserve(n / stride + 1);
  for (std::size_t i = 0; i < n; i += stride) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double d2 = (pc.points[i] - pc.points[j]).squared_norm();
      if (d2 < best) best = d2;
    }
    nn.push_back(std::sqrt(best));
  }
  std::nth_element(nn.begin(), nn.begin() + nn.size() / 2, nn.end());
  return nn[nn.size() / 2];
}

/// Cone-splat pixel update. Splats compete on z + slope * pixel_distance
/// rather than raw z, so overlapping splats from one locally flat surface
/// resolve to the nearest projection instead of z-fighting, while genuinely
/// nearer surfaces still win (their whole cone lies below). The depth buffer
/// records the winner's true z.
inline void splat_disk(DepthMap& depth, std::vector<double>& zkey,
                       std::vector<std::int32_t>& owner, int cu, int cv,
                       int radius, double z, double slope, std::int32_t id,
                       bool& touched) {
  for (int dv = -radius; dv <= radius; ++dv) {
    for (int du = -radius; du <= radius; ++du) {
      if (du * du + dv * dv > radius * radius) continue;
      int u = cu + du, v = cv + dv;
      if (!depth.in_bounds(u, v)) continue;
      std::size_t idx = static_cast<std::size_t>(v) * depth.width + u;
      double key = z + slope * std::sqrt(static_cast<double>(du * du + dv * dv));
      if (owner[idx] == -1 || key < zkey[idx]) {
        zkey[idx] = key;
        depth.at(u, v) = z;
        owner[idx] = id;
        touched = true;
      }
    }
  }
}

/// Cone slope in meters per pixel at depth z; kConeGamma pixels of lateral
/// offset cost one pixel-footprint of depth.
constexpr double kConeGamma = 2.0;

inline double cone_slope(double z, double fx) { return kConeGamma * z / fx; }

}  // namespace detail

/// Splat `cam_points` into a fresh buffer. `radii` gives the per-point disk
/// radius in pixels (size 1 broadcasts). Points behind the camera are
/// skipped. Raises out-of-frustum if nothing lands inside the image.
inline RenderResult render_points(const PointCloud& cam_points,
                                  const CameraIntrinsics& k,
                                  const std::vector<int>& radii) {
  k.validate();
  require(radii.size() == 1 || radii.size() == cam_points.size(),
          ErrorCode::dimension_mismatch,
          "render_points: radii must broadcast or match point count");
  RenderResult r;
  r.depth = DepthMap(k.width, k.height);
  r.mask = Mask(k.width, k.height);
  r.owner.assign(static_cast<std::size_t>(k.width) * k.height, -1);
  r.zkey.assign(static_cast<std::size_t>(k.width) * k.height, 0.0);
  r.proj_u.assign(cam_points.size(), std::numeric_limits<double>::quiet_NaN());
  r.proj_v.assign(cam_points.size(), std::numeric_limits<double>::quiet_NaN());

  for (std::size_t i = 0; i < cam_points.size(); ++i) {
    const Vec3& p = cam_points.points[i];
    if (p.z <= 0.0) continue;
    double u = k.fx * p.x / p.z + k.cx;
    double v = k.fy * p.y / p.z + k.cy;
    r.proj_u[i] = u;
    r.proj_v[i] = v;
    int cu = static_cast<int>(std::lround(u));
    int cv = static_cast<int>(std::lround(v));
    int radius = radii.size() == 1 ? radii[0] : radii[i];
    bool touched = false;
    detail::splat_disk(r.depth, r.zkey, r.owner, cu, cv, radius, p.z,
                       detail::cone_slope(p.z, k.fx), static_cast<std::int32_t>(i),
                       touched);
    r.rendered_points += touched;
  }
  require(r.rendered_points > 0, ErrorCode::out_of_frustum,
          "render_points: no point landed inside the image");
  for (int v = 0; v < k.height; ++v)
    for (int u = 0; u < k.width; ++u)
      r.mask.set(u, v, r.depth.at(u, v) > 0.0);
  return r;
}

}  // namespace relpose
