#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "relpose/errors.hpp"
#include "relpose/linalg.hpp"

namespace relpose {

/// Pinhole camera. Pixel coordinates are continuous and (u, v) refers to
/// pixel centers at integer coordinates.
struct CameraIntrinsics {
  double fx = 0.0, fy = 0.0;
  double cx = 0.0, cy = 0.0;
  int width = 0, height = 0;

  void validate() const {
    require(fx > 0.0 && fy > 0.0, ErrorCode::invalid_argument,
            "intrinsics: focal lengths must be positive");
    require(width > 0 && height > 0, ErrorCode::invalid_argument,
            "intrinsics: image size must be positive");
    require(cx >= 0.0 && cx < width, ErrorCode::invalid_argument,
            "intrinsics: cx outside image");
    require(cy >= 0.0 && cy < height, ErrorCode::invalid_argument,
            "intrinsics: cy outside image");
  }

  bool contains(double u, double v) const {
    return u >= 0.0 && u < width && v >= 0.0 && v < height;
  }
};

/// Per-pixel depth in meters; 0 marks invalid/missing.
struct DepthMap {
  int width = 0, height = 0;
  std::vector<double> values;

  DepthMap() = default;
  DepthMap(int w, int h) : width(w), height(h), values(static_cast<std::size_t>(w) * h, 0.0) {}

  double at(int u, int v) const { return values[static_cast<std::size_t>(v) * width + u]; }
  double& at(int u, int v) { return values[static_cast<std::size_t>(v) * width + u]; }
  bool in_bounds(int u, int v) const { return u >= 0 && u < width && v >= 0 && v < height; }
};

struct Mask {
  int width = 0, height = 0;
  std::vector<std::uint8_t> values;

  Mask() = default;
  Mask(int w, int h) : width(w), height(h), values(static_cast<std::size_t>(w) * h, 0) {}

  bool at(int u, int v) const { return values[static_cast<std::size_t>(v) * width + u] != 0; }
  void set(int u, int v, bool on) { values[static_cast<std::size_t>(v) * width + u] = on ? 1 : 0; }
  std::size_t count() const {
    std::size_t n = 0;
    for (auto x : values) n += (x != 0);
    return n;
  }
};

struct RigidTransform {
  Mat3 rotation = Mat3::identity();
  Vec3 translation{};

  static RigidTransform identity() { return {}; }

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }

  /// Orthonormality and det(R)=+1 within tol.
  bool is_valid(double tol = 1e-9) const {
    Mat3 rtr = rotation.transpose() * rotation;
    return rtr.max_abs_diff(Mat3::identity()) <= tol &&
           std::abs(rotation.det() - 1.0) <= tol;
  }

  void validate(double tol = 1e-9) const {
    require(is_valid(tol), ErrorCode::invariant_violation,
            "rigid transform: rotation not orthonormal with det +1");
  }
};

struct PointCloud {
  std::vector<Vec3> points;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

struct BoundingBox {
  double u_min = 0.0, v_min = 0.0, u_max = 0.0, v_max = 0.0;

  double width() const { return u_max - u_min; }
  double height() const { return v_max - v_min; }
};

/// Lift pixel (u, v) with depth d (meters) to a camera-frame 3D point.
inline Vec3 backproject_pixel(const CameraIntrinsics& k, double u, double v,
                              double d) {
  require(d > 0.0, ErrorCode::invalid_depth,
          "backproject: depth must be positive, got " + std::to_string(d));
  require(k.contains(u, v), ErrorCode::out_of_bounds,
          "backproject: pixel (" + std::to_string(u) + ", " + std::to_string(v) +
              ") outside image");
  return {(u - k.cx) * d / k.fx, (v - k.cy) * d / k.fy, d};
}

struct PixelDepth {
  double u = 0.0, v = 0.0, d = 0.0;
};

/// Project a camera-frame point to continuous pixel coordinates plus depth.
/// Points may project outside the image rectangle.
inline PixelDepth project_point(const CameraIntrinsics& k, const Vec3& p) {
  require(p.z > 0.0, ErrorCode::behind_camera,
          "project: point behind camera (z = " + std::to_string(p.z) + ")");
  return {k.fx * p.x / p.z + k.cx, k.fy * p.y / p.z + k.cy, p.z};
}

/// compose(a, b) maps x to a(b(x)).
inline RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  return {a.rotation * b.rotation, a.rotation * b.translation + a.translation};
}

inline RigidTransform invert(const RigidTransform& t) {
  Mat3 rt = t.rotation.transpose();
  return {rt, rt * (t.translation * -1.0)};
}

inline PointCloud apply(const RigidTransform& t, const PointCloud& pc) {
  PointCloud out;
  out.points.reserve(pc.size());
  for (const Vec3& p : pc.points) out.points.push_back(t.apply(p));
  return out;
}

struct SquaredBox {
  BoundingBox box;
  double scale = 0.0;  // target_side / square_side
};

/// Smallest square containing the box, centered on the box center, shifted
/// (never shrunk) to stay inside the [0,w]x[0,h] rectangle.
inline SquaredBox square_and_resize_box(const BoundingBox& box, int image_w,
                                        int image_h, double target_side) {
  require(box.u_min < box.u_max && box.v_min < box.v_max,
          ErrorCode::invalid_argument, "box: degenerate extent");
  require(box.u_max > 0 && box.v_max > 0 && box.u_min < image_w &&
              box.v_min < image_h,
          ErrorCode::invalid_argument, "box: does not intersect image");
  require(target_side > 0, ErrorCode::invalid_argument,
          "box: target side must be positive");

  double side = std::max(box.width(), box.height());
  if (side > std::min(image_w, image_h)) {
    fail(ErrorCode::box_too_large,
         "box: square side " + std::to_string(side) + " exceeds image min dim " +
             std::to_string(std::min(image_w, image_h)));
  }
  double uc = 0.5 * (box.u_min + box.u_max);
  double vc = 0.5 * (box.v_min + box.v_max);
  double u0 = std::clamp(uc - 0.5 * side, 0.0, image_w - side);
  double v0 = std::clamp(vc - 0.5 * side, 0.0, image_h - side);
  return {{u0, v0, u0 + side, v0 + side}, target_side / side};
}

}  // namespace relpose
