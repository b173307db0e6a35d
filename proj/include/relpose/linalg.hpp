#pragma once

#include <array>
#include <cmath>

#include "relpose/errors.hpp"

namespace relpose {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  Vec3& operator+=(const Vec3& o) {
    x += o.x; y += o.y; z += o.z;
    return *this;
  }
  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  double squared_norm() const { return dot(*this); }
  double norm() const { return std::sqrt(squared_norm()); }
  Vec3 normalized() const {
    double n = norm();
    require(n > 0.0, ErrorCode::zero_vector, "cannot normalize zero vector");
    return *this / n;
  }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

/// Row-major 3x3 matrix.
struct Mat3 {
  std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

  static Mat3 identity() { return Mat3{}; }
  static Mat3 zero() { return Mat3{{0, 0, 0, 0, 0, 0, 0, 0, 0}}; }

  double& operator()(int r, int c) { return m[r * 3 + c]; }
  double operator()(int r, int c) const { return m[r * 3 + c]; }

  Mat3 transpose() const {
    Mat3 t;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) t(r, c) = (*this)(c, r);
    return t;
  }

  Mat3 operator*(const Mat3& o) const {
    Mat3 out = Mat3::zero();
    for (int r = 0; r < 3; ++r)
      for (int k = 0; k < 3; ++k) {
        double a = (*this)(r, k);
        for (int c = 0; c < 3; ++c) out(r, c) += a * o(k, c);
      }
    return out;
  }

  Vec3 operator*(const Vec3& v) const {
    return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
            m[3] * v.x + m[4] * v.y + m[5] * v.z,
            m[6] * v.x + m[7] * v.y + m[8] * v.z};
  }

  Mat3 operator+(const Mat3& o) const {
    Mat3 out;
    for (int i = 0; i < 9; ++i) out.m[i] = m[i] + o.m[i];
    return out;
  }

  Mat3 operator*(double s) const {
    Mat3 out;
    for (int i = 0; i < 9; ++i) out.m[i] = m[i] * s;
    return out;
  }

  double det() const {
    return m[0] * (m[4] * m[8] - m[5] * m[7]) -
           m[1] * (m[3] * m[8] - m[5] * m[6]) +
           m[2] * (m[3] * m[7] - m[4] * m[6]);
  }

  double max_abs_diff(const Mat3& o) const {
    double d = 0.0;
    for (int i = 0; i < 9; ++i) d = std::max(d, std::abs(m[i] - o.m[i]));
    return d;
  }
};

/// Rodrigues rotation about a unit axis.
inline Mat3 rotation_about_axis(const Vec3& axis, double angle) {
  Vec3 u = axis.normalized();
  double c = std::cos(angle), s = std::sin(angle), t = 1.0 - c;
  Mat3 r;
  r(0, 0) = c + u.x * u.x * t;
  r(0, 1) = u.x * u.y * t - u.z * s;
  r(0, 2) = u.x * u.z * t + u.y * s;
  r(1, 0) = u.y * u.x * t + u.z * s;
  r(1, 1) = c + u.y * u.y * t;
  r(1, 2) = u.y * u.z * t - u.x * s;
  r(2, 0) = u.z * u.x * t - u.y * s;
  r(2, 1) = u.z * u.y * t + u.x * s;
  r(2, 2) = c + u.z * u.z * t;
  return r;
}

inline Mat3 quaternion_to_matrix(double w, double x, double y, double z) {
  double n = std::sqrt(w * w + x * x + y * y + z * z);
  w /= n; x /= n; y /= n; z /= n;
  Mat3 r;
  r(0, 0) = 1 - 2 * (y * y + z * z);
  r(0, 1) = 2 * (x * y - w * z);
  r(0, 2) = 2 * (x * z + w * y);
  r(1, 0) = 2 * (x * y + w * z);
  r(1, 1) = 1 - 2 * (x * x + z * z);
  r(1, 2) = 2 * (y * z - w * x);
  r(2, 0) = 2 * (x * z - w * y);
  r(2, 1) = 2 * (y * z + w * x);
  r(2, 2) = 1 - 2 * (x * x + y * y);
  return r;
}

/// Geodesic angle of a rotation matrix, accurate near 0 and pi.
inline double rotation_angle(const Mat3& r) {
  double sx = r(2, 1) - r(1, 2);
  double sy = r(0, 2) - r(2, 0);
  double sz = r(1, 0) - r(0, 1);
  double s = 0.5 * std::sqrt(sx * sx + sy * sy + sz * sz);
  double c = 0.5 * (r(0, 0) + r(1, 1) + r(2, 2) - 1.0);
  return std::atan2(s, c);
}

/// Angle between two rotations in radians.
inline double rotation_distance(const Mat3& a, const Mat3& b) {
  return rotation_angle(a.transpose() * b);
}

namespace detail {

// One-sided Jacobi SVD of a 3x3 matrix: a = u * diag(sigma) * v^T with
// sigma sorted descending and u, v orthonormal (up to column signs).
inline void svd3(const Mat3& a, Mat3& u, Vec3& sigma, Mat3& v) {
  Mat3 b = a;
  v = Mat3::identity();

  constexpr int kMaxSweeps = 60;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < 2; ++p) {
      for (int q = p + 1; q < 3; ++q) {
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (int k = 0; k < 3; ++k) {
          alpha += b(k, p) * b(k, p);
          beta += b(k, q) * b(k, q);
          gamma += b(k, p) * b(k, q);
        }
        off = std::max(off, std::abs(gamma));
        if (std::abs(gamma) <= 1e-300 ||
            std::abs(gamma) <= 1e-16 * std::sqrt(alpha * beta))
          continue;
        double zeta = (beta - alpha) / (2.0 * gamma);
        double t = std::copysign(1.0, zeta) /
                   (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        double c = 1.0 / std::sqrt(1.0 + t * t);
        double s = c * t;
        for (int k = 0; k < 3; ++k) {
          double bp = b(k, p), bq = b(k, q);
          b(k, p) = c * bp - s * bq;
          b(k, q) = s * bp + c * bq;
          double vp = v(k, p), vq = v(k, q);
          v(k, p) = c * vp - s * vq;
          v(k, q) = s * vp + c * vq;
        }
      }
    }
    if (off < 1e-300) break;
  }

  std::array<double, 3> sig{};
  for (int c = 0; c < 3; ++c) {
    double n = 0.0;
    for (int k = 0; k < 3; ++k) n += b(k, c) * b(k, c);
    sig[c] = std::sqrt(n);
  }

  // Sort singular values descending, permuting columns of b and v.
  std::array<int, 3> order{0, 1, 2};
  for (int i = 0; i < 2; ++i)
    for (int j = i + 1; j < 3; ++j)
      if (sig[order[j]] > sig[order[i]]) std::swap(order[i], order[j]);

  Mat3 bs, vs;
  Vec3 sv{sig[order[0]], sig[order[1]], sig[order[2]]};
  for (int c = 0; c < 3; ++c)
    for (int k = 0; k < 3; ++k) {
      bs(k, c) = b(k, order[c]);
      vs(k, c) = v(k, order[c]);
    }

  // Left vectors: normalized columns; complete rank-deficient columns
  // via cross products so u stays orthonormal.
  u = Mat3::zero();
  std::array<Vec3, 3> ucol;
  double scale = std::max(sv.x, 1e-300);
  for (int c = 0; c < 3; ++c) {
    Vec3 col{bs(0, c), bs(1, c), bs(2, c)};
    double n = (c == 0 ? sv.x : (c == 1 ? sv.y : sv.z));
    if (n > 1e-14 * scale) {
      ucol[c] = col / n;
    } else if (c == 1) {
      // Any unit vector orthogonal to ucol[0].
      Vec3 ref = std::abs(ucol[0].x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
      ucol[1] = ucol[0].cross(ref).normalized();
    } else if (c == 2) {
      ucol[2] = ucol[0].cross(ucol[1]);
    } else {
      ucol[0] = Vec3{1, 0, 0};
    }
  }
  for (int c = 0; c < 3; ++c) {
    u(0, c) = ucol[c].x;
    u(1, c) = ucol[c].y;
    u(2, c) = ucol[c].z;
  }
  sigma = sv;
  v = vs;
}

}  // namespace detail

}  // namespace relpose
