#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <tuple>
#include <vector>

#include "relpose/geometry.hpp"
#include "relpose/parallel.hpp"
#include "relpose/rng.hpp"

namespace relpose {

/// Index-paired 3D correspondences (src from the anchor, dst from the query).
struct CorrespondenceSet3D {
  PointCloud src, dst;

  std::size_t size() const { return src.size(); }

  void validate() const {
    require(src.size() == dst.size(), ErrorCode::dimension_mismatch,
            "correspondences: src/dst lengths differ");
  }
};

/// Symmetric binary length-compatibility matrix with unit diagonal.
struct CompatibilityMatrix {
  std::size_t n = 0;
  std::vector<std::uint8_t> values;

  explicit CompatibilityMatrix(std::size_t size = 0)
      : n(size), values(size * size, 0) {
    for (std::size_t i = 0; i < n; ++i) values[i * n + i] = 1;
  }

  bool at(std::size_t i, std::size_t j) const { return values[i * n + j] != 0; }
  void set(std::size_t i, std::size_t j, bool on) {
    values[i * n + j] = on ? 1 : 0;
    values[j * n + i] = on ? 1 : 0;
  }
};

enum class RegistrationMethod { spatial_consistency, ransac };

struct RegistrationParams {
  double beta = 0.010;             // pairwise length tolerance, meters
  double inlier_threshold = 0.010; // residual threshold, meters
  int max_seeds = 32;
  int local_rounds = 3;
  std::uint64_t seed = 0;
  RegistrationMethod method = RegistrationMethod::spatial_consistency;
  int ransac_iterations = 512;     // only used by the ransac fallback
  int threads = 1;

  void validate() const {
    require(beta > 0.0, ErrorCode::invalid_argument,
            "registration params: beta must be positive");
    require(inlier_threshold > 0.0, ErrorCode::invalid_argument,
            "registration params: inlier threshold must be positive");
    require(max_seeds > 0 && local_rounds >= 0, ErrorCode::invalid_argument,
            "registration params: bad seed/round counts");
  }
};

struct PoseEstimate {
  RigidTransform transform;   // maps anchor-frame points onto query-frame
  std::vector<std::size_t> inliers;
  double rmse = 0.0;          // over inliers
};

/// Weighted closed-form rigid alignment: argmin_T sum w_i |T(src_i)-dst_i|^2.
/// Rotation from the SVD of the weighted cross-covariance with determinant
/// sign correction; no scale.
inline RigidTransform kabsch(const PointCloud& src, const PointCloud& dst,
                             const std::vector<double>* weights = nullptr) {
  require(src.size() == dst.size(), ErrorCode::dimension_mismatch,
          "kabsch: src/dst lengths differ");
  const std::size_t n = src.size();
  require(n >= 3, ErrorCode::degenerate_configuration,
          "kabsch: need at least 3 correspondences, got " + std::to_string(n));
  if (weights) {
    require(weights->size() == n, ErrorCode::dimension_mismatch,
            "kabsch: weight count differs from point count");
    for (double w : *weights)
      require(w >= 0.0, ErrorCode::invalid_argument,
              "kabsch: weights must be nonnegative");
  }

  double wsum = 0.0;
  Vec3 cs{}, cd{};
  for (std::size_t i = 0; i < n; ++i) {
    double w = weights ? (*weights)[i] : 1.0;
    wsum += w;
    cs += src.points[i] * w;
    cd += dst.points[i] * w;
  }
  require(wsum > 0.0, ErrorCode::invalid_argument, "kabsch: zero total weight");
  cs = cs / wsum;
  cd = cd / wsum;

  Mat3 h = Mat3::zero();
  for (std::size_t i = 0; i < n; ++i) {
    double w = weights ? (*weights)[i] : 1.0;
    if (w == 0.0) continue;
    Vec3 s = src.points[i] - cs;
    Vec3 d = dst.points[i] - cd;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c)
        h(r, c) += w * (r == 0 ? s.x : r == 1 ? s.y : s.z) *
                   (c == 0 ? d.x : c == 1 ? d.y : d.z);
  }

  Mat3 u, v;
  Vec3 sigma;
  detail::svd3(h, u, sigma, v);
  require(sigma.x > 0.0 && sigma.y > 1e-12 * sigma.x,
          ErrorCode::degenerate_configuration,
          "kabsch: rank-deficient covariance (collinear points)");

  Mat3 d = Mat3::identity();
  d(2, 2) = (v * u.transpose()).det() < 0.0 ? -1.0 : 1.0;
  Mat3 rot = v * d * u.transpose();
  return {rot, cd - rot * cs};
}

/// Entry (i, j) is 1 iff the pairwise source and destination distances agree
/// within beta. Rigid motions preserve lengths, so inlier pairs are mutually
/// compatible.
inline CompatibilityMatrix build_spatial_compatibility(
    const CorrespondenceSet3D& corr, double beta) {
  corr.validate();
  const std::size_t n = corr.size();
  require(n >= 2, ErrorCode::invalid_argument,
          "build_spatial_compatibility: need at least 2 correspondences");
  CompatibilityMatrix m(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double ls = (corr.src.points[i] - corr.src.points[j]).norm();
      double ld = (corr.dst.points[i] - corr.dst.points[j]).norm();
      m.set(i, j, std::abs(ls - ld) <= beta);
    }
  }
  return m;
}

namespace detail {

struct Hypothesis {
  bool valid = false;
  RigidTransform transform;
  std::vector<std::size_t> inliers;
  double rmse = 0.0;
};

inline std::vector<std::size_t> inliers_under(const CorrespondenceSet3D& corr,
                                              const RigidTransform& t,
                                              double threshold) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < corr.size(); ++i) {
    if ((t.apply(corr.src.points[i]) - corr.dst.points[i]).norm() <= threshold)
      out.push_back(i);
  }
  return out;
}

inline double rmse_over(const CorrespondenceSet3D& corr,
                        const RigidTransform& t,
                        const std::vector<std::size_t>& idx) {
  if (idx.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i : idx)
    s += (t.apply(corr.src.points[i]) - corr.dst.points[i]).squared_norm();
  return std::sqrt(s / static_cast<double>(idx.size()));
}

inline std::optional<RigidTransform> try_kabsch(const CorrespondenceSet3D& corr,
                                                const std::vector<std::size_t>& idx) {
  if (idx.size() < 3) return std::nullopt;
  PointCloud s, d;
  s.points.reserve(idx.size());
  d.points.reserve(idx.size());
  for (std::size_t i : idx) {
    s.points.push_back(corr.src.points[i]);
    d.points.push_back(corr.dst.points[i]);
  }
  try {
    return kabsch(s, d);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::degenerate_configuration) return std::nullopt;
    throw;
  }
}

inline Hypothesis refine(const CorrespondenceSet3D& corr, Hypothesis best,
                         double threshold, int rounds) {
  for (int r = 0; r < rounds; ++r) {
    auto t = try_kabsch(corr, best.inliers);
    if (!t) break;
    auto inl = inliers_under(corr, *t, threshold);
    if (inl.size() < 3) break;
    best.transform = *t;
    best.inliers = std::move(inl);
  }
  best.rmse = rmse_over(corr, best.transform, best.inliers);
  return best;
}

}  // namespace detail

/// Spatial-consistency registration: rank correspondences by compatibility
/// degree, grow a consensus set around each of the top seeds, solve kabsch
/// per seed, keep the best-inlier hypothesis and refine it on its inliers.
/// A plain RANSAC + kabsch fallback is selectable for ablation.
inline PoseEstimate register_correspondences(const CorrespondenceSet3D& corr,
                                             const RegistrationParams& params) {
  corr.validate();
  params.validate();
  const std::size_t n = corr.size();
  require(n >= 3, ErrorCode::registration_failure,
          "register: need at least 3 correspondences, got " + std::to_string(n));

  detail::Hypothesis best;
  if (params.method == RegistrationMethod::spatial_consistency) {
    CompatibilityMatrix compat = build_spatial_compatibility(corr, params.beta);
    std::vector<std::size_t> degree(n, 0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) degree[i] += compat.at(i, j);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return degree[a] != degree[b] ? degree[a] > degree[b] : a < b;
    });
    const std::size_t n_seeds = std::min<std::size_t>(params.max_seeds, n);

    std::vector<detail::Hypothesis> hyp(n_seeds);
    parallel_for(static_cast<std::int64_t>(n_seeds), params.threads,
                 [&](std::int64_t s) {
                   std::size_t seed_idx = order[static_cast<std::size_t>(s)];
                   std::vector<std::size_t> members;
                   for (std::size_t j = 0; j < n; ++j)
                     if (compat.at(seed_idx, j)) members.push_back(j);
                   auto t = detail::try_kabsch(corr, members);
                   if (!t) return;
                   auto& h = hyp[static_cast<std::size_t>(s)];
                   h.transform = *t;
                   h.inliers = detail::inliers_under(corr, *t,
                                                     params.inlier_threshold);
                   h.rmse = detail::rmse_over(corr, *t, h.inliers);
                   h.valid = true;
                 });

    for (const auto& h : hyp) {
      if (!h.valid) continue;
      // Seed order already encodes the final tie-break: hypotheses are
      // scanned in seed-rank order, so strictly-better only.
      if (!best.valid || h.inliers.size() > best.inliers.size() ||
          (h.inliers.size() == best.inliers.size() && h.rmse < best.rmse)) {
        best = h;
      }
    }
  } else {
    Rng rng(params.seed);
    for (int it = 0; it < params.ransac_iterations; ++it) {
      std::size_t i0 = rng.uniform_index(n);
      std::size_t i1 = rng.uniform_index(n);
      std::size_t i2 = rng.uniform_index(n);
      if (i0 == i1 || i1 == i2 || i0 == i2) continue;
      auto t = detail::try_kabsch(corr, {i0, i1, i2});
      if (!t) continue;
      auto inl = detail::inliers_under(corr, *t, params.inlier_threshold);
      if (!best.valid || inl.size() > best.inliers.size()) {
        best.valid = true;
        best.transform = *t;
        best.inliers = std::move(inl);
      }
    }
    if (best.valid)
      best.rmse = detail::rmse_over(corr, best.transform, best.inliers);
  }

  require(best.valid && best.inliers.size() >= 3,
          ErrorCode::registration_failure,
          "register: best hypothesis has fewer than 3 inliers");
  best = detail::refine(corr, std::move(best), params.inlier_threshold,
                        params.local_rounds);
  return {best.transform, std::move(best.inliers), best.rmse};
}

}  // namespace relpose
