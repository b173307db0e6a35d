#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "relpose/geometry.hpp"
#include "relpose/parallel.hpp"

namespace relpose {

/// Dense per-pixel descriptor grid, row-major (v, u, channel).
struct FeatureMap {
  int height = 0, width = 0, dim = 0;
  std::vector<double> data;

  FeatureMap() = default;
  FeatureMap(int h, int w, int d)
      : height(h), width(w), dim(d),
        data(static_cast<std::size_t>(h) * w * d, 0.0) {}

  std::size_t index(int u, int v) const {
    return (static_cast<std::size_t>(v) * width + u) * dim;
  }
  std::span<const double> at(int u, int v) const {
    return {data.data() + index(u, v), static_cast<std::size_t>(dim)};
  }
  std::span<double> at(int u, int v) {
    return {data.data() + index(u, v), static_cast<std::size_t>(dim)};
  }
};

struct PixelCoord {
  int u = 0, v = 0;

  bool operator==(const PixelCoord&) const = default;
};

/// Row-major ordering key used for all deterministic tie-breaks.
inline std::int64_t row_major_key(const PixelCoord& c, int width) {
  return static_cast<std::int64_t>(c.v) * width + c.u;
}

/// Descriptors extracted under a mask, in row-major scan order.
struct FeatureList {
  int dim = 0;
  int source_width = 0;  // for row-major tie-break keys
  std::vector<PixelCoord> coords;
  std::vector<double> vectors;  // N x dim

  std::size_t size() const { return coords.size(); }
  std::span<const double> descriptor(std::size_t i) const {
    return {vectors.data() + i * dim, static_cast<std::size_t>(dim)};
  }
};

struct Match {
  PixelCoord a, q;
  double distance = 0.0;
};

struct MatchSet {
  std::vector<Match> pairs;
  std::size_t capacity = 0;
};

/// Inverted, normalised cosine similarity: (1 - cos(a, b)) / 2 in [0, 1].
inline double cosine_distance(std::span<const double> a,
                              std::span<const double> b) {
  require(a.size() == b.size(), ErrorCode::dimension_mismatch,
          "cosine_distance: descriptor dimensions differ");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  require(na > 0.0 && nb > 0.0, ErrorCode::zero_vector,
          "cosine_distance: zero-norm descriptor");
  double c = dot / (std::sqrt(na) * std::sqrt(nb));
  return std::clamp(0.5 * (1.0 - c), 0.0, 1.0);
}

/// One entry per mask-true pixel, row-major, descriptors copied unmodified.
inline FeatureList extract_masked_features(const FeatureMap& fmap,
                                           const Mask& mask) {
  require(fmap.width == mask.width && fmap.height == mask.height,
          ErrorCode::dimension_mismatch,
          "extract_masked_features: feature map and mask dimensions differ");
  FeatureList out;
  out.dim = fmap.dim;
  out.source_width = fmap.width;
  for (int v = 0; v < fmap.height; ++v) {
    for (int u = 0; u < fmap.width; ++u) {
      if (!mask.at(u, v)) continue;
      out.coords.push_back({u, v});
      auto d = fmap.at(u, v);
      out.vectors.insert(out.vectors.end(), d.begin(), d.end());
    }
  }
  require(!out.coords.empty(), ErrorCode::empty_mask,
          "extract_masked_features: mask selects no pixels");
  return out;
}

/// Anchor-to-query nearest-neighbor matching under cosine_distance.
/// Pairs with distance > mu_t are rejected; if more than `capacity` survive,
/// the lowest-distance pairs are kept. Ties break by row-major coord_A, then
/// coord_Q. With `mutual` set, only pairs that are also query-side nearest
/// neighbors survive.
inline MatchSet match_nearest_neighbor(const FeatureList& fa,
                                       const FeatureList& fq, double mu_t,
                                       std::size_t capacity,
                                       bool mutual = false, int threads = 1) {
  require(!fa.coords.empty() && !fq.coords.empty(), ErrorCode::invalid_argument,
          "match_nearest_neighbor: feature lists must be non-empty");
  require(fa.dim == fq.dim, ErrorCode::dimension_mismatch,
          "match_nearest_neighbor: descriptor dimensions differ");

  const std::size_t na = fa.size(), nq = fq.size();
  std::vector<std::size_t> best(na);
  std::vector<double> best_dist(na);
  parallel_for(static_cast<std::int64_t>(na), threads, [&](std::int64_t i) {
    auto da = fa.descriptor(static_cast<std::size_t>(i));
    std::size_t arg = 0;
    double dmin = cosine_distance(da, fq.descriptor(0));
    for (std::size_t j = 1; j < nq; ++j) {
      double d = cosine_distance(da, fq.descriptor(j));
      if (d < dmin ||
          (d == dmin && row_major_key(fq.coords[j], fq.source_width) <
                            row_major_key(fq.coords[arg], fq.source_width))) {
        dmin = d;
        arg = j;
      }
    }
    best[static_cast<std::size_t>(i)] = arg;
    best_dist[static_cast<std::size_t>(i)] = dmin;
  });

  std::vector<std::size_t> reverse_best;
  if (mutual) {
    reverse_best.resize(nq);
    parallel_for(static_cast<std::int64_t>(nq), threads, [&](std::int64_t j) {
      auto dq = fq.descriptor(static_cast<std::size_t>(j));
      std::size_t arg = 0;
      double dmin = cosine_distance(fa.descriptor(0), dq);
      for (std::size_t i = 1; i < na; ++i) {
        double d = cosine_distance(fa.descriptor(i), dq);
        if (d < dmin ||
            (d == dmin && row_major_key(fa.coords[i], fa.source_width) <
                              row_major_key(fa.coords[arg], fa.source_width))) {
          dmin = d;
          arg = i;
        }
      }
      reverse_best[static_cast<std::size_t>(j)] = arg;
    });
  }

  std::vector<Match> survivors;
  survivors.reserve(na);
  for (std::size_t i = 0; i < na; ++i) {
    if (best_dist[i] > mu_t) continue;
    if (mutual && reverse_best[best[i]] != i) continue;
    survivors.push_back({fa.coords[i], fq.coords[best[i]], best_dist[i]});
  }
  require(!survivors.empty(), ErrorCode::no_matches,
          "match_nearest_neighbor: all pairs rejected at mu_T = " +
              std::to_string(mu_t));

  auto order_key = [&](const Match& m) {
    return std::make_tuple(m.distance, row_major_key(m.a, fa.source_width),
                           row_major_key(m.q, fq.source_width));
  };
  if (survivors.size() > capacity) {
    std::sort(survivors.begin(), survivors.end(),
              [&](const Match& x, const Match& y) {
                return order_key(x) < order_key(y);
              });
    survivors.resize(capacity);
  }
  std::sort(survivors.begin(), survivors.end(),
            [&](const Match& x, const Match& y) {
              return std::make_pair(row_major_key(x.a, fa.source_width),
                                    row_major_key(x.q, fq.source_width)) <
                     std::make_pair(row_major_key(y.a, fa.source_width),
                                    row_major_key(y.q, fq.source_width));
            });
  return {std::move(survivors), capacity};
}

/// Backproject both ends of every match; pairs with invalid depth (0) in
/// either view are dropped. Output clouds are parallel and equal length.
inline std::pair<PointCloud, PointCloud> lift_matches_to_3d(
    const MatchSet& matches, const DepthMap& depth_a, const DepthMap& depth_q,
    const CameraIntrinsics& k_a, const CameraIntrinsics& k_q) {
  PointCloud pa, pq;
  pa.points.reserve(matches.pairs.size());
  pq.points.reserve(matches.pairs.size());
  for (const Match& m : matches.pairs) {
    require(depth_a.in_bounds(m.a.u, m.a.v) && depth_q.in_bounds(m.q.u, m.q.v),
            ErrorCode::out_of_bounds,
            "lift_matches_to_3d: match coordinate outside depth map");
    double da = depth_a.at(m.a.u, m.a.v);
    double dq = depth_q.at(m.q.u, m.q.v);
    if (da <= 0.0 || dq <= 0.0) continue;
    pa.points.push_back(backproject_pixel(k_a, m.a.u, m.a.v, da));
    pq.points.push_back(backproject_pixel(k_q, m.q.u, m.q.v, dq));
  }
  require(!pa.points.empty(), ErrorCode::all_invalid_depth,
          "lift_matches_to_3d: every match had invalid depth");
  return {std::move(pa), std::move(pq)};
}

}  // namespace relpose
