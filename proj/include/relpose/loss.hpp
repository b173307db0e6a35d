#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "relpose/matching.hpp"
#include "relpose/rng.hpp"

namespace relpose {

/// Ground-truth match supervision. Coordinates are continuous pixel
/// positions; descriptor lookups round to the nearest pixel center.
struct MatchSupervision {
  struct Pair {
    double u_a = 0.0, v_a = 0.0;
    double u_q = 0.0, v_q = 0.0;
  };
  std::vector<Pair> pairs;

  std::size_t size() const { return pairs.size(); }
};

struct LossParams {
  double mu_p = 0.2;      // positive margin
  double mu_n = 0.9;      // negative margin
  double tau = 20.0;      // hardest-negative excluding distance, pixels
  double lambda_p = 0.5;  // positive weight
  double lambda_n = 0.5;  // negative weight

  void validate() const {
    require(mu_p >= 0.0 && mu_p < mu_n && mu_n <= 1.0,
            ErrorCode::invalid_argument,
            "loss params: need 0 <= mu_P < mu_N <= 1");
    require(tau > 0.0, ErrorCode::invalid_argument,
            "loss params: tau must be positive");
    require(lambda_p >= 0.0 && lambda_n >= 0.0, ErrorCode::invalid_argument,
            "loss params: lambdas must be nonnegative");
  }
};

/// A loss value plus its exact gradient with respect to every descriptor of
/// both feature maps (same shape as the maps, zero where untouched).
struct LossTerm {
  double value = 0.0;
  FeatureMap grad_a, grad_q;
};

/// Soft segmentation prediction in [0, 1] per pixel.
struct SoftMask {
  int width = 0, height = 0;
  std::vector<double> values;

  SoftMask() = default;
  SoftMask(int w, int h)
      : width(w), height(h), values(static_cast<std::size_t>(w) * h, 0.0) {}

  double at(int u, int v) const { return values[static_cast<std::size_t>(v) * width + u]; }
  double& at(int u, int v) { return values[static_cast<std::size_t>(v) * width + u]; }
};

struct DiceTerm {
  double value = 0.0;
  std::vector<double> grad;  // d value / d pred, per pixel
};

struct LossReport {
  double positive = 0.0;      // l_P
  double negative = 0.0;      // l_N
  double segmentation = 0.0;  // l_M
  double total = 0.0;         // l_M + lambda_N * l_N + lambda_P * l_P
  FeatureMap grad_a, grad_q;  // d total / d descriptors
};

namespace detail {

inline PixelCoord round_to_pixel(double u, double v, const FeatureMap& fmap,
                                 const char* what) {
  int ui = static_cast<int>(std::lround(u));
  int vi = static_cast<int>(std::lround(v));
  require(ui >= 0 && ui < fmap.width && vi >= 0 && vi < fmap.height,
          ErrorCode::out_of_bounds,
          std::string(what) + ": supervision coordinate outside feature map");
  return {ui, vi};
}

/// dist = (1 - a.b / (|a||b|)) / 2 and its gradients w.r.t. both arguments.
struct DistWithGrad {
  double dist = 0.0;
  std::vector<double> grad_a, grad_b;
};

inline DistWithGrad cosine_distance_grad(std::span<const double> a,
                                         std::span<const double> b) {
  std::size_t n = a.size();
  double dot = 0.0, na2 = 0.0, nb2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    dot += a[i] * b[i];
    na2 += a[i] * a[i];
    nb2 += b[i] * b[i];
  }
  require(na2 > 0.0 && nb2 > 0.0, ErrorCode::zero_vector,
          "cosine_distance_grad: zero-norm descriptor");
  double na = std::sqrt(na2), nb = std::sqrt(nb2);
  double inv = 1.0 / (na * nb);
  double cosv = dot * inv;
  DistWithGrad out;
  out.dist = std::clamp(0.5 * (1.0 - cosv), 0.0, 1.0);
  out.grad_a.resize(n);
  out.grad_b.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    // d cos / d a_i = b_i/(|a||b|) - cos * a_i/|a|^2, and dist = (1-cos)/2.
    out.grad_a[i] = -0.5 * (b[i] * inv - cosv * a[i] / na2);
    out.grad_b[i] = -0.5 * (a[i] * inv - cosv * b[i] / nb2);
  }
  return out;
}

inline void accumulate(FeatureMap& grad, const PixelCoord& at,
                       const std::vector<double>& g, double scale) {
  auto dst = grad.at(at.u, at.v);
  for (std::size_t i = 0; i < g.size(); ++i) dst[i] += scale * g[i];
}

}  // namespace detail

/// Hinge loss over positive pairs: mean of max(0, dist - mu_P).
inline LossTerm positive_loss(const FeatureMap& fa, const FeatureMap& fq,
                              const MatchSupervision& sup, double mu_p) {
  require(!sup.pairs.empty(), ErrorCode::empty_supervision,
          "positive_loss: no ground-truth matches");
  LossTerm out;
  out.grad_a = FeatureMap(fa.height, fa.width, fa.dim);
  out.grad_q = FeatureMap(fq.height, fq.width, fq.dim);
  const double w = 1.0 / static_cast<double>(sup.pairs.size());
  for (const auto& p : sup.pairs) {
    PixelCoord ca = detail::round_to_pixel(p.u_a, p.v_a, fa, "positive_loss");
    PixelCoord cq = detail::round_to_pixel(p.u_q, p.v_q, fq, "positive_loss");
    auto dg = detail::cosine_distance_grad(fa.at(ca.u, ca.v), fq.at(cq.u, cq.v));
    double hinge = dg.dist - mu_p;
    if (hinge <= 0.0) continue;
    out.value += w * hinge;
    detail::accumulate(out.grad_a, ca, dg.grad_a, w);
    detail::accumulate(out.grad_q, cq, dg.grad_b, w);
  }
  return out;
}

/// Candidate negatives of index i: all k != i at pixel distance >= tau.
inline std::vector<std::size_t> candidate_negative_set(
    const std::vector<std::pair<double, double>>& coords, std::size_t i,
    double tau) {
  require(!coords.empty(), ErrorCode::invalid_argument,
          "candidate_negative_set: empty coordinate list");
  std::vector<std::size_t> out;
  const double tau2 = tau * tau;
  for (std::size_t k = 0; k < coords.size(); ++k) {
    if (k == i) continue;
    double du = coords[i].first - coords[k].first;
    double dv = coords[i].second - coords[k].second;
    if (du * du + dv * dv >= tau2) out.push_back(k);
  }
  return out;
}

/// Where hardest negatives are mined from: the matched features' own
/// coordinates (default) or every pixel of the feature map.
enum class NegativePool { matched, full_map };

/// Hardest-negative hinge loss. For each matched feature on each side, the
/// closest candidate negative outside radius tau is penalized if nearer
/// than mu_N. Each side's sum is weighted by 1/(2 * count of features on
/// that side with a non-empty candidate set). If every candidate set is
/// empty the loss is 0 with zero gradient.
inline LossTerm negative_loss(const FeatureMap& fa, const FeatureMap& fq,
                              const MatchSupervision& sup, double mu_n,
                              double tau,
                              NegativePool pool = NegativePool::matched) {
  require(!sup.pairs.empty(), ErrorCode::empty_supervision,
          "negative_loss: no ground-truth matches");
  LossTerm out;
  out.grad_a = FeatureMap(fa.height, fa.width, fa.dim);
  out.grad_q = FeatureMap(fq.height, fq.width, fq.dim);

  const std::size_t n = sup.pairs.size();
  for (int side = 0; side < 2; ++side) {
    const FeatureMap& fmap = side == 0 ? fa : fq;
    FeatureMap& grad = side == 0 ? out.grad_a : out.grad_q;

    std::vector<std::pair<double, double>> coords(n);
    std::vector<PixelCoord> pixels(n);
    for (std::size_t m = 0; m < n; ++m) {
      const auto& p = sup.pairs[m];
      coords[m] = side == 0 ? std::make_pair(p.u_a, p.v_a)
                            : std::make_pair(p.u_q, p.v_q);
      pixels[m] = detail::round_to_pixel(coords[m].first, coords[m].second,
                                         fmap, "negative_loss");
    }

    // Candidate pool: matched coordinates, or the whole pixel grid.
    std::vector<std::pair<double, double>> pool_coords;
    std::vector<PixelCoord> pool_pixels;
    if (pool == NegativePool::matched) {
      pool_coords = coords;
      pool_pixels = pixels;
    } else {
      pool_coords.reserve(static_cast<std::size_t>(fmap.width) * fmap.height);
      for (int v = 0; v < fmap.height; ++v)
        for (int u = 0; u < fmap.width; ++u) {
          pool_coords.emplace_back(u, v);
          pool_pixels.push_back({u, v});
        }
    }

    const double tau2 = tau * tau;
    auto candidates_of = [&](std::size_t m) {
      std::vector<std::size_t> set;
      for (std::size_t k = 0; k < pool_coords.size(); ++k) {
        if (pool == NegativePool::matched && k == m) continue;
        double du = coords[m].first - pool_coords[k].first;
        double dv = coords[m].second - pool_coords[k].second;
        if (du * du + dv * dv >= tau2) set.push_back(k);
      }
      return set;
    };

    std::vector<std::vector<std::size_t>> sets(n);
    std::size_t nonempty = 0;
    for (std::size_t m = 0; m < n; ++m) {
      sets[m] = candidates_of(m);
      nonempty += !sets[m].empty();
    }
    if (nonempty == 0) continue;

    const double w = 1.0 / (2.0 * static_cast<double>(nonempty));
    for (std::size_t m = 0; m < n; ++m) {
      if (sets[m].empty()) continue;
      auto fm = fmap.at(pixels[m].u, pixels[m].v);
      std::size_t hardest = sets[m][0];
      double dmin = cosine_distance(
          fm, fmap.at(pool_pixels[hardest].u, pool_pixels[hardest].v));
      for (std::size_t t = 1; t < sets[m].size(); ++t) {
        std::size_t k = sets[m][t];
        double d = cosine_distance(fm, fmap.at(pool_pixels[k].u, pool_pixels[k].v));
        if (d < dmin) {
          dmin = d;
          hardest = k;
        }
      }
      double hinge = mu_n - dmin;
      if (hinge <= 0.0) continue;
      out.value += w * hinge;
      auto dg = detail::cosine_distance_grad(
          fm, fmap.at(pool_pixels[hardest].u, pool_pixels[hardest].v));
      detail::accumulate(grad, pixels[m], dg.grad_a, -w);
      detail::accumulate(grad, pool_pixels[hardest], dg.grad_b, -w);
    }
  }
  return out;
}

/// Dice segmentation loss with epsilon smoothing, plus gradient w.r.t. the
/// soft prediction.
inline DiceTerm dice_loss(const SoftMask& pred, const Mask& gt) {
  require(pred.width == gt.width && pred.height == gt.height,
          ErrorCode::dimension_mismatch,
          "dice_loss: prediction and ground truth dimensions differ");
  constexpr double kEps = 1e-6;
  double inter = 0.0, sum_p = 0.0, sum_g = 0.0;
  const std::size_t n = pred.values.size();
  for (std::size_t i = 0; i < n; ++i) {
    double g = gt.values[i] ? 1.0 : 0.0;
    inter += pred.values[i] * g;
    sum_p += pred.values[i];
    sum_g += g;
  }
  double denom = sum_p + sum_g + kEps;
  DiceTerm out;
  out.value = 1.0 - (2.0 * inter + kEps) / denom;
  out.grad.resize(n);
  double num = 2.0 * inter + kEps;
  for (std::size_t i = 0; i < n; ++i) {
    double g = gt.values[i] ? 1.0 : 0.0;
    out.grad[i] = -(2.0 * g * denom - num) / (denom * denom);
  }
  return out;
}

/// Combined objective l = l_M + lambda_N * l_N + lambda_P * l_P, where l_M
/// averages the Dice losses of the two views. When |P| > capacity the
/// supervision is subsampled uniformly with the injected seed.
inline LossReport total_loss(const FeatureMap& fa, const FeatureMap& fq,
                             const SoftMask& pred_mask_a,
                             const SoftMask& pred_mask_q, const Mask& gt_mask_a,
                             const Mask& gt_mask_q, const MatchSupervision& sup,
                             const LossParams& params,
                             std::size_t capacity = 2000,
                             std::uint64_t seed = 0) {
  params.validate();
  require(!sup.pairs.empty(), ErrorCode::empty_supervision,
          "total_loss: no ground-truth matches");

  const MatchSupervision* effective = &sup;
  MatchSupervision sampled;
  if (capacity > 0 && sup.pairs.size() > capacity) {
    Rng rng(seed);
    for (std::size_t i : rng.sample_without_replacement(sup.pairs.size(), capacity))
      sampled.pairs.push_back(sup.pairs[i]);
    effective = &sampled;
  }

  LossTerm pos = positive_loss(fa, fq, *effective, params.mu_p);
  LossTerm neg = negative_loss(fa, fq, *effective, params.mu_n, params.tau);
  DiceTerm dice_a = dice_loss(pred_mask_a, gt_mask_a);
  DiceTerm dice_q = dice_loss(pred_mask_q, gt_mask_q);

  LossReport out;
  out.positive = pos.value;
  out.negative = neg.value;
  out.segmentation = 0.5 * (dice_a.value + dice_q.value);
  out.total = out.segmentation + params.lambda_n * out.negative +
              params.lambda_p * out.positive;
  out.grad_a = FeatureMap(fa.height, fa.width, fa.dim);
  out.grad_q = FeatureMap(fq.height, fq.width, fq.dim);
  for (std::size_t i = 0; i < out.grad_a.data.size(); ++i)
    out.grad_a.data[i] = params.lambda_p * pos.grad_a.data[i] +
                         params.lambda_n * neg.grad_a.data[i];
  for (std::size_t i = 0; i < out.grad_q.data.size(); ++i)
    out.grad_q.data[i] = params.lambda_p * pos.grad_q.data[i] +
                         params.lambda_n * neg.grad_q.data[i];
  return out;
}

}  // namespace relpose
