#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "relpose/linalg.hpp"

namespace relpose {

/// Deterministic random source. The engine (mt19937_64) is fully specified
/// by the standard; the distribution transforms are hand-rolled because the
/// standard library's are implementation-defined, and identical seeds must
/// reproduce identical scenes everywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Modulo bias is negligible for n << 2^64.
  std::uint64_t uniform_index(std::uint64_t n) { return next_u64() % n; }

  /// Box-Muller transform with a cached spare.
  double normal(double mean = 0.0, double sigma = 1.0) {
    if (has_spare_) {
      has_spare_ = false;
      return mean + sigma * spare_;
    }
    double u1 = uniform(), u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return mean + sigma * r * std::cos(theta);
  }

  Vec3 normal_vec3(double sigma = 1.0) {
    return {normal(0, sigma), normal(0, sigma), normal(0, sigma)};
  }

  Vec3 unit_vec3() {
    Vec3 v = normal_vec3();
    while (v.norm() < 1e-12) v = normal_vec3();
    return v.normalized();
  }

  /// Uniform rotation on SO(3) via a normalized 4-normal quaternion.
  Mat3 rotation() {
    double w = normal(), x = normal(), y = normal(), z = normal();
    while (w * w + x * x + y * y + z * z < 1e-12) {
      w = normal(); x = normal(); y = normal(); z = normal();
    }
    return quaternion_to_matrix(w, x, y, z);
  }

  /// Random unit descriptor of the given dimension.
  std::vector<double> unit_vector(int dim) {
    std::vector<double> v(dim);
    double n2 = 0.0;
    do {
      n2 = 0.0;
      for (int i = 0; i < dim; ++i) {
        v[i] = normal();
        n2 += v[i] * v[i];
      }
    } while (n2 < 1e-12);
    double inv = 1.0 / std::sqrt(n2);
    for (double& x : v) x *= inv;
    return v;
  }

  /// k distinct indices from [0, n), ascending.
  std::vector<std::size_t> sample_without_replacement(std::size_t n,
                                                      std::size_t k) {
    std::vector<std::size_t> pool(n);
    for (std::size_t i = 0; i < n; ++i) pool[i] = i;
    std::vector<std::size_t> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k && i < n; ++i) {
      std::size_t j = i + static_cast<std::size_t>(uniform_index(n - i));
      std::swap(pool[i], pool[j]);
      out.push_back(pool[i]);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// SplitMix64 mix, used to derive independent sub-seeds from one seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace relpose
