#pragma once

#include <cstdint>
#include <fstream>
#include <set>
#include <string>

#include <json.hpp>

#include "relpose/errors.hpp"
#include "relpose/loss.hpp"
#include "relpose/registration.hpp"

namespace relpose {

/// Every tunable default of the matching/loss/registration pipeline, all
/// overridable from one JSON config file.
struct PipelineConfig {
  double mu_p = 0.2;
  double mu_n = 0.9;
  double tau = 20.0;
  double mu_t = 0.25;
  std::size_t capacity = 2000;
  double lambda_p = 0.5;
  double lambda_n = 0.5;
  double beta = 0.010;
  double inlier_threshold = 0.010;
  int max_seeds = 32;
  int local_rounds = 3;
  int ransac_iterations = 512;
  bool mutual_filter = false;
  bool use_ransac = false;
  int threads = 0;  // 0 = all available cores

  LossParams loss_params() const { return {mu_p, mu_n, tau, lambda_p, lambda_n}; }

  RegistrationParams registration_params(std::uint64_t seed) const {
    RegistrationParams p;
    p.beta = beta;
    p.inlier_threshold = inlier_threshold;
    p.max_seeds = max_seeds;
    p.local_rounds = local_rounds;
    p.seed = seed;
    p.method = use_ransac ? RegistrationMethod::ransac
                          : RegistrationMethod::spatial_consistency;
    p.ransac_iterations = ransac_iterations;
    p.threads = threads;
    return p;
  }
};

inline void from_json_strict(const nlohmann::json& j, PipelineConfig& cfg,
                             const std::string& where) {
  static const std::set<std::string> known = {
      "mu_p", "mu_n", "tau", "mu_t", "capacity", "lambda_p", "lambda_n",
      "beta", "inlier_threshold", "max_seeds", "local_rounds",
      "ransac_iterations", "mutual_filter", "use_ransac", "threads"};
  for (auto it = j.begin(); it != j.end(); ++it)
    require(known.count(it.key()) > 0, ErrorCode::invalid_argument,
            where + ": unknown config key '" + it.key() + "'");
  cfg.mu_p = j.value("mu_p", cfg.mu_p);
  cfg.mu_n = j.value("mu_n", cfg.mu_n);
  cfg.tau = j.value("tau", cfg.tau);
  cfg.mu_t = j.value("mu_t", cfg.mu_t);
  cfg.capacity = j.value("capacity", cfg.capacity);
  cfg.lambda_p = j.value("lambda_p", cfg.lambda_p);
  cfg.lambda_n = j.value("lambda_n", cfg.lambda_n);
  cfg.beta = j.value("beta", cfg.beta);
  cfg.inlier_threshold = j.value("inlier_threshold", cfg.inlier_threshold);
  cfg.max_seeds = j.value("max_seeds", cfg.max_seeds);
  cfg.local_rounds = j.value("local_rounds", cfg.local_rounds);
  cfg.ransac_iterations = j.value("ransac_iterations", cfg.ransac_iterations);
  cfg.mutual_filter = j.value("mutual_filter", cfg.mutual_filter);
  cfg.use_ransac = j.value("use_ransac", cfg.use_ransac);
  cfg.threads = j.value("threads", cfg.threads);
}

/// Config echo for reports. Deliberately omits `threads`: it has no effect
/// on results and reports must stay byte-identical across thread counts.
inline nlohmann::json to_json(const PipelineConfig& cfg) {
  return {
      {"mu_p", cfg.mu_p},
      {"mu_n", cfg.mu_n},
      {"tau", cfg.tau},
      {"mu_t", cfg.mu_t},
      {"capacity", cfg.capacity},
      {"lambda_p", cfg.lambda_p},
      {"lambda_n", cfg.lambda_n},
      {"beta", cfg.beta},
      {"inlier_threshold", cfg.inlier_threshold},
      {"max_seeds", cfg.max_seeds},
      {"local_rounds", cfg.local_rounds},
      {"ransac_iterations", cfg.ransac_iterations},
      {"mutual_filter", cfg.mutual_filter},
      {"use_ransac", cfg.use_ransac},
  };
}

inline PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::invalid_argument,
          "config: cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::invalid_argument,
         "config '" + path + "': " + std::string(e.what()));
  }
  PipelineConfig cfg;
  from_json_strict(j, cfg, "config '" + path + "'");
  return cfg;
}

}  // namespace relpose
