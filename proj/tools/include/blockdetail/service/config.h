#pragma once

#include "blockdetail/detailing/refinement.h"
#include "blockdetail/diffusion/gaussian.h"
#include "blockdetail/diffusion/schedule.h"
#include "blockdetail/diffusion/training.h"
#include "blockdetail/eval/benchmark.h"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>

namespace blockdetail {

/// Analytic backend: an SE-kernel prior whose mean is fitted on a synthetic set.
struct GaussianSettings {
  KernelParams kernel;
  double obs_variance = 0.01;
  int clips = 256;
  std::uint64_t seed = 0;

  friend bool operator==(const GaussianSettings& a, const GaussianSettings& b) {
    return a.kernel.variance == b.kernel.variance && a.kernel.length == b.kernel.length &&
           a.kernel.jitter == b.kernel.jitter && a.obs_variance == b.obs_variance &&
           a.clips == b.clips && a.seed == b.seed;
  }
};

struct ServiceSettings {
  std::string host = "127.0.0.1";
  int port = 8080;
  int workers = 2;
  std::uint64_t seed = 0;  // master seed for requests without one

  friend bool operator==(const ServiceSettings&, const ServiceSettings&) = default;
};

/// The versioned config document:
///   {format_version: 1, schedule: {steps, offset}, refinement, training,
///    benchmark, gaussian, service}
/// Every section and key is optional; unknown keys are rejected.
struct AppConfig {
  int steps = kDefaultSteps;
  double schedule_offset = 0.008;
  RefinementConfig refinement;
  TrainingConfig training;
  BenchmarkSpec benchmark;
  GaussianSettings gaussian;
  ServiceSettings service;

  NoiseSchedule schedule() const { return NoiseSchedule(steps, schedule_offset); }

  void validate() const;
  nlohmann::json to_json() const;
  static AppConfig from_json(const nlohmann::json& doc);
  static AppConfig load(const std::filesystem::path& path);

  friend bool operator==(const AppConfig&, const AppConfig&) = default;
};

/// BLOCKDETAIL_DATA_DIR when set, otherwise ./blockdetail-data.
std::filesystem::path data_root();

}  // namespace blockdetail
