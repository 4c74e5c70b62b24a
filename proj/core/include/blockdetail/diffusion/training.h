#pragma once

#include "blockdetail/common/rng.h"
#include "blockdetail/diffusion/network.h"
#include "blockdetail/motion/condition.h"
#include "blockdetail/motion/motion.h"

#include <nlohmann/json.hpp>

#include <functional>
#include <memory>
#include <vector>

namespace blockdetail {

struct TrainingConfig {
  int iterations = 4000;
  int batch_size = 64;
  double learning_rate = 1e-3;
  double final_learning_rate = 5e-5;  // end of the cosine decay
  int warmup = 100;
  double grad_clip = 1.0;  // global L2 norm
  int hidden = 256;
  int depth = 4;
  int time_embedding = 32;
  double temporal_length = 6.0;  // see NetworkConfig
  int steps = kDefaultSteps;
  std::uint64_t seed = 0;
  // R-mode condition synthesis.
  int max_keys = 10;
  int max_time_offset = 5;

  void validate() const;
  nlohmann::json to_json() const;
  /// Missing keys keep their defaults; unknown keys are rejected.
  static TrainingConfig from_json(const nlohmann::json& doc);

  friend bool operator==(const TrainingConfig&, const TrainingConfig&) = default;
};

struct TrainingResult {
  std::shared_ptr<TinyDenoiserNet> net;
  TrainingConfig config;
  int clip_count = 0;
  /// Mean batch loss over the last tenth of training (at most 100 batches).
  double final_loss = 0.0;
};

using TrainingProgress = std::function<void(int iteration, double loss)>;

/// Adam on the standardized x0 loss with t ~ U{1..T}. Single-threaded and
/// deterministic given config.seed. Throws ValidationError if clips differ in
/// shape.
TrainingResult train_denoiser(const std::vector<Motion>& dataset, DenoiserMode mode,
                              const TrainingConfig& config,
                              const TrainingProgress& progress = {});

/// Dense R training condition for `clean`: k ~ U{2..max_keys} distinct
/// source frames, each pose moved to source + U{-max_offset..max_offset}
/// (clamped, collisions redrawn), then linearly interpolated.
Condition make_training_condition(const MotionArray& clean, int max_keys, int max_offset,
                                  Rng& rng);

}  // namespace blockdetail
