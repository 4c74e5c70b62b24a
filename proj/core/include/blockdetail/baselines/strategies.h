#pragma once

#include "blockdetail/baselines/masks.h"
#include "blockdetail/detailing/refinement.h"
#include "blockdetail/diffusion/denoiser.h"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace blockdetail {

/// x0 <- M (.) R + (1 - M) (.) U at every step, condition fixed at
/// build_condition(blocking). The mask is broadcast over coordinates.
std::vector<MotionArray> blended_sample_batch(const DenoiserR& r, const DenoiserU& u,
                                              std::span<const BlockingSet> blockings,
                                              std::span<const BlendMask> masks,
                                              std::span<const std::uint64_t> seeds);

MotionArray blended_sample(const DenoiserR& r, const DenoiserU& u, const BlockingSet& blocking,
                           const BlendMask& mask, std::uint64_t seed);

struct GuidanceConfig {
  double weight = 1.0;  // w >= 0
};

/// Applies x0 <- x0 - w * 2 (x0 - X) on the specified joints of every key
/// frame of an unconditioned prediction (the gradient of the squared
/// constraint residual taken with respect to the prediction).
void apply_guidance(const BlockingSet& blocking, double weight, MotionArray& x0);

/// Overwrites the specified joints of every key frame with the key features.
void apply_imputation(const BlockingSet& blocking, MotionArray& x0);

std::vector<MotionArray> guided_sample_batch(const DenoiserU& u,
                                             std::span<const BlockingSet> blockings,
                                             const GuidanceConfig& config,
                                             std::span<const std::uint64_t> seeds);

MotionArray guided_sample(const DenoiserU& u, const BlockingSet& blocking,
                          const GuidanceConfig& config, std::uint64_t seed);

std::vector<MotionArray> hard_impute_batch(const DenoiserU& u,
                                           std::span<const BlockingSet> blockings,
                                           std::span<const std::uint64_t> seeds);

MotionArray hard_impute_sample(const DenoiserU& u, const BlockingSet& blocking,
                               std::uint64_t seed);

enum class StrategyKind {
  detailing,
  r_notolerance,
  diffusion_blending,  // sparse mask
  soft_mask,
  u_guidance,
  hard_impute,
  unconditioned,
};

std::string_view to_string(StrategyKind kind);
StrategyKind parse_strategy_kind(std::string_view name);

/// A strategy and its parameters as plain data. Textual form:
/// "name[,key=value...]", e.g. "detailing,c=0.85,n=100" or "u-guidance,w=5".
struct StrategyDescriptor {
  StrategyKind kind = StrategyKind::detailing;
  /// Detailing: uniform tolerance override (unset keeps the blocking set's
  /// own tolerances). Blending: mask peak value (default 0.85).
  std::optional<double> c;
  int cadence = 100;  // n
  int radius = 10;
  bool ground_fix = true;
  int falloff = 10;
  double weight = 1.0;  // w

  void validate() const;
  /// Canonical label listing only the parameters relevant to the kind.
  std::string label() const;
  static StrategyDescriptor parse(std::string_view text);

  nlohmann::json to_json() const;
  static StrategyDescriptor from_json(const nlohmann::json& doc);

  RefinementConfig refinement() const;

  friend bool operator==(const StrategyDescriptor&, const StrategyDescriptor&) = default;
};

struct StrategyModels {
  const DenoiserR* r = nullptr;  // needed by detailing, r-notolerance, blending
  const DenoiserU* u = nullptr;  // needed by everything except r-notolerance
  SkeletonSpec skeleton = SkeletonSpec::desk();
};

struct StrategyOutput {
  MotionArray motion;
  std::optional<RefinementTrace> trace;  // detailing only
};

/// Runs one strategy on several blocking sets, chain i seeded with seeds[i].
/// Every strategy uses the same ancestral sampler and RNG discipline.
std::vector<StrategyOutput> run_strategy_batch(const StrategyDescriptor& strategy,
                                               const StrategyModels& models,
                                               std::span<const BlockingSet> blockings,
                                               std::span<const std::uint64_t> seeds,
                                               const DetailProgress& progress = {});

}  // namespace blockdetail
