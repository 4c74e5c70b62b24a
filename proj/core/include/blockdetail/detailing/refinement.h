#pragma once

#include "blockdetail/diffusion/denoiser.h"
#include "blockdetail/motion/blocking.h"
#include "blockdetail/motion/condition.h"
#include "blockdetail/motion/motion.h"
#include "blockdetail/motion/skeleton.h"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace blockdetail {

struct RefinementConfig {
  int cadence = 100;  // N; values above T disable refinement
  int search_radius = 10;
  bool apply_ground_fix = true;
  double default_tolerance = 0.85;

  void validate() const;
  nlohmann::json to_json() const;
  /// Missing keys keep their defaults; unknown keys are rejected.
  static RefinementConfig from_json(const nlohmann::json& doc);

  friend bool operator==(const RefinementConfig&, const RefinementConfig&) = default;
};

/// Refinement fires at every step t in [1, T] with t % cadence == 0, giving
/// floor(T / cadence) events, the first at the largest multiple of N <= T.
bool is_refinement_step(int t, int cadence);

/// argmin over f in [f_k - radius, f_k + radius] clipped to [0, F) of
/// pose_distance(proposal[f], key.pose, key.specified). Ties go to the
/// smaller |f - f_k|, then the smaller f.
int match_pose(const MotionArray& proposal, const BlockingPose& key, int radius);

/// C (.) key + (1 - C) (.) proposal with C_k broadcast over coordinates.
/// Entries with C = 1 (C = 0) copy the key (proposal) bit-exactly. Throws
/// ValidationError for tolerances outside [0, 1] or mismatched shapes.
Pose blend_key(const BlockingPose& key, const Pose& proposal_pose);

/// Ground-penetration projection. If every foot is below y = 0 the root is
/// raised by the deepest penetration; any foot still below is then clamped
/// onto the plane. Other joints keep their root-relative features. A key
/// without penetration is returned unchanged.
BlockingPose ground_fix(const BlockingPose& key, const SkeletonSpec& skeleton);

struct KeyRefinement {
  int key_index = 0;
  int frame = 0;          // f_k, never moved
  int matched_frame = 0;  // f_k*
  Pose before;            // key features before this event
  Pose proposal;          // U proposal at f_k*
  Pose after;             // key features after blend and optional ground fix
  bool ground_fixed = false;
};

struct RefinementEvent {
  int t = 0;
  std::vector<KeyRefinement> keys;
  Condition condition;  // rebuilt condition installed after this event
};

struct RefinementTrace {
  int steps = 0;
  RefinementConfig config;
  std::vector<RefinementEvent> events;
};

struct RefinementOutcome {
  BlockingSet blocking;
  Condition condition;
  RefinementEvent event;
};

/// One refinement event: match every key against `proposal`, blend, apply
/// the ground fix when enabled and the blend changed the key, and rebuild
/// the condition. Key frames are kept.
RefinementOutcome refine_condition(const BlockingSet& blocking, const MotionArray& proposal,
                                   const RefinementConfig& config, const SkeletonSpec& skeleton,
                                   int t = 0);

struct DetailResult {
  Motion motion;
  RefinementTrace trace;
  BlockingSet refined;  // blocking set after the last event
};

/// Per-step callback for progress reporting; `event` is non-null on steps
/// where chain `chain` was refined.
using DetailProgress = std::function<void(std::size_t chain, int t, const RefinementEvent* event)>;

/// Samples R conditioned on build_condition(blocking) and, at refinement
/// steps, evaluates U on the same noisy state, refines the blocking set and
/// installs the rebuilt condition for the following steps. U evaluation
/// draws no randomness, so with all tolerances 1 the output is bit-identical
/// to plain R sampling with the same seed.
DetailResult detail_motion(const BlockingSet& blocking, const DenoiserR& r, const DenoiserU& u,
                           const RefinementConfig& config, std::uint64_t seed,
                           const SkeletonSpec& skeleton = SkeletonSpec::desk(),
                           const DetailProgress& progress = {});

/// Several independent detail_motion runs sharing denoiser batches. Chain i
/// uses blockings[i] and seeds[i].
std::vector<DetailResult> detail_motion_batch(std::span<const BlockingSet> blockings,
                                              const DenoiserR& r, const DenoiserU& u,
                                              const RefinementConfig& config,
                                              std::span<const std::uint64_t> seeds,
                                              const SkeletonSpec& skeleton = SkeletonSpec::desk(),
                                              const DetailProgress& progress = {});

}  // namespace blockdetail
