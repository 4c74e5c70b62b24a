#pragma once

#include "blockdetail/motion/blocking.h"
#include "blockdetail/motion/motion.h"
#include "blockdetail/motion/skeleton.h"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <vector>

namespace blockdetail {

struct BenchmarkSpec {
  int max_keys = 10;
  int time_jitter = 5;
  int clip_length = kDefaultClipLength;
  std::uint64_t seed = 0;
  int count = 50;
  double tolerance = 0.85;          // C written into every generated key
  bool keep_all_important = false;  // retain every important joint

  void validate() const;
  nlohmann::json to_json() const;
  /// Missing keys keep their defaults; unknown keys are rejected.
  static BenchmarkSpec from_json(const nlohmann::json& doc);

  friend bool operator==(const BenchmarkSpec&, const BenchmarkSpec&) = default;
};

struct BlockingDraw {
  BlockingSet blocking;
  std::vector<int> source_frames;  // ground-truth frame of each key, in key order
  std::vector<int> offsets;        // key.frame - source frame
};

/// Synthetic blocking for a ground-truth clip: k ~ U{2..max_keys} distinct
/// source frames (the upper bound shrinks to F/2 on short clips); per key the
/// root plus each other important joint with probability 1/2 keep their
/// ground-truth features, everything else is neutral; each key then moves by
/// U{-time_jitter..time_jitter} frames, clamped to the clip, redrawing
/// collisions. Throws ValidationError if gt.F != spec.clip_length.
BlockingDraw make_blocking(const Motion& gt, const BenchmarkSpec& spec, std::uint64_t seed,
                           const SkeletonSpec& skeleton = SkeletonSpec::desk());

/// The benchmark's ground-truth clips: spec.count synthetic clips of
/// spec.clip_length frames on a stream of spec.seed reserved for test data.
std::vector<Motion> benchmark_clips(const BenchmarkSpec& spec);

}  // namespace blockdetail
