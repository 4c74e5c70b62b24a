#pragma once

#include "blockdetail/baselines/strategies.h"
#include "blockdetail/eval/benchmark.h"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace blockdetail {

struct StrategyRow {
  StrategyDescriptor strategy;
  std::string label;
  double footskate = 0.0;  // m/frame
  double jitter = 0.0;     // m/frame^3
  double fid = 0.0;
  double ke = 0.0;  // m
  int clips = 0;    // clips that produced output
  std::vector<std::string> failures;  // "clip i: message"
};

struct EvalReport {
  std::string metric_version;
  BenchmarkSpec spec;
  std::uint64_t seed = 0;
  int clip_count = 0;
  std::string models;       // description of the denoisers used
  std::string config_hash;  // FNV-1a of the canonical run config, hex
  std::vector<StrategyRow> rows;

  nlohmann::json to_json() const;
  static EvalReport from_json(const nlohmann::json& doc);

  /// Aligned table: one row per strategy; FootSkate x 10^3, Jitter x 10^2,
  /// FID, KE x 10^2.
  std::string to_text() const;
};

}  // namespace blockdetail
