#pragma once

#include "blockdetail/baselines/strategies.h"
#include "blockdetail/eval/benchmark.h"
#include "blockdetail/eval/report.h"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace blockdetail {

/// Seed of clip i's blocking draw and of its sampling chain under a
/// benchmark master seed. Every strategy shares the sampling seed.
std::uint64_t blocking_seed(std::uint64_t master, int clip);
std::uint64_t sampling_seed(std::uint64_t master, int clip);

struct BenchmarkRun {
  EvalReport report;
  std::vector<BlockingDraw> draws;
  /// outputs[s][i]: strategy s on clip i; empty when that run failed.
  std::vector<std::vector<std::optional<MotionArray>>> outputs;
};

using BenchmarkProgress = std::function<void(const std::string& message)>;

/// Draws a blocking set per clip (spec.seed), runs every strategy on all
/// clips with shared per-clip sampling seeds, and scores footskate, jitter
/// and KE per clip (averaged) and FID per strategy against the
/// ground-truth set. A strategy error on a clip is recorded in the row and
/// the clip is skipped for that strategy.
BenchmarkRun run_benchmark(const std::vector<StrategyDescriptor>& strategies,
                           const StrategyModels& models, const std::vector<Motion>& dataset,
                           const BenchmarkSpec& spec, const std::string& model_description = {},
                           const BenchmarkProgress& progress = {});

struct AblationPoint {
  int cadence = 0;
  double fid = 0.0;
  double jitter = 0.0;
  double ke = 0.0;
  int events = 0;  // refinement events per clip
};

struct AblationCurve {
  double c = 0.0;
  std::vector<AblationPoint> points;
  /// Cadence with the lowest FID.
  int best_cadence() const;
};

struct AblationResult {
  int steps = 0;
  BenchmarkSpec spec;
  std::string config_hash;
  std::vector<AblationCurve> curves;

  nlohmann::json to_json() const;
  /// One two-column "N FID" text file per c, named ablate_n_c<c>.tsv.
  std::vector<std::filesystem::path> save_curves(const std::filesystem::path& dir) const;
};

/// Detailing with the ground fix disabled over every (N, c) pair, FID
/// against the ground-truth clips. Blocking draws and seeds follow
/// run_benchmark, so an N above T reproduces the R-NoTolerance row.
AblationResult ablate_n(const StrategyModels& models, const std::vector<Motion>& dataset,
                        const BenchmarkSpec& spec, const std::vector<int>& cadences,
                        const std::vector<double>& c_values,
                        const BenchmarkProgress& progress = {});

std::string hex_hash(const nlohmann::json& canonical);

}  // namespace blockdetail
