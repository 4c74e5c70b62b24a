#include "blockdetail/eval/runner.h"

#include "blockdetail/common/error.h"
#include "blockdetail/common/rng.h"
#include "blockdetail/eval/fid.h"
#include "blockdetail/eval/metrics.h"
#include "blockdetail/motion/motion_io.h"

#include <cstdio>
#include <sstream>

namespace blockdetail {

using nlohmann::json;

namespace {

std::vector<MotionArray> ground_truth(const std::vector<Motion>& dataset) {
  std::vector<MotionArray> out;
  out.reserve(dataset.size());
  for (const Motion& m : dataset) out.push_back(m.frames());
  return out;
}

// Runs a strategy on every clip in one batch; if the batch fails, falls back
// to clip-by-clip runs so a single bad clip does not sink the others.
std::vector<std::optional<MotionArray>> run_all(const StrategyDescriptor& strategy,
                                                const StrategyModels& models,
                                                const std::vector<BlockingSet>& blockings,
                                                const std::vector<std::uint64_t>& seeds,
                                                std::vector<std::string>& failures) {
  std::vector<std::optional<MotionArray>> out(blockings.size());
  try {
    auto results = run_strategy_batch(strategy, models, blockings, seeds);
    for (std::size_t i = 0; i < results.size(); ++i) {
      if (results[i].motion.all_finite()) {
        out[i] = std::move(results[i].motion);
      } else {
        failures.push_back("clip " + std::to_string(i) + ": non-finite output");
      }
    }
    return out;
  } catch (const std::exception&) {
  }
  for (std::size_t i = 0; i < blockings.size(); ++i) {
    try {
      auto r = run_strategy_batch(strategy, models, {&blockings[i], 1}, {&seeds[i], 1});
      if (r[0].motion.all_finite()) {
        out[i] = std::move(r[0].motion);
      } else {
        failures.push_back("clip " + std::to_string(i) + ": non-finite output");
      }
    } catch (const std::exception& e) {
      failures.push_back("clip " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

StrategyRow score(const StrategyDescriptor& strategy,
                  const std::vector<std::optional<MotionArray>>& outputs,
                  const std::vector<BlockingDraw>& draws, const std::vector<MotionArray>& truth,
                  const SkeletonSpec& skeleton, std::vector<std::string> failures) {
  StrategyRow row;
  row.strategy = strategy;
  row.label = strategy.label();
  row.failures = std::move(failures);
  std::vector<MotionArray> produced;
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    if (!outputs[i]) continue;
    const MotionArray& m = *outputs[i];
    row.footskate += footskate(m, skeleton);
    row.jitter += jitter(m);
    row.ke += keyframe_error(draws[i].blocking, m);
    produced.push_back(m);
  }
  row.clips = static_cast<int>(produced.size());
  if (row.clips > 0) {
    row.footskate /= row.clips;
    row.jitter /= row.clips;
    row.ke /= row.clips;
    row.fid = fid(truth, produced);
  }
  return row;
}

std::vector<BlockingDraw> draw_all(const std::vector<Motion>& dataset, const BenchmarkSpec& spec,
                                   const SkeletonSpec& skeleton) {
  std::vector<BlockingDraw> draws;
  draws.reserve(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    draws.push_back(make_blocking(dataset[i], spec, blocking_seed(spec.seed, static_cast<int>(i)),
                                  skeleton));
  }
  return draws;
}

std::string format_c(double c) {
  std::ostringstream out;
  out << c;
  return out.str();
}

}  // namespace

std::uint64_t blocking_seed(std::uint64_t master, int clip) {
  return derive_seed(master, 2 * static_cast<std::uint64_t>(clip));
}

std::uint64_t sampling_seed(std::uint64_t master, int clip) {
  return derive_seed(master, 2 * static_cast<std::uint64_t>(clip) + 1);
}

std::string hex_hash(const json& canonical) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(canonical.dump())));
  return buf;
}

BenchmarkRun run_benchmark(const std::vector<StrategyDescriptor>& strategies,
                           const StrategyModels& models, const std::vector<Motion>& dataset,
                           const BenchmarkSpec& spec, const std::string& model_description,
                           const BenchmarkProgress& progress) {
  spec.validate();
  if (dataset.empty()) throw ValidationError("benchmark dataset is empty", "dataset");
  if (strategies.empty()) throw ValidationError("no strategies to run", "strategies");

  BenchmarkRun run;
  run.draws = draw_all(dataset, spec, models.skeleton);
  std::vector<BlockingSet> blockings;
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < run.draws.size(); ++i) {
    blockings.push_back(run.draws[i].blocking);
    seeds.push_back(sampling_seed(spec.seed, static_cast<int>(i)));
  }
  const std::vector<MotionArray> truth = ground_truth(dataset);

  json labels = json::array();
  for (const StrategyDescriptor& s : strategies) labels.push_back(s.to_json());

  EvalReport& report = run.report;
  report.metric_version = kMetricVersion;
  report.spec = spec;
  report.seed = spec.seed;
  report.clip_count = static_cast<int>(dataset.size());
  report.models = model_description;
  report.config_hash = hex_hash({{"benchmark", spec.to_json()},
                                 {"strategies", labels},
                                 {"models", model_description},
                                 {"metric_version", kMetricVersion},
                                 {"clips", dataset.size()}});

  for (const StrategyDescriptor& s : strategies) {
    if (progress) progress("running " + s.label());
    std::vector<std::string> failures;
    auto outputs = run_all(s, models, blockings, seeds, failures);
    report.rows.push_back(score(s, outputs, run.draws, truth, models.skeleton, std::move(failures)));
    run.outputs.push_back(std::move(outputs));
  }
  return run;
}

int AblationCurve::best_cadence() const {
  int best = -1;
  double best_fid = 0.0;
  for (const AblationPoint& p : points) {
    if (best < 0 || p.fid < best_fid) {
      best = p.cadence;
      best_fid = p.fid;
    }
  }
  return best;
}

json AblationResult::to_json() const {
  json curves_json = json::array();
  for (const AblationCurve& c : curves) {
    json points = json::array();
    for (const AblationPoint& p : c.points) {
      points.push_back({{"n", p.cadence}, {"fid", p.fid}, {"jitter", p.jitter}, {"ke", p.ke},
                        {"events", p.events}});
    }
    curves_json.push_back({{"c", c.c}, {"best_n", c.best_cadence()}, {"points", points}});
  }
  return {{"format_version", kFormatVersion},
          {"metric_version", kMetricVersion},
          {"steps", steps},
          {"benchmark", spec.to_json()},
          {"config_hash", config_hash},
          {"ground_fix", false},
          {"curves", curves_json}};
}

std::vector<std::filesystem::path> AblationResult::save_curves(
    const std::filesystem::path& dir) const {
  std::vector<std::filesystem::path> paths;
  for (const AblationCurve& c : curves) {
    std::string text = "# N\tFID (c=" + format_c(c.c) + ")\n";
    char line[128];
    for (const AblationPoint& p : c.points) {
      std::snprintf(line, sizeof line, "%d\t%.17g\n", p.cadence, p.fid);
      text += line;
    }
    const std::filesystem::path path = dir / ("ablate_n_c" + format_c(c.c) + ".tsv");
    write_text_file(path, text);
    paths.push_back(path);
  }
  return paths;
}

AblationResult ablate_n(const StrategyModels& models, const std::vector<Motion>& dataset,
                        const BenchmarkSpec& spec, const std::vector<int>& cadences,
                        const std::vector<double>& c_values, const BenchmarkProgress& progress) {
  spec.validate();
  if (!models.r || !models.u) throw ValidationError("ablation needs R and U models", "model");
  if (cadences.empty() || c_values.empty()) {
    throw ValidationError("ablation grid is empty", "grid");
  }
  const std::vector<BlockingDraw> draws = draw_all(dataset, spec, models.skeleton);
  std::vector<BlockingSet> blockings;
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < draws.size(); ++i) {
    blockings.push_back(draws[i].blocking);
    seeds.push_back(sampling_seed(spec.seed, static_cast<int>(i)));
  }
  const std::vector<MotionArray> truth = ground_truth(dataset);
  const int steps = models.r->schedule().steps();

  AblationResult result;
  result.steps = steps;
  result.spec = spec;
  result.config_hash = hex_hash({{"benchmark", spec.to_json()},
                                 {"cadences", cadences},
                                 {"c", c_values},
                                 {"metric_version", kMetricVersion},
                                 {"clips", dataset.size()}});
  for (double c : c_values) {
    AblationCurve curve;
    curve.c = c;
    for (int n : cadences) {
      if (progress) progress("ablation c=" + format_c(c) + " N=" + std::to_string(n));
      StrategyDescriptor s;
      s.kind = StrategyKind::detailing;
      s.c = c;
      s.cadence = n;
      s.ground_fix = false;
      std::vector<std::string> failures;
      auto outputs = run_all(s, models, blockings, seeds, failures);
      if (!failures.empty()) throw Error("ablation run failed: " + failures.front());
      const StrategyRow row = score(s, outputs, draws, truth, models.skeleton, {});
      curve.points.push_back({n, row.fid, row.jitter, row.ke, steps / n});
    }
    result.curves.push_back(std::move(curve));
  }
  return result;
}

}  // namespace blockdetail
