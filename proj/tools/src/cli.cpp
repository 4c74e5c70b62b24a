#include "blockdetail/service/cli.h"

#include "blockdetail/common/rng.h"
#include "blockdetail/detailing/trace_io.h"
#include "blockdetail/diffusion/checkpoint.h"
#include "blockdetail/eval/fid.h"
#include "blockdetail/eval/metrics.h"
#include "blockdetail/eval/runner.h"
#include "blockdetail/motion/motion_io.h"
#include "blockdetail/motion/synth.h"
#include "blockdetail/service/config.h"
#include "blockdetail/service/generate.h"
#include "blockdetail/service/http.h"
#include "blockdetail/service/jobs.h"
#include "blockdetail/service/models.h"

#include <CLI11.hpp>
#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <csignal>
#include <cstdio>
#include <ostream>
#include <thread>

namespace blockdetail {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::atomic<bool> g_stop{false};

extern "C" void on_stop_signal(int) { g_stop = true; }

const std::vector<std::string> kDefaultBenchStrategies = {
    "detailing,c=0.85", "r-notolerance", "diffusion-blending",
    "soft-mask",        "u-guidance",    "hard-impute",
};

struct Common {
  std::string config_path;
  std::vector<std::string> models;

  AppConfig config() const {
    return config_path.empty() ? AppConfig{} : AppConfig::load(config_path);
  }
};

void print_line(std::ostream& out, const json& doc) { out << doc.dump() << std::endl; }

fs::path sibling_trace_path(const fs::path& motion) {
  fs::path trace = motion;
  trace.replace_extension();
  trace += ".trace.json";
  return trace;
}

std::vector<fs::path> motion_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ValidationError("not a directory: " + dir.string(), "data");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && entry.path().extension() == ".json" &&
        name.rfind("clip_", 0) == 0) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ValidationError("no clip_*.json files in " + dir.string(), "data");
  return files;
}

std::string clip_name(const char* prefix, int i) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%s_%04d.json", prefix, i);
  return buffer;
}

// synth-data ---------------------------------------------------------------

struct SynthArgs {
  int count = 64;
  int frames = kDefaultClipLength;
  std::uint64_t seed = 0;
  std::string kind;
  std::string out;
  bool blocking = false;
};

int synth_data(const SynthArgs& a, const Common& common, std::ostream& out) {
  const AppConfig config = common.config();
  if (a.count < 1) throw ValidationError("must be >= 1", "count");
  std::vector<Motion> clips;
  if (a.kind.empty()) {
    clips = synth_dataset(a.count, a.frames, a.seed);
  } else {
    const MotionKind kind = parse_motion_kind(a.kind);
    for (int i = 0; i < a.count; ++i) {
      clips.push_back(synth_motion(kind, a.frames, derive_seed(a.seed, i)));
    }
  }
  fs::create_directories(a.out);
  BenchmarkSpec spec = config.benchmark;
  spec.clip_length = a.frames;
  for (int i = 0; i < a.count; ++i) {
    save_motion(clips[i], fs::path(a.out) / clip_name("clip", i));
    if (a.blocking) {
      const BlockingDraw draw = make_blocking(clips[i], spec, blocking_seed(a.seed, i));
      save_blocking(draw.blocking, fs::path(a.out) / clip_name("blocking", i));
    }
  }
  print_line(out, {{"clips", a.count}, {"frames", a.frames}, {"out", a.out}});
  return kExitOk;
}

// train --------------------------------------------------------------------

struct TrainArgs {
  std::string mode;
  std::string data;
  int clips = 512;
  std::uint64_t data_seed = 1;
  std::optional<int> iterations;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool quiet = false;
};

int train(const TrainArgs& a, const Common& common, std::ostream& out, std::ostream& err) {
  const AppConfig config = common.config();
  const DenoiserMode mode = parse_denoiser_mode(a.mode);
  TrainingConfig tc = config.training;
  if (a.iterations) tc.iterations = *a.iterations;
  if (a.seed) tc.seed = *a.seed;
  tc.validate();

  std::vector<Motion> dataset;
  json data_source;
  if (!a.data.empty()) {
    for (const fs::path& file : motion_files(a.data)) dataset.push_back(load_motion(file));
    data_source = {{"dir", fs::absolute(a.data).string()}, {"clips", dataset.size()}};
  } else {
    if (a.clips < 1) throw ValidationError("must be >= 1", "clips");
    dataset = synth_dataset(a.clips, config.benchmark.clip_length, a.data_seed);
    data_source = {{"synthetic", a.clips}, {"seed", a.data_seed},
                   {"frames", config.benchmark.clip_length}};
  }

  const int report_every = std::max(1, tc.iterations / 10);
  TrainingProgress progress;
  if (!a.quiet) {
    progress = [&](int iteration, double loss) {
      if ((iteration + 1) % report_every == 0) {
        print_line(err, {{"iteration", iteration + 1}, {"loss", loss}});
      }
    };
  }
  const TrainingResult result = train_denoiser(dataset, mode, tc, progress);

  fs::path path = a.out;
  if (path.empty()) {
    const json address = {{"mode", to_string(mode)}, {"training", tc.to_json()},
                          {"data", data_source}};
    path = data_root() / "checkpoints" / hex_hash(address) /
           (mode == DenoiserMode::unconditioned ? "u.ckpt" : "r.ckpt");
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  save_checkpoint(checkpoint_from(result), path);
  print_line(out, {{"checkpoint", path.string()},
                   {"mode", to_string(mode)},
                   {"clips", result.clip_count},
                   {"iterations", tc.iterations},
                   {"final_loss", result.final_loss}});
  return kExitOk;
}

// generate -----------------------------------------------------------------

struct GenerateArgs {
  std::string blocking;
  std::string out;
  std::string trace;
  std::string strategy = "detailing";
  std::uint64_t seed = 0;
};

int generate_cmd(const GenerateArgs& a, const Common& common, std::ostream& out) {
  const AppConfig config = common.config();
  json payload = {{"blocking", parse_json(read_text_file(a.blocking))},
                  {"strategy", a.strategy},
                  {"seed", a.seed}};
  if (!common.models.empty()) payload["models"] = common.models;
  const GenerationRequest request = GenerationRequest::from_json(payload, config.refinement);
  ModelRegistry registry(config);
  const ModelSet models = registry.resolve(request.models);
  const GenerationResult result = generate(request, models, a.seed);

  if (fs::path(a.out).has_parent_path()) fs::create_directories(fs::path(a.out).parent_path());
  write_text_file(a.out, motion_payload(result.motion));
  json summary = {{"motion", a.out}, {"seed", result.seed},
                  {"strategy", request.strategy.label()}, {"models", models.description()}};
  if (result.trace) {
    const fs::path trace_path = a.trace.empty() ? sibling_trace_path(a.out) : fs::path(a.trace);
    write_text_file(trace_path, trace_payload(*result.trace));
    summary["trace"] = trace_path.string();
    summary["refinement_events"] = result.trace->events.size();
  }
  print_line(out, summary);
  return kExitOk;
}

// bench / ablate-n -----------------------------------------------------------

struct BenchArgs {
  std::vector<std::string> strategies;
  std::optional<int> count;
  std::optional<std::uint64_t> seed;
  std::string out;
};

BenchmarkSpec bench_spec(const AppConfig& config, std::optional<int> count,
                         std::optional<std::uint64_t> seed) {
  BenchmarkSpec spec = config.benchmark;
  if (count) spec.count = *count;
  if (seed) spec.seed = *seed;
  spec.validate();
  return spec;
}

int bench(const BenchArgs& a, const Common& common, std::ostream& out, std::ostream& err) {
  const AppConfig config = common.config();
  const BenchmarkSpec spec = bench_spec(config, a.count, a.seed);
  std::vector<StrategyDescriptor> strategies;
  for (const std::string& text : a.strategies.empty() ? kDefaultBenchStrategies : a.strategies) {
    strategies.push_back(resolve_strategy(text, config.refinement));
  }
  ModelRegistry registry(config);
  const ModelSet models = registry.resolve(common.models);
  const BenchmarkRun run =
      run_benchmark(strategies, models.strategy_models(), benchmark_clips(spec), spec,
                    models.description(), [&](const std::string& message) {
                      print_line(err, {{"progress", message}});
                    });
  if (!a.out.empty()) write_text_file(a.out, run.report.to_json().dump(2) + "\n");
  out << run.report.to_text();
  out.flush();
  return kExitOk;
}

struct AblateArgs {
  std::vector<int> cadences{10, 20, 50, 100, 200, 500, 1000};
  std::vector<double> c_values{0.85};
  std::optional<int> count;
  std::optional<std::uint64_t> seed;
  std::string out;
};

int ablate(const AblateArgs& a, const Common& common, std::ostream& out, std::ostream& err) {
  const AppConfig config = common.config();
  const BenchmarkSpec spec = bench_spec(config, a.count, a.seed);
  ModelRegistry registry(config);
  const ModelSet models = registry.resolve(common.models);
  const AblationResult result =
      ablate_n(models.strategy_models(), benchmark_clips(spec), spec, a.cadences, a.c_values,
               [&](const std::string& message) { print_line(err, {{"progress", message}}); });
  fs::create_directories(a.out);
  write_text_file(fs::path(a.out) / "ablate_n.json", result.to_json().dump(2) + "\n");
  json curves = json::array();
  for (const fs::path& file : result.save_curves(a.out)) curves.push_back(file.string());
  for (const AblationCurve& curve : result.curves) {
    out << "c=" << curve.c << "\n";
    for (const AblationPoint& p : curve.points) {
      out << "  N=" << p.cadence << "  FID=" << p.fid << "  events=" << p.events << "\n";
    }
    out << "  best N=" << curve.best_cadence() << "\n";
  }
  print_line(out, {{"out", a.out}, {"curves", curves}});
  return kExitOk;
}

// metrics ------------------------------------------------------------------

struct MetricsArgs {
  std::vector<std::string> files;
  std::string blocking;
  std::vector<std::string> reference;
  int radius = 10;
};

int metrics(const MetricsArgs& a, std::ostream& out) {
  const SkeletonSpec skeleton = SkeletonSpec::desk();
  std::optional<BlockingSet> blocking;
  if (!a.blocking.empty()) blocking = load_blocking(a.blocking);
  json clips = json::array();
  std::vector<Motion> motions;
  double footskate_sum = 0.0, jitter_sum = 0.0, ke_sum = 0.0;
  for (const std::string& file : a.files) {
    motions.push_back(load_motion(file));
    const MotionArray& frames = motions.back().frames();
    json row = {{"path", file}, {"footskate", footskate(frames, skeleton)}};
    footskate_sum += row["footskate"].get<double>();
    if (frames.frames() >= 4) {
      row["jitter"] = jitter(frames);
      jitter_sum += row["jitter"].get<double>();
    }
    if (blocking) {
      row["ke"] = keyframe_error(*blocking, frames, a.radius);
      ke_sum += row["ke"].get<double>();
    }
    clips.push_back(std::move(row));
  }
  const double n = static_cast<double>(motions.size());
  json doc = {{"metric_version", kMetricVersion}, {"clips", clips}};
  doc["mean"] = {{"footskate", footskate_sum / n}};
  if (clips.front().contains("jitter")) doc["mean"]["jitter"] = jitter_sum / n;
  if (blocking) doc["mean"]["ke"] = ke_sum / n;
  if (!a.reference.empty()) {
    std::vector<Motion> reference;
    for (const std::string& file : a.reference) reference.push_back(load_motion(file));
    doc["fid"] = fid(motions, reference);
  }
  print_line(out, doc);
  return kExitOk;
}

// serve --------------------------------------------------------------------

struct ServeArgs {
  std::optional<std::string> host;
  std::optional<int> port;
  std::optional<int> workers;
  std::string data_dir;
};

int serve(const ServeArgs& a, const Common& common, std::ostream& out) {
  AppConfig config = common.config();
  if (a.host) config.service.host = *a.host;
  if (a.port) config.service.port = *a.port;
  if (a.workers) config.service.workers = *a.workers;
  config.validate();
  auto registry = std::make_shared<ModelRegistry>(config, common.models);
  registry->resolve({});
  JobService jobs(registry, a.data_dir.empty() ? data_root() : fs::path(a.data_dir));
  auto server = make_http_server(jobs);

  int port = config.service.port;
  if (port == 0) {
    port = server->bind_to_any_port(config.service.host);
  } else if (!server->bind_to_port(config.service.host, port)) {
    port = -1;
  }
  if (port < 0) {
    throw Error("cannot listen on " + config.service.host + ":" +
                std::to_string(config.service.port));
  }
  print_line(out, {{"listening", "http://" + config.service.host + ":" + std::to_string(port)},
                   {"data_dir", jobs.data_dir().string()},
                   {"models", registry->resolve({}).description()}});

  g_stop = false;
  std::signal(SIGINT, on_stop_signal);
  std::signal(SIGTERM, on_stop_signal);
  std::atomic<bool> done{false};
  std::thread watcher([&] {
    while (!done && !g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    server->stop();
  });
  server->listen_after_bind();
  done = true;
  watcher.join();
  jobs.shutdown();
  return kExitOk;
}

// dispatch -----------------------------------------------------------------

json error_json(const std::exception& e) {
  if (const auto* request = dynamic_cast<const RequestError*>(&e)) {
    json fields = json::array();
    for (const FieldIssue& issue : request->issues()) {
      fields.push_back({{"field", issue.field}, {"message", issue.message}});
    }
    return {{"error", "validation_error"}, {"message", e.what()}, {"fields", fields}};
  }
  if (const auto* validation = dynamic_cast<const ValidationError*>(&e)) {
    return {{"error", "validation_error"}, {"message", e.what()}, {"field", validation->field()}};
  }
  if (const auto* parse = dynamic_cast<const ParseError*>(&e)) {
    return {{"error", "parse_error"}, {"message", e.what()}, {"byte_offset", parse->byte_offset()}};
  }
  if (dynamic_cast<const fs::filesystem_error*>(&e)) {
    return {{"error", "io_error"}, {"message", e.what()}};
  }
  return {{"error", "error"}, {"message", e.what()}};
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Motion detailing from blocking poses", "blockdetail"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--config", common.config_path, "Config file (JSON, format_version 1)")
      ->check(CLI::ExistingFile);

  auto add_models = [&](CLI::App* sub) {
    sub->add_option("--model", common.models,
                    "Model identifier: checkpoint path, gaussian, gaussian-u or gaussian-r");
  };

  SynthArgs synth_args;
  auto* synth_cmd = app.add_subcommand("synth-data", "Write procedural motion clips");
  synth_cmd->add_option("--count", synth_args.count, "Number of clips");
  synth_cmd->add_option("--frames", synth_args.frames, "Frames per clip");
  synth_cmd->add_option("--seed", synth_args.seed, "Dataset seed");
  synth_cmd->add_option("--kind", synth_args.kind, "walk, kick, jump or idle (default: mixed)");
  synth_cmd->add_option("--out", synth_args.out, "Output directory")->required();
  synth_cmd->add_flag("--blocking", synth_args.blocking,
                      "Also write a benchmark blocking set per clip");

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a U or R denoiser");
  train_cmd->add_option("--mode", train_args.mode, "U or R")->required();
  train_cmd->add_option("--data", train_args.data, "Directory of clip_*.json motions");
  train_cmd->add_option("--clips", train_args.clips, "Synthetic clips when --data is absent");
  train_cmd->add_option("--data-seed", train_args.data_seed, "Seed of the synthetic clips");
  train_cmd->add_option("--iterations", train_args.iterations, "Override training.iterations");
  train_cmd->add_option("--seed", train_args.seed, "Override training.seed");
  train_cmd->add_option("--out", train_args.out, "Checkpoint path");
  train_cmd->add_flag("--quiet", train_args.quiet, "No progress lines");

  GenerateArgs gen_args;
  auto* gen_cmd = app.add_subcommand("generate", "Detail one blocking set into a motion");
  gen_cmd->add_option("--blocking", gen_args.blocking, "Blocking set file")
      ->required()
      ->check(CLI::ExistingFile);
  gen_cmd->add_option("--out", gen_args.out, "Output motion file")->required();
  gen_cmd->add_option("--trace", gen_args.trace, "Trace file (default: <out>.trace.json)");
  gen_cmd->add_option("--strategy", gen_args.strategy, "Strategy, e.g. detailing,c=0.85,n=100");
  gen_cmd->add_option("--seed", gen_args.seed, "Sampling seed");
  add_models(gen_cmd);

  BenchArgs bench_args;
  auto* bench_cmd = app.add_subcommand("bench", "Score strategies on the synthetic benchmark");
  bench_cmd->add_option("--strategy", bench_args.strategies, "Strategy (repeatable)");
  bench_cmd->add_option("--count", bench_args.count, "Benchmark clips");
  bench_cmd->add_option("--seed", bench_args.seed, "Benchmark seed");
  bench_cmd->add_option("--out", bench_args.out, "Report file (JSON)");
  add_models(bench_cmd);

  AblateArgs ablate_args;
  auto* ablate_cmd = app.add_subcommand("ablate-n", "FID as a function of the cadence N");
  ablate_cmd->add_option("--n", ablate_args.cadences, "Cadences")->delimiter(',');
  ablate_cmd->add_option("--c", ablate_args.c_values, "Tolerances")->delimiter(',');
  ablate_cmd->add_option("--count", ablate_args.count, "Benchmark clips");
  ablate_cmd->add_option("--seed", ablate_args.seed, "Benchmark seed");
  ablate_cmd->add_option("--out", ablate_args.out, "Output directory")->required();
  add_models(ablate_cmd);

  MetricsArgs metrics_args;
  auto* metrics_cmd = app.add_subcommand("metrics", "FootSkate, Jitter, KE and FID of motions");
  metrics_cmd->add_option("files", metrics_args.files, "Motion files")
      ->required()
      ->check(CLI::ExistingFile);
  metrics_cmd->add_option("--blocking", metrics_args.blocking, "Blocking set for KE")
      ->check(CLI::ExistingFile);
  metrics_cmd->add_option("--reference", metrics_args.reference, "Reference motions for FID")
      ->check(CLI::ExistingFile);
  metrics_cmd->add_option("--radius", metrics_args.radius, "KE search radius");

  ServeArgs serve_args;
  auto* serve_cmd = app.add_subcommand("serve", "Run the job service");
  serve_cmd->add_option("--host", serve_args.host, "Bind address");
  serve_cmd->add_option("--port", serve_args.port, "Port (0 picks a free one)");
  serve_cmd->add_option("--workers", serve_args.workers, "Worker threads");
  serve_cmd->add_option("--data-dir", serve_args.data_dir,
                        "Persistence root (default: BLOCKDETAIL_DATA_DIR)");
  serve_cmd->add_option("--model", common.models, "Default model identifiers");

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n";
    const auto parsed = app.get_subcommands();
    err << (parsed.empty() ? app.help() : parsed.front()->help());
    return kExitUsage;
  }

  try {
    if (*synth_cmd) return synth_data(synth_args, common, out);
    if (*train_cmd) return train(train_args, common, out, err);
    if (*gen_cmd) return generate_cmd(gen_args, common, out);
    if (*bench_cmd) return bench(bench_args, common, out, err);
    if (*ablate_cmd) return ablate(ablate_args, common, out, err);
    if (*metrics_cmd) return metrics(metrics_args, out);
    if (*serve_cmd) return serve(serve_args, common, out);
  } catch (const std::exception& e) {
    print_line(err, error_json(e));
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace blockdetail
