#include "blockdetail/service/config.h"

#include "blockdetail/common/error.h"
#include "blockdetail/motion/motion_io.h"

#include <cstdlib>
#include <limits>

namespace blockdetail {

using nlohmann::json;

namespace {

const json& expect_object(const json& doc, const std::string& path) {
  if (!doc.is_object()) throw ValidationError("expected an object", path);
  return doc;
}

int get_int(const json& value, const std::string& path) {
  if (!value.is_number_integer()) throw ValidationError("expected an integer", path);
  const auto v = value.get<std::int64_t>();
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
    throw ValidationError("integer out of range", path);
  }
  return static_cast<int>(v);
}

double get_number(const json& value, const std::string& path) {
  if (!value.is_number()) throw ValidationError("expected a number", path);
  return value.get<double>();
}

std::uint64_t get_seed(const json& value, const std::string& path) {
  if (!value.is_number_unsigned()) throw ValidationError("expected a non-negative integer", path);
  return value.get<std::uint64_t>();
}

GaussianSettings gaussian_from_json(const json& doc) {
  expect_object(doc, "gaussian");
  GaussianSettings g;
  for (const auto& [key, value] : doc.items()) {
    const std::string path = "gaussian." + key;
    if (key == "variance") g.kernel.variance = get_number(value, path);
    else if (key == "length") g.kernel.length = get_number(value, path);
    else if (key == "jitter") g.kernel.jitter = get_number(value, path);
    else if (key == "obs_variance") g.obs_variance = get_number(value, path);
    else if (key == "clips") g.clips = get_int(value, path);
    else if (key == "seed") g.seed = get_seed(value, path);
    else throw ValidationError("unknown gaussian setting", path);
  }
  return g;
}

ServiceSettings service_from_json(const json& doc) {
  expect_object(doc, "service");
  ServiceSettings s;
  for (const auto& [key, value] : doc.items()) {
    const std::string path = "service." + key;
    if (key == "host") {
      if (!value.is_string()) throw ValidationError("expected a string", path);
      s.host = value.get<std::string>();
    } else if (key == "port") {
      s.port = get_int(value, path);
    } else if (key == "workers") {
      s.workers = get_int(value, path);
    } else if (key == "seed") {
      s.seed = get_seed(value, path);
    } else {
      throw ValidationError("unknown service setting", path);
    }
  }
  return s;
}

}  // namespace

void AppConfig::validate() const {
  schedule();
  refinement.validate();
  training.validate();
  benchmark.validate();
  if (!(gaussian.kernel.variance > 0.0)) throw ValidationError("must be > 0", "gaussian.variance");
  if (!(gaussian.kernel.length > 0.0)) throw ValidationError("must be > 0", "gaussian.length");
  if (!(gaussian.kernel.jitter >= 0.0)) throw ValidationError("must be >= 0", "gaussian.jitter");
  if (!(gaussian.obs_variance > 0.0)) {
    throw ValidationError("must be > 0", "gaussian.obs_variance");
  }
  if (gaussian.clips < 1) throw ValidationError("must be >= 1", "gaussian.clips");
  if (service.port < 0 || service.port > 65535) {
    throw ValidationError("must lie in [0, 65535]", "service.port");
  }
  if (service.workers < 1) throw ValidationError("must be >= 1", "service.workers");
}

json AppConfig::to_json() const {
  return {
      {"format_version", kFormatVersion},
      {"schedule", {{"steps", steps}, {"offset", schedule_offset}}},
      {"refinement", refinement.to_json()},
      {"training", training.to_json()},
      {"benchmark", benchmark.to_json()},
      {"gaussian",
       {{"variance", gaussian.kernel.variance},
        {"length", gaussian.kernel.length},
        {"jitter", gaussian.kernel.jitter},
        {"obs_variance", gaussian.obs_variance},
        {"clips", gaussian.clips},
        {"seed", gaussian.seed}}},
      {"service",
       {{"host", service.host},
        {"port", service.port},
        {"workers", service.workers},
        {"seed", service.seed}}},
  };
}

AppConfig AppConfig::from_json(const json& doc) {
  expect_object(doc, "config");
  AppConfig c;
  if (!doc.contains("format_version")) {
    throw ValidationError("missing format_version", "format_version");
  }
  if (doc.at("format_version") != kFormatVersion) {
    throw ValidationError("unsupported format_version", "format_version");
  }
  bool training_steps_set = false;
  for (const auto& [key, value] : doc.items()) {
    if (key == "format_version") {
      continue;
    } else if (key == "schedule") {
      expect_object(value, "schedule");
      for (const auto& [k, v] : value.items()) {
        if (k == "steps") c.steps = get_int(v, "schedule.steps");
        else if (k == "offset") c.schedule_offset = get_number(v, "schedule.offset");
        else throw ValidationError("unknown schedule setting", "schedule." + k);
      }
    } else if (key == "refinement") {
      c.refinement = RefinementConfig::from_json(value);
    } else if (key == "training") {
      c.training = TrainingConfig::from_json(value);
      training_steps_set = value.contains("steps");
    } else if (key == "benchmark") {
      c.benchmark = BenchmarkSpec::from_json(value);
    } else if (key == "gaussian") {
      c.gaussian = gaussian_from_json(value);
    } else if (key == "service") {
      c.service = service_from_json(value);
    } else {
      throw ValidationError("unknown config section", key);
    }
  }
  // The schedule length carries over to training unless training sets its own.
  if (!training_steps_set) c.training.steps = c.steps;
  c.validate();
  return c;
}

AppConfig AppConfig::load(const std::filesystem::path& path) {
  return from_json(parse_json(read_text_file(path)));
}

std::filesystem::path data_root() {
  if (const char* env = std::getenv("BLOCKDETAIL_DATA_DIR"); env && *env) return env;
  return std::filesystem::current_path() / "blockdetail-data";
}

}  // namespace blockdetail
