#include "blockdetail/diffusion/training.h"

#include "blockdetail/common/error.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

namespace blockdetail {

using nlohmann::json;

void TrainingConfig::validate() const {
  auto require = [](bool ok, const char* field, const char* message) {
    if (!ok) throw ValidationError(message, std::string("training.") + field);
  };
  require(iterations >= 1, "iterations", "must be >= 1");
  require(batch_size >= 1, "batch_size", "must be >= 1");
  require(learning_rate > 0.0, "learning_rate", "must be positive");
  require(final_learning_rate >= 0.0 && final_learning_rate <= learning_rate,
          "final_learning_rate", "must lie in [0, learning_rate]");
  require(warmup >= 0, "warmup", "must be >= 0");
  require(grad_clip > 0.0, "grad_clip", "must be positive");
  require(hidden >= 1, "hidden", "must be >= 1");
  require(depth >= 0, "depth", "must be >= 0");
  require(time_embedding >= 2 && time_embedding % 2 == 0, "time_embedding",
          "must be even and >= 2");
  require(temporal_length >= 0.0 && std::isfinite(temporal_length), "temporal_length",
          "must be finite and >= 0");
  require(steps >= 1, "steps", "must be >= 1");
  require(max_keys >= 2, "max_keys", "must be >= 2");
  require(max_time_offset >= 0, "max_time_offset", "must be >= 0");
}

json TrainingConfig::to_json() const {
  return {{"iterations", iterations},
          {"batch_size", batch_size},
          {"learning_rate", learning_rate},
          {"final_learning_rate", final_learning_rate},
          {"warmup", warmup},
          {"grad_clip", grad_clip},
          {"hidden", hidden},
          {"depth", depth},
          {"time_embedding", time_embedding},
          {"temporal_length", temporal_length},
          {"steps", steps},
          {"seed", seed},
          {"max_keys", max_keys},
          {"max_time_offset", max_time_offset}};
}

TrainingConfig TrainingConfig::from_json(const json& doc) {
  if (!doc.is_object()) throw ValidationError("expected an object", "training");
  TrainingConfig c;
  for (const auto& [key, value] : doc.items()) {
    const std::string path = "training." + key;
    auto as_int = [&] {
      if (!value.is_number_integer()) throw ValidationError("expected an integer", path);
      return value.get<int>();
    };
    auto as_double = [&] {
      if (!value.is_number()) throw ValidationError("expected a number", path);
      return value.get<double>();
    };
    if (key == "iterations") c.iterations = as_int();
    else if (key == "batch_size") c.batch_size = as_int();
    else if (key == "learning_rate") c.learning_rate = as_double();
    else if (key == "final_learning_rate") c.final_learning_rate = as_double();
    else if (key == "warmup") c.warmup = as_int();
    else if (key == "grad_clip") c.grad_clip = as_double();
    else if (key == "hidden") c.hidden = as_int();
    else if (key == "depth") c.depth = as_int();
    else if (key == "time_embedding") c.time_embedding = as_int();
    else if (key == "temporal_length") c.temporal_length = as_double();
    else if (key == "steps") c.steps = as_int();
    else if (key == "seed") {
      if (!value.is_number_unsigned() && !value.is_number_integer()) {
        throw ValidationError("expected an integer", path);
      }
      c.seed = value.get<std::uint64_t>();
    }
    else if (key == "max_keys") c.max_keys = as_int();
    else if (key == "max_time_offset") c.max_time_offset = as_int();
    else throw ValidationError("unknown training setting", path);
  }
  c.validate();
  return c;
}

Condition make_training_condition(const MotionArray& clean, int max_keys, int max_offset,
                                  Rng& rng) {
  const int frames = clean.frames();
  const int upper = std::max(1, std::min(max_keys, frames));
  const int lower = std::min(2, upper);
  const int count = std::uniform_int_distribution<int>(lower, upper)(rng);

  std::vector<int> all(frames);
  for (int f = 0; f < frames; ++f) all[f] = f;
  std::vector<int> sources;
  std::sample(all.begin(), all.end(), std::back_inserter(sources), count, rng);

  std::uniform_int_distribution<int> offset(-max_offset, max_offset);
  std::set<int> taken;
  std::vector<std::pair<int, int>> placed;  // (target frame, source frame)
  for (int src : sources) {
    int target = -1;
    for (int attempt = 0; attempt < 64; ++attempt) {
      const int candidate = std::clamp(src + offset(rng), 0, frames - 1);
      if (!taken.count(candidate)) {
        target = candidate;
        break;
      }
    }
    if (target < 0) continue;
    taken.insert(target);
    placed.emplace_back(target, src);
  }
  std::sort(placed.begin(), placed.end());

  BlockingSet blocking;
  blocking.timeline_length = frames;
  for (const auto& [target, src] : placed) {
    BlockingPose key;
    key.frame = target;
    key.pose = clean.pose(src);
    key.specified.assign(clean.joints(), true);
    key.tolerance = Eigen::VectorXd::Ones(clean.joints());
    blocking.poses.push_back(std::move(key));
  }
  return build_condition(blocking);
}

TrainingResult train_denoiser(const std::vector<Motion>& dataset, DenoiserMode mode,
                              const TrainingConfig& config, const TrainingProgress& progress) {
  config.validate();
  if (dataset.empty()) throw ValidationError("training dataset is empty", "dataset");
  std::vector<MotionArray> clips;
  clips.reserve(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (!(dataset[i].frames().shape() == dataset.front().frames().shape())) {
      throw ValidationError("inconsistent clip shape: expected " +
                                to_string(dataset.front().frames().shape()) + ", got " +
                                to_string(dataset[i].frames().shape()),
                            "dataset[" + std::to_string(i) + "]");
    }
    clips.push_back(dataset[i].frames());
  }

  NetworkConfig net_config;
  net_config.mode = mode;
  net_config.shape = clips.front().shape();
  net_config.hidden = config.hidden;
  net_config.depth = config.depth;
  net_config.time_embedding = config.time_embedding;
  net_config.temporal_length = config.temporal_length;
  auto net = std::make_shared<TinyDenoiserNet>(net_config, NoiseSchedule(config.steps),
                                               ChannelStats::fit(clips));
  net->initialize(derive_seed(config.seed, 1));
  const NoiseSchedule& schedule = net->schedule();

  Rng rng(derive_seed(config.seed, 2));
  std::uniform_int_distribution<std::size_t> pick(0, clips.size() - 1);
  std::uniform_int_distribution<int> pick_t(1, schedule.steps());
  std::normal_distribution<double> normal;

  const Eigen::Index n = net->parameter_count();
  Eigen::VectorXd params = net->parameters();
  Eigen::VectorXd grad(n);
  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd m2 = Eigen::VectorXd::Zero(n);
  constexpr double beta1 = 0.9;
  constexpr double beta2 = 0.999;
  constexpr double eps = 1e-8;

  const int batch = config.batch_size;
  std::vector<MotionArray> targets(batch);
  std::vector<MotionArray> noisy(batch);
  std::vector<Condition> conditions(mode == DenoiserMode::retiming ? batch : 0);
  std::vector<int> ts(batch);
  const int tail = std::max(1, std::min(100, config.iterations / 10));
  double tail_sum = 0.0;

  for (int it = 0; it < config.iterations; ++it) {
    for (int b = 0; b < batch; ++b) {
      const MotionArray& clean = clips[pick(rng)];
      ts[b] = pick_t(rng);
      MotionArray noise(clean.shape());
      double* p = noise.data().data();
      for (Eigen::Index i = 0; i < noise.data().size(); ++i) p[i] = normal(rng);
      noisy[b] = forward_noise(schedule, clean, ts[b], noise);
      if (mode == DenoiserMode::retiming) {
        conditions[b] =
            make_training_condition(clean, config.max_keys, config.max_time_offset, rng);
      }
      targets[b] = clean;
    }
    const double value = net->loss(noisy, conditions, ts, targets, &grad);
    if (!std::isfinite(value) || !grad.allFinite()) {
      throw Error("training diverged at iteration " + std::to_string(it));
    }
    const double norm = grad.norm();
    if (norm > config.grad_clip) grad *= config.grad_clip / norm;

    double lr;
    if (it < config.warmup) {
      lr = config.learning_rate * (it + 1) / config.warmup;
    } else {
      const double span = std::max(1, config.iterations - config.warmup);
      const double progress_frac = (it - config.warmup) / span;
      lr = config.final_learning_rate + 0.5 * (config.learning_rate - config.final_learning_rate) *
                                            (1.0 + std::cos(std::numbers::pi * progress_frac));
    }
    const double step = it + 1;
    const double c1 = 1.0 - std::pow(beta1, step);
    const double c2 = 1.0 - std::pow(beta2, step);
    m1 = beta1 * m1 + (1.0 - beta1) * grad;
    m2 = beta2 * m2 + (1.0 - beta2) * grad.cwiseAbs2();
    params.array() -= lr * (m1.array() / c1) / ((m2.array() / c2).sqrt() + eps);
    net->set_parameters(params);

    if (it >= config.iterations - tail) tail_sum += value;
    if (progress) progress(it, value);
  }

  TrainingResult result;
  result.net = std::move(net);
  result.config = config;
  result.clip_count = static_cast<int>(clips.size());
  result.final_loss = tail_sum / tail;
  return result;
}

}  // namespace blockdetail
