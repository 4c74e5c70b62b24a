#include "blockdetail/eval/benchmark.h"

#include "blockdetail/common/error.h"
#include "blockdetail/common/rng.h"
#include "blockdetail/motion/synth.h"

#include <algorithm>
#include <numeric>
#include <random>
#include <utility>

namespace blockdetail {

using nlohmann::json;

void BenchmarkSpec::validate() const {
  if (max_keys < 1) throw ValidationError("max_keys must be >= 1", "benchmark.max_keys");
  if (time_jitter < 0) throw ValidationError("time_jitter must be >= 0", "benchmark.time_jitter");
  if (clip_length < 2) throw ValidationError("clip_length must be >= 2", "benchmark.clip_length");
  if (count < 1) throw ValidationError("count must be >= 1", "benchmark.count");
  if (!(tolerance >= 0.0 && tolerance <= 1.0)) {
    throw ValidationError("tolerance must lie in [0, 1]", "benchmark.tolerance");
  }
}

json BenchmarkSpec::to_json() const {
  return {{"max_keys", max_keys},   {"time_jitter", time_jitter},
          {"clip_length", clip_length}, {"seed", seed},
          {"count", count},         {"tolerance", tolerance},
          {"keep_all_important", keep_all_important}};
}

BenchmarkSpec BenchmarkSpec::from_json(const json& doc) {
  if (!doc.is_object()) throw ValidationError("expected an object", "benchmark");
  BenchmarkSpec s;
  for (const auto& [key, value] : doc.items()) {
    const std::string path = "benchmark." + key;
    auto as_int = [&] {
      if (!value.is_number_integer()) throw ValidationError("expected an integer", path);
      return value.get<int>();
    };
    if (key == "max_keys") s.max_keys = as_int();
    else if (key == "time_jitter") s.time_jitter = as_int();
    else if (key == "clip_length") s.clip_length = as_int();
    else if (key == "count") s.count = as_int();
    else if (key == "seed") {
      if (!value.is_number_integer()) throw ValidationError("expected an integer", path);
      s.seed = value.get<std::uint64_t>();
    } else if (key == "tolerance") {
      if (!value.is_number()) throw ValidationError("expected a number", path);
      s.tolerance = value.get<double>();
    } else if (key == "keep_all_important") {
      if (!value.is_boolean()) throw ValidationError("expected a boolean", path);
      s.keep_all_important = value.get<bool>();
    } else {
      throw ValidationError("unknown benchmark setting", path);
    }
  }
  s.validate();
  return s;
}

BlockingDraw make_blocking(const Motion& gt, const BenchmarkSpec& spec, std::uint64_t seed,
                           const SkeletonSpec& skeleton) {
  spec.validate();
  const MotionArray& frames = gt.frames();
  const int f_count = frames.frames();
  if (f_count != spec.clip_length) {
    throw ValidationError("clip has F=" + std::to_string(f_count) + ", benchmark expects " +
                              std::to_string(spec.clip_length),
                          "clip_length");
  }
  if (frames.joints() != skeleton.joint_count() || frames.dims() != 3) {
    throw ValidationError("clip does not match skeleton (expected J=" +
                          std::to_string(skeleton.joint_count()) + ", D=3)");
  }

  Rng rng(seed);
  const int upper = std::max(1, std::min(spec.max_keys, f_count / 2));
  const int lower = std::min(2, upper);
  const int k = std::uniform_int_distribution<int>(lower, upper)(rng);

  std::vector<int> all(f_count);
  std::iota(all.begin(), all.end(), 0);
  std::vector<int> sources;
  std::sample(all.begin(), all.end(), std::back_inserter(sources), k, rng);

  const Pose neutral = neutral_pose(skeleton);
  std::bernoulli_distribution coin(0.5);
  std::vector<BlockingPose> keys;
  for (int src : sources) {
    BlockingPose key;
    key.pose = neutral;
    key.specified.assign(skeleton.joint_count(), false);
    key.tolerance = Eigen::VectorXd::Constant(skeleton.joint_count(), spec.tolerance);
    const Pose truth = frames.pose(src);
    for (int j : skeleton.important_joints) {
      const bool keep = j == 0 || spec.keep_all_important || coin(rng);
      if (!keep) continue;
      key.specified[j] = true;
      key.pose.set_position(j, truth.position(j));
    }
    keys.push_back(std::move(key));
  }

  // Offsets: redraw on collision; restart in the rare case a key's whole
  // window is occupied.
  std::uniform_int_distribution<int> offset(-spec.time_jitter, spec.time_jitter);
  std::vector<int> targets;
  for (int restart = 0;; ++restart) {
    if (restart == 1000) throw Error("could not place blocking keys without collisions");
    std::vector<bool> taken(f_count, false);
    targets.assign(k, -1);
    bool ok = true;
    for (int i = 0; i < k && ok; ++i) {
      ok = false;
      for (int attempt = 0; attempt < 200; ++attempt) {
        const int target = std::clamp(sources[i] + offset(rng), 0, f_count - 1);
        if (!taken[target]) {
          taken[target] = true;
          targets[i] = target;
          ok = true;
          break;
        }
      }
    }
    if (ok) break;
  }

  std::vector<int> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return targets[a] < targets[b]; });

  BlockingDraw draw;
  draw.blocking.timeline_length = f_count;
  for (int i : order) {
    keys[i].frame = targets[i];
    draw.source_frames.push_back(sources[i]);
    draw.offsets.push_back(targets[i] - sources[i]);
    draw.blocking.poses.push_back(std::move(keys[i]));
  }
  draw.blocking.validate_input(skeleton);
  return draw;
}

std::vector<Motion> benchmark_clips(const BenchmarkSpec& spec) {
  spec.validate();
  return synth_dataset(spec.count, spec.clip_length, derive_seed(spec.seed, 0x7e57c11b5ULL));
}

}  // namespace blockdetail
