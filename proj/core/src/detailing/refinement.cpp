#include "blockdetail/detailing/refinement.h"

#include "blockdetail/common/error.h"
#include "blockdetail/diffusion/sampler.h"
#include "blockdetail/motion/distance.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <utility>

namespace blockdetail {

using nlohmann::json;

void RefinementConfig::validate() const {
  if (cadence < 1) throw ValidationError("cadence N must be >= 1", "refinement.cadence");
  if (search_radius < 0) {
    throw ValidationError("search radius must be >= 0", "refinement.search_radius");
  }
  if (!(default_tolerance >= 0.0 && default_tolerance <= 1.0)) {
    throw ValidationError("default tolerance must lie in [0, 1]", "refinement.default_tolerance");
  }
}

json RefinementConfig::to_json() const {
  return {{"cadence", cadence},
          {"search_radius", search_radius},
          {"apply_ground_fix", apply_ground_fix},
          {"default_tolerance", default_tolerance}};
}

RefinementConfig RefinementConfig::from_json(const json& doc) {
  if (!doc.is_object()) throw ValidationError("expected an object", "refinement");
  RefinementConfig c;
  for (const auto& [key, value] : doc.items()) {
    const std::string path = "refinement." + key;
    if (key == "cadence" || key == "search_radius") {
      if (!value.is_number_integer()) throw ValidationError("expected an integer", path);
      (key == "cadence" ? c.cadence : c.search_radius) = value.get<int>();
    } else if (key == "apply_ground_fix") {
      if (!value.is_boolean()) throw ValidationError("expected a boolean", path);
      c.apply_ground_fix = value.get<bool>();
    } else if (key == "default_tolerance") {
      if (!value.is_number()) throw ValidationError("expected a number", path);
      c.default_tolerance = value.get<double>();
    } else {
      throw ValidationError("unknown refinement setting", path);
    }
  }
  c.validate();
  return c;
}

bool is_refinement_step(int t, int cadence) { return t >= 1 && cadence >= 1 && t % cadence == 0; }

int match_pose(const MotionArray& proposal, const BlockingPose& key, int radius) {
  if (radius < 0) throw ValidationError("search radius must be >= 0", "search_radius");
  const int lo = std::max(0, key.frame - radius);
  const int hi = std::min(proposal.frames() - 1, key.frame + radius);
  if (lo > hi) throw ValidationError("key frame outside the proposal", "frame");
  int best = -1;
  double best_distance = 0.0;
  for (int f = lo; f <= hi; ++f) {
    const double d = pose_distance(proposal, f, key.pose, key.specified);
    if (best < 0 || d < best_distance ||
        (d == best_distance && std::abs(f - key.frame) < std::abs(best - key.frame))) {
      best = f;
      best_distance = d;
    }
  }
  return best;
}

Pose blend_key(const BlockingPose& key, const Pose& proposal_pose) {
  const Pose& x = key.pose;
  if (x.joints() != proposal_pose.joints() || x.dims() != proposal_pose.dims()) {
    throw ValidationError("proposal pose shape differs from key", "proposal");
  }
  if (key.tolerance.size() != x.joints()) {
    throw ValidationError("tolerance needs one entry per joint", "tolerance");
  }
  Pose out(x.joints(), x.dims());
  for (int j = 0; j < x.joints(); ++j) {
    const double c = key.tolerance[j];
    if (!(c >= 0.0 && c <= 1.0)) {
      throw ValidationError("tolerance outside [0, 1]", "tolerance[" + std::to_string(j) + "]");
    }
    for (int d = 0; d < x.dims(); ++d) {
      if (c == 1.0) {
        out(j, d) = x(j, d);
      } else if (c == 0.0) {
        out(j, d) = proposal_pose(j, d);
      } else {
        out(j, d) = c * x(j, d) + (1.0 - c) * proposal_pose(j, d);
      }
    }
  }
  return out;
}

BlockingPose ground_fix(const BlockingPose& key, const SkeletonSpec& skeleton) {
  if (skeleton.foot_joints.empty() || key.pose.dims() < 2) return key;
  BlockingPose out = key;
  Pose& p = out.pose;
  auto height = [&](int foot) { return p(0, 1) + p(foot, 1); };

  bool all_below = true;
  double deepest = 0.0;
  for (int foot : skeleton.foot_joints) {
    const double h = height(foot);
    if (!(h < 0.0)) all_below = false;
    deepest = std::max(deepest, -h);
  }
  if (deepest == 0.0) return key;
  if (all_below) p(0, 1) += deepest;
  for (int foot : skeleton.foot_joints) {
    if (height(foot) < 0.0) p(foot, 1) = -p(0, 1);
  }
  return out;
}

RefinementOutcome refine_condition(const BlockingSet& blocking, const MotionArray& proposal,
                                   const RefinementConfig& config, const SkeletonSpec& skeleton,
                                   int t) {
  config.validate();
  blocking.validate();
  if (!(proposal.shape() == blocking.shape())) {
    throw ValidationError("proposal shape " + to_string(proposal.shape()) +
                              " does not match blocking shape " + to_string(blocking.shape()),
                          "proposal");
  }
  RefinementOutcome out;
  out.blocking = blocking;
  out.event.t = t;
  for (int k = 0; k < blocking.size(); ++k) {
    BlockingPose& key = out.blocking.poses[k];
    KeyRefinement record;
    record.key_index = k;
    record.frame = key.frame;
    record.matched_frame = match_pose(proposal, key, config.search_radius);
    record.before = key.pose;
    record.proposal = proposal.pose(record.matched_frame);
    Pose blended = blend_key(key, record.proposal);
    const bool changed = !(blended == key.pose);
    key.pose = std::move(blended);
    if (config.apply_ground_fix && changed) {
      BlockingPose fixed = ground_fix(key, skeleton);
      record.ground_fixed = !(fixed.pose == key.pose);
      key = std::move(fixed);
    }
    record.after = key.pose;
    out.event.keys.push_back(std::move(record));
  }
  out.condition = build_condition(out.blocking);
  out.event.condition = out.condition;
  return out;
}

DetailResult detail_motion(const BlockingSet& blocking, const DenoiserR& r, const DenoiserU& u,
                           const RefinementConfig& config, std::uint64_t seed,
                           const SkeletonSpec& skeleton, const DetailProgress& progress) {
  const std::uint64_t seeds[] = {seed};
  return std::move(detail_motion_batch({&blocking, 1}, r, u, config, seeds, skeleton, progress)[0]);
}

std::vector<DetailResult> detail_motion_batch(std::span<const BlockingSet> blockings,
                                              const DenoiserR& r, const DenoiserU& u,
                                              const RefinementConfig& config,
                                              std::span<const std::uint64_t> seeds,
                                              const SkeletonSpec& skeleton,
                                              const DetailProgress& progress) {
  config.validate();
  if (blockings.size() != seeds.size()) {
    throw ValidationError("need one seed per blocking set", "seeds");
  }
  if (!(r.schedule() == u.schedule())) {
    throw ValidationError("R and U must share one noise schedule", "model");
  }
  if (!(r.shape() == u.shape())) {
    throw ValidationError("R and U disagree on motion shape", "model");
  }
  const std::size_t chains = blockings.size();
  std::vector<BlockingSet> current(blockings.begin(), blockings.end());
  std::vector<Condition> conditions;
  conditions.reserve(chains);
  for (std::size_t i = 0; i < chains; ++i) {
    current[i].validate();
    if (!(current[i].shape() == r.shape())) {
      throw ValidationError("blocking shape " + to_string(current[i].shape()) +
                                " does not match model shape " + to_string(r.shape()),
                            "blocking");
    }
    conditions.push_back(build_condition(current[i]));
  }

  std::vector<RefinementTrace> traces(chains);
  for (RefinementTrace& trace : traces) {
    trace.steps = r.schedule().steps();
    trace.config = config;
  }
  std::vector<MotionArray> proposals(chains);

  auto hook = [&](int t, std::span<const MotionArray> noisy, std::span<const MotionArray>,
                  std::span<Condition> conds) {
    const bool fire = is_refinement_step(t, config.cadence);
    if (fire) {
      u.predict_batch(noisy, t, proposals);
      for (std::size_t i = 0; i < chains; ++i) {
        RefinementOutcome outcome = refine_condition(current[i], proposals[i], config, skeleton, t);
        current[i] = std::move(outcome.blocking);
        conds[i] = std::move(outcome.condition);
        traces[i].events.push_back(std::move(outcome.event));
      }
    }
    if (progress) {
      for (std::size_t i = 0; i < chains; ++i) {
        progress(i, t, fire ? &traces[i].events.back() : nullptr);
      }
    }
  };

  std::vector<MotionArray> outputs =
      run_conditioned_batch(r, seeds, std::move(conditions), hook);

  std::vector<DetailResult> results;
  results.reserve(chains);
  for (std::size_t i = 0; i < chains; ++i) {
    results.push_back({Motion(std::move(outputs[i])), std::move(traces[i]), std::move(current[i])});
  }
  return results;
}

}  // namespace blockdetail
