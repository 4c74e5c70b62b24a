#include "blockdetail/baselines/strategies.h"

#include "blockdetail/common/error.h"
#include "blockdetail/diffusion/sampler.h"

#include <charconv>
#include <cmath>
#include <sstream>
#include <utility>

namespace blockdetail {

using nlohmann::json;

namespace {

void check_batch(std::size_t blockings, std::size_t seeds) {
  if (blockings != seeds) throw ValidationError("need one seed per blocking set", "seeds");
}

void check_blocking(const BlockingSet& blocking, const ArrayShape& shape) {
  if (blocking.empty()) return;
  blocking.validate();
  if (!(blocking.shape() == shape)) {
    throw ValidationError("blocking shape " + to_string(blocking.shape()) +
                              " does not match model shape " + to_string(shape),
                          "blocking");
  }
}

std::vector<Condition> build_conditions(std::span<const BlockingSet> blockings) {
  std::vector<Condition> out;
  out.reserve(blockings.size());
  for (const BlockingSet& b : blockings) out.push_back(build_condition(b));
  return out;
}

StepObserver step_observer(const DetailProgress& progress, std::size_t chains) {
  if (!progress) return {};
  return [progress, chains](int t, std::span<const MotionArray>, std::span<const MotionArray>) {
    for (std::size_t i = 0; i < chains; ++i) progress(i, t, nullptr);
  };
}

std::vector<MotionArray> blended_impl(const DenoiserR& r, const DenoiserU& u,
                                      std::span<const BlockingSet> blockings,
                                      std::span<const BlendMask> masks,
                                      std::span<const std::uint64_t> seeds,
                                      const StepObserver& observer) {
  check_batch(blockings.size(), seeds.size());
  if (masks.size() != blockings.size()) throw ValidationError("need one mask per blocking set");
  if (!(r.schedule() == u.schedule()) || !(r.shape() == u.shape())) {
    throw ValidationError("R and U must share schedule and shape", "model");
  }
  const ArrayShape shape = r.shape();
  for (std::size_t i = 0; i < blockings.size(); ++i) {
    check_blocking(blockings[i], shape);
    masks[i].validate();
    if (masks[i].frames() != shape.frames || masks[i].joints() != shape.joints) {
      throw ValidationError("mask must be F x J", "mask");
    }
  }
  const std::vector<Condition> conditions = build_conditions(blockings);
  std::vector<MotionArray> unconditioned(blockings.size());

  auto predict = [&](int t, std::span<const MotionArray> noisy, std::span<MotionArray> x0) {
    r.predict_batch(conditions, noisy, t, x0);
    u.predict_batch(noisy, t, unconditioned);
    for (std::size_t i = 0; i < x0.size(); ++i) {
      const Eigen::MatrixXd& m = masks[i].values;
      Eigen::MatrixXd& out = x0[i].data();
      const Eigen::MatrixXd& xu = unconditioned[i].data();
      for (int j = 0; j < shape.joints; ++j) {
        for (int f = 0; f < shape.frames; ++f) {
          const double w = m(f, j);
          if (w == 1.0) continue;
          for (int d = 0; d < shape.dims; ++d) {
            const Eigen::Index c = Eigen::Index{j} * shape.dims + d;
            out(f, c) = w == 0.0 ? xu(f, c) : w * out(f, c) + (1.0 - w) * xu(f, c);
          }
        }
      }
    }
  };
  return run_ancestral_batch(r.schedule(), shape, seeds, predict, observer);
}

std::vector<MotionArray> edited_u_impl(const DenoiserU& u, std::span<const BlockingSet> blockings,
                                       std::span<const std::uint64_t> seeds,
                                       const std::function<void(std::size_t, MotionArray&)>& edit,
                                       const StepObserver& observer) {
  check_batch(blockings.size(), seeds.size());
  for (const BlockingSet& b : blockings) check_blocking(b, u.shape());
  auto predict = [&](int t, std::span<const MotionArray> noisy, std::span<MotionArray> x0) {
    u.predict_batch(noisy, t, x0);
    for (std::size_t i = 0; i < x0.size(); ++i) edit(i, x0[i]);
  };
  return run_ancestral_batch(u.schedule(), u.shape(), seeds, predict, observer);
}

std::vector<MotionArray> guided_impl(const DenoiserU& u, std::span<const BlockingSet> blockings,
                                     const GuidanceConfig& config,
                                     std::span<const std::uint64_t> seeds,
                                     const StepObserver& observer) {
  if (!(config.weight >= 0.0) || !std::isfinite(config.weight)) {
    throw ValidationError("guidance weight must be >= 0", "weight");
  }
  return edited_u_impl(
      u, blockings, seeds,
      [&](std::size_t i, MotionArray& x0) { apply_guidance(blockings[i], config.weight, x0); },
      observer);
}

std::vector<MotionArray> impute_impl(const DenoiserU& u, std::span<const BlockingSet> blockings,
                                     std::span<const std::uint64_t> seeds,
                                     const StepObserver& observer) {
  return edited_u_impl(
      u, blockings, seeds, [&](std::size_t i, MotionArray& x0) { apply_imputation(blockings[i], x0); },
      observer);
}

double parse_double(std::string_view text, const std::string& field) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ValidationError("expected a number, got '" + std::string(text) + "'", field);
  }
  return value;
}

int parse_int(std::string_view text, const std::string& field) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ValidationError("expected an integer, got '" + std::string(text) + "'", field);
  }
  return value;
}

bool parse_bool(std::string_view text, const std::string& field) {
  if (text == "1" || text == "true" || text == "on") return true;
  if (text == "0" || text == "false" || text == "off") return false;
  throw ValidationError("expected a boolean, got '" + std::string(text) + "'", field);
}

std::string format_number(double v) {
  std::ostringstream out;
  out << v;
  return out.str();
}

}  // namespace

std::vector<MotionArray> blended_sample_batch(const DenoiserR& r, const DenoiserU& u,
                                              std::span<const BlockingSet> blockings,
                                              std::span<const BlendMask> masks,
                                              std::span<const std::uint64_t> seeds) {
  return blended_impl(r, u, blockings, masks, seeds, {});
}

MotionArray blended_sample(const DenoiserR& r, const DenoiserU& u, const BlockingSet& blocking,
                           const BlendMask& mask, std::uint64_t seed) {
  const std::uint64_t seeds[] = {seed};
  return std::move(blended_sample_batch(r, u, {&blocking, 1}, {&mask, 1}, seeds)[0]);
}

void apply_guidance(const BlockingSet& blocking, double weight, MotionArray& x0) {
  if (weight == 0.0) return;
  const int dims = x0.dims();
  for (const BlockingPose& key : blocking.poses) {
    for (int j = 0; j < x0.joints(); ++j) {
      if (!key.specified[j]) continue;
      for (int d = 0; d < dims; ++d) {
        double& v = x0(key.frame, j, d);
        v -= weight * 2.0 * (v - key.pose(j, d));
      }
    }
  }
}

void apply_imputation(const BlockingSet& blocking, MotionArray& x0) {
  for (const BlockingPose& key : blocking.poses) {
    for (int j = 0; j < x0.joints(); ++j) {
      if (!key.specified[j]) continue;
      for (int d = 0; d < x0.dims(); ++d) x0(key.frame, j, d) = key.pose(j, d);
    }
  }
}

std::vector<MotionArray> guided_sample_batch(const DenoiserU& u,
                                             std::span<const BlockingSet> blockings,
                                             const GuidanceConfig& config,
                                             std::span<const std::uint64_t> seeds) {
  return guided_impl(u, blockings, config, seeds, {});
}

MotionArray guided_sample(const DenoiserU& u, const BlockingSet& blocking,
                          const GuidanceConfig& config, std::uint64_t seed) {
  const std::uint64_t seeds[] = {seed};
  return std::move(guided_sample_batch(u, {&blocking, 1}, config, seeds)[0]);
}

std::vector<MotionArray> hard_impute_batch(const DenoiserU& u,
                                           std::span<const BlockingSet> blockings,
                                           std::span<const std::uint64_t> seeds) {
  return impute_impl(u, blockings, seeds, {});
}

MotionArray hard_impute_sample(const DenoiserU& u, const BlockingSet& blocking,
                               std::uint64_t seed) {
  const std::uint64_t seeds[] = {seed};
  return std::move(hard_impute_batch(u, {&blocking, 1}, seeds)[0]);
}

std::string_view to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::detailing: return "detailing";
    case StrategyKind::r_notolerance: return "r-notolerance";
    case StrategyKind::diffusion_blending: return "diffusion-blending";
    case StrategyKind::soft_mask: return "soft-mask";
    case StrategyKind::u_guidance: return "u-guidance";
    case StrategyKind::hard_impute: return "hard-impute";
    case StrategyKind::unconditioned: return "unconditioned";
  }
  return "unknown";
}

StrategyKind parse_strategy_kind(std::string_view name) {
  for (StrategyKind k :
       {StrategyKind::detailing, StrategyKind::r_notolerance, StrategyKind::diffusion_blending,
        StrategyKind::soft_mask, StrategyKind::u_guidance, StrategyKind::hard_impute,
        StrategyKind::unconditioned}) {
    if (name == to_string(k)) return k;
  }
  throw ValidationError("unknown strategy '" + std::string(name) + "'", "strategy.name");
}

void StrategyDescriptor::validate() const {
  if (c && !(*c >= 0.0 && *c <= 1.0)) throw ValidationError("c must lie in [0, 1]", "strategy.c");
  if (cadence < 1) throw ValidationError("n must be >= 1", "strategy.n");
  if (radius < 0) throw ValidationError("radius must be >= 0", "strategy.radius");
  if (falloff < 1) throw ValidationError("falloff must be >= 1", "strategy.falloff");
  if (!(weight >= 0.0) || !std::isfinite(weight)) {
    throw ValidationError("w must be >= 0", "strategy.w");
  }
}

std::string StrategyDescriptor::label() const {
  std::string out(to_string(kind));
  auto add = [&](const std::string& key, const std::string& value) {
    out += "," + key + "=" + value;
  };
  switch (kind) {
    case StrategyKind::detailing:
      if (c) add("c", format_number(*c));
      add("n", std::to_string(cadence));
      if (radius != 10) add("radius", std::to_string(radius));
      if (!ground_fix) add("ground_fix", "off");
      break;
    case StrategyKind::diffusion_blending:
      add("c", format_number(c.value_or(0.85)));
      break;
    case StrategyKind::soft_mask:
      add("c", format_number(c.value_or(0.85)));
      if (falloff != 10) add("falloff", std::to_string(falloff));
      break;
    case StrategyKind::u_guidance:
      add("w", format_number(weight));
      break;
    default:
      break;
  }
  return out;
}

StrategyDescriptor StrategyDescriptor::parse(std::string_view text) {
  StrategyDescriptor s;
  std::size_t start = 0;
  bool first = true;
  while (start <= text.size()) {
    std::size_t end = text.find(',', start);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view part = text.substr(start, end - start);
    start = end + 1;
    if (first) {
      s.kind = parse_strategy_kind(part);
      first = false;
      continue;
    }
    if (part.empty()) continue;
    const std::size_t eq = part.find('=');
    if (eq == std::string_view::npos) {
      throw ValidationError("strategy parameter '" + std::string(part) + "' needs key=value",
                            "strategy");
    }
    const std::string key(part.substr(0, eq));
    const std::string_view value = part.substr(eq + 1);
    const std::string field = "strategy." + key;
    if (key == "c") s.c = parse_double(value, field);
    else if (key == "n" || key == "cadence") s.cadence = parse_int(value, field);
    else if (key == "radius") s.radius = parse_int(value, field);
    else if (key == "ground_fix") s.ground_fix = parse_bool(value, field);
    else if (key == "falloff") s.falloff = parse_int(value, field);
    else if (key == "w" || key == "weight") s.weight = parse_double(value, field);
    else throw ValidationError("unknown strategy parameter '" + key + "'", field);
  }
  s.validate();
  return s;
}

json StrategyDescriptor::to_json() const {
  json params = {{"n", cadence}, {"radius", radius}, {"ground_fix", ground_fix},
                 {"falloff", falloff}, {"w", weight}};
  if (c) params["c"] = *c;
  return {{"name", std::string(to_string(kind))}, {"params", std::move(params)}};
}

StrategyDescriptor StrategyDescriptor::from_json(const json& doc) {
  if (doc.is_string()) return parse(doc.get<std::string>());
  if (!doc.is_object() || !doc.contains("name") || !doc["name"].is_string()) {
    throw ValidationError("strategy needs a name", "strategy.name");
  }
  StrategyDescriptor s;
  s.kind = parse_strategy_kind(doc["name"].get<std::string>());
  if (auto it = doc.find("params"); it != doc.end()) {
    if (!it->is_object()) throw ValidationError("expected an object", "strategy.params");
    for (const auto& [key, value] : it->items()) {
      const std::string field = "strategy.params." + key;
      if (key == "c") {
        if (value.is_null()) continue;
        if (!value.is_number()) throw ValidationError("expected a number", field);
        s.c = value.get<double>();
      } else if (key == "n" || key == "cadence" || key == "radius" || key == "falloff") {
        if (!value.is_number_integer()) throw ValidationError("expected an integer", field);
        (key == "radius" ? s.radius : key == "falloff" ? s.falloff : s.cadence) = value.get<int>();
      } else if (key == "ground_fix") {
        if (!value.is_boolean()) throw ValidationError("expected a boolean", field);
        s.ground_fix = value.get<bool>();
      } else if (key == "w" || key == "weight") {
        if (!value.is_number()) throw ValidationError("expected a number", field);
        s.weight = value.get<double>();
      } else {
        throw ValidationError("unknown strategy parameter", field);
      }
    }
  }
  s.validate();
  return s;
}

RefinementConfig StrategyDescriptor::refinement() const {
  RefinementConfig r;
  r.cadence = cadence;
  r.search_radius = radius;
  r.apply_ground_fix = ground_fix;
  if (c) r.default_tolerance = *c;
  return r;
}

std::vector<StrategyOutput> run_strategy_batch(const StrategyDescriptor& strategy,
                                               const StrategyModels& models,
                                               std::span<const BlockingSet> blockings,
                                               std::span<const std::uint64_t> seeds,
                                               const DetailProgress& progress) {
  strategy.validate();
  check_batch(blockings.size(), seeds.size());
  const bool needs_r = strategy.kind == StrategyKind::detailing ||
                       strategy.kind == StrategyKind::r_notolerance ||
                       strategy.kind == StrategyKind::diffusion_blending ||
                       strategy.kind == StrategyKind::soft_mask;
  const bool needs_u = strategy.kind != StrategyKind::r_notolerance;
  if (needs_r && !models.r) throw ValidationError("strategy needs an R model", "model");
  if (needs_u && !models.u) throw ValidationError("strategy needs a U model", "model");

  std::vector<StrategyOutput> out(blockings.size());
  auto wrap = [&](std::vector<MotionArray> arrays) {
    for (std::size_t i = 0; i < arrays.size(); ++i) out[i].motion = std::move(arrays[i]);
    return out;
  };
  const StepObserver observer = step_observer(progress, blockings.size());

  switch (strategy.kind) {
    case StrategyKind::detailing: {
      std::vector<BlockingSet> keyed(blockings.begin(), blockings.end());
      if (strategy.c) {
        for (BlockingSet& b : keyed) b = b.with_uniform_tolerance(*strategy.c);
      }
      auto results = detail_motion_batch(keyed, *models.r, *models.u, strategy.refinement(),
                                         seeds, models.skeleton, progress);
      for (std::size_t i = 0; i < results.size(); ++i) {
        out[i].motion = results[i].motion.frames();
        out[i].trace = std::move(results[i].trace);
      }
      return out;
    }
    case StrategyKind::r_notolerance: {
      for (const BlockingSet& b : blockings) check_blocking(b, models.r->shape());
      ConditionHook hook;
      if (progress) {
        hook = [&](int t, std::span<const MotionArray>, std::span<const MotionArray>,
                   std::span<Condition>) {
          for (std::size_t i = 0; i < blockings.size(); ++i) progress(i, t, nullptr);
        };
      }
      return wrap(run_conditioned_batch(*models.r, seeds, build_conditions(blockings), hook));
    }
    case StrategyKind::diffusion_blending:
    case StrategyKind::soft_mask: {
      const double c = strategy.c.value_or(0.85);
      std::vector<BlendMask> masks;
      for (const BlockingSet& b : blockings) {
        masks.push_back(strategy.kind == StrategyKind::soft_mask ? soft_mask(b, c, strategy.falloff)
                                                                 : sparse_mask(b, c));
      }
      return wrap(blended_impl(*models.r, *models.u, blockings, masks, seeds, observer));
    }
    case StrategyKind::u_guidance:
      return wrap(guided_impl(*models.u, blockings, {strategy.weight}, seeds, observer));
    case StrategyKind::hard_impute:
      return wrap(impute_impl(*models.u, blockings, seeds, observer));
    case StrategyKind::unconditioned: {
      auto predict = [&](int t, std::span<const MotionArray> noisy, std::span<MotionArray> x0) {
        models.u->predict_batch(noisy, t, x0);
      };
      return wrap(run_ancestral_batch(models.u->schedule(), models.u->shape(), seeds, predict,
                                      observer));
    }
  }
  throw Error("unhandled strategy");
}

}  // namespace blockdetail
