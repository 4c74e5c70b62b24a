#include "blockdetail/service/generate.h"

#include "blockdetail/detailing/trace_io.h"
#include "blockdetail/motion/motion_io.h"

#include <algorithm>
#include <array>

namespace blockdetail {

using nlohmann::json;

namespace {

std::string join_issues(const std::vector<FieldIssue>& issues) {
  std::string text = "invalid request:";
  for (const FieldIssue& issue : issues) {
    text += " " + (issue.field.empty() ? std::string("(request)") : issue.field) + ": " +
            issue.message + ";";
  }
  text.pop_back();
  return text;
}

std::string prefixed(const std::string& prefix, const std::string& field) {
  if (field.empty()) return prefix;
  if (field.rfind(prefix, 0) == 0) return field;
  return prefix + "." + field;
}

void fill_refinement(StrategyDescriptor& s, const RefinementConfig& base, bool has_n,
                     bool has_radius, bool has_ground_fix) {
  if (!has_n) s.cadence = base.cadence;
  if (!has_radius) s.radius = base.search_radius;
  if (!has_ground_fix) s.ground_fix = base.apply_ground_fix;
  s.validate();
}

}  // namespace

RequestError::RequestError(std::vector<FieldIssue> issues)
    : ValidationError(join_issues(issues), issues.empty() ? std::string() : issues.front().field),
      issues_(std::move(issues)) {}

StrategyDescriptor resolve_strategy(std::string_view text, const RefinementConfig& base) {
  StrategyDescriptor s = StrategyDescriptor::parse(text);
  bool has_n = false, has_radius = false, has_ground_fix = false;
  std::size_t pos = text.find(',');
  while (pos != std::string_view::npos) {
    const std::size_t next = text.find(',', pos + 1);
    const std::string_view part = text.substr(pos + 1, next == std::string_view::npos
                                                           ? std::string_view::npos
                                                           : next - pos - 1);
    const std::string_view key = part.substr(0, part.find('='));
    has_n |= key == "n" || key == "cadence";
    has_radius |= key == "radius";
    has_ground_fix |= key == "ground_fix";
    pos = next;
  }
  fill_refinement(s, base, has_n, has_radius, has_ground_fix);
  return s;
}

StrategyDescriptor resolve_strategy_json(const json& doc, const RefinementConfig& base) {
  if (doc.is_string()) return resolve_strategy(doc.get<std::string>(), base);
  StrategyDescriptor s = StrategyDescriptor::from_json(doc);
  const json params = doc.is_object() ? doc.value("params", json::object()) : json::object();
  fill_refinement(s, base, params.contains("n") || params.contains("cadence"),
                  params.contains("radius"), params.contains("ground_fix"));
  return s;
}

GenerationRequest GenerationRequest::from_json(const json& doc, const RefinementConfig& base) {
  if (!doc.is_object()) throw RequestError(std::vector<FieldIssue>{{"", "request must be a JSON object"}});
  std::vector<FieldIssue> issues;
  auto attempt = [&](const std::string& prefix, auto&& body) {
    try {
      body();
    } catch (const ValidationError& e) {
      issues.push_back({prefixed(prefix, e.field()), e.what()});
    } catch (const Error& e) {
      issues.push_back({prefix, e.what()});
    } catch (const json::exception& e) {
      issues.push_back({prefix, e.what()});
    }
  };

  for (const auto& [key, value] : doc.items()) {
    static const std::array known{"blocking", "strategy", "refinement", "seed", "models"};
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      issues.push_back({key, "unknown request field"});
    }
  }

  GenerationRequest request;
  RefinementConfig refinement = base;
  if (doc.contains("refinement")) {
    attempt("refinement", [&] {
      json merged = base.to_json();
      const json& overrides = doc.at("refinement");
      if (!overrides.is_object()) throw ValidationError("expected an object", "refinement");
      merged.merge_patch(overrides);
      refinement = RefinementConfig::from_json(merged);
    });
  }
  attempt("strategy", [&] {
    request.strategy = doc.contains("strategy") ? resolve_strategy_json(doc.at("strategy"), refinement)
                                                : resolve_strategy("detailing", refinement);
  });
  if (!doc.contains("blocking")) {
    issues.push_back({"blocking", "missing blocking set"});
  } else {
    attempt("blocking", [&] {
      request.blocking = blocking_from_json(doc.at("blocking"), refinement.default_tolerance);
      request.blocking.validate_input(SkeletonSpec::desk());
    });
  }
  if (doc.contains("seed")) {
    const json& seed = doc.at("seed");
    if (seed.is_number_unsigned()) {
      request.seed = seed.get<std::uint64_t>();
    } else if (!seed.is_null()) {
      issues.push_back({"seed", "expected a non-negative integer"});
    }
  }
  if (doc.contains("models")) {
    const json& models = doc.at("models");
    if (!models.is_array()) {
      issues.push_back({"models", "expected an array of model identifiers"});
    } else {
      for (std::size_t i = 0; i < models.size(); ++i) {
        if (!models[i].is_string()) {
          issues.push_back({"models[" + std::to_string(i) + "]", "expected a string"});
        } else {
          request.models.push_back(models[i].get<std::string>());
        }
      }
    }
  }
  if (!issues.empty()) throw RequestError(std::move(issues));
  return request;
}

json GenerationRequest::to_json() const {
  json doc = {{"blocking", blocking_to_json(blocking)},
              {"strategy", strategy.to_json()},
              {"models", models}};
  doc["seed"] = seed ? json(*seed) : json(nullptr);
  return doc;
}

GenerationResult generate(const GenerationRequest& request, const ModelSet& models,
                          std::uint64_t seed, const DetailProgress& progress) {
  const std::array<BlockingSet, 1> blockings{request.blocking};
  const std::array<std::uint64_t, 1> seeds{seed};
  auto outputs =
      run_strategy_batch(request.strategy, models.strategy_models(), blockings, seeds, progress);
  GenerationResult result;
  result.motion = Motion(std::move(outputs.front().motion));
  result.trace = std::move(outputs.front().trace);
  result.seed = seed;
  return result;
}

std::string motion_payload(const Motion& motion) {
  return motion_to_json(motion, SkeletonSpec::desk()).dump() + "\n";
}

std::string trace_payload(const RefinementTrace& trace) { return trace_to_json(trace).dump() + "\n"; }

}  // namespace blockdetail
