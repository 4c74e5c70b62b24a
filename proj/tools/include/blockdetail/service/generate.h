#pragma once

#include "blockdetail/baselines/strategies.h"
#include "blockdetail/common/error.h"
#include "blockdetail/detailing/refinement.h"
#include "blockdetail/motion/blocking.h"
#include "blockdetail/service/models.h"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace blockdetail {

struct FieldIssue {
  std::string field;
  std::string message;
};

/// A request failed validation; `issues()` lists every offending field.
class RequestError : public ValidationError {
 public:
  explicit RequestError(std::vector<FieldIssue> issues);

  const std::vector<FieldIssue>& issues() const noexcept { return issues_; }

 private:
  std::vector<FieldIssue> issues_;
};

/// Parses a strategy descriptor and fills the refinement parameters it does
/// not set itself (n, radius, ground_fix) from `base`.
StrategyDescriptor resolve_strategy(std::string_view text, const RefinementConfig& base);
StrategyDescriptor resolve_strategy_json(const nlohmann::json& doc, const RefinementConfig& base);

/// Request payload:
///   {blocking, strategy?: text | {name, params}, refinement?: {...},
///    seed?: uint, models?: [id...]}
/// Refinement overrides sit between the config defaults and explicit strategy
/// parameters. The refinement default_tolerance fills keys without tolerances.
struct GenerationRequest {
  BlockingSet blocking;
  StrategyDescriptor strategy;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> models;

  /// Throws RequestError listing every invalid field.
  static GenerationRequest from_json(const nlohmann::json& doc, const RefinementConfig& base);
  nlohmann::json to_json() const;
};

struct GenerationResult {
  Motion motion;
  std::optional<RefinementTrace> trace;
  std::uint64_t seed = 0;
};

/// Runs one chain of the requested strategy. The CLI and the job service
/// both go through here.
GenerationResult generate(const GenerationRequest& request, const ModelSet& models,
                          std::uint64_t seed, const DetailProgress& progress = {});

/// Exact bytes of a saved motion file.
std::string motion_payload(const Motion& motion);
/// Exact bytes of a saved trace file.
std::string trace_payload(const RefinementTrace& trace);

}  // namespace blockdetail
