#pragma once

#include "blockdetail/baselines/strategies.h"
#include "blockdetail/diffusion/denoiser.h"
#include "blockdetail/service/config.h"

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace blockdetail {

struct ModelSet {
  std::shared_ptr<const DenoiserU> u;
  std::shared_ptr<const DenoiserR> r;
  std::vector<std::string> ids;

  StrategyModels strategy_models() const { return {r.get(), u.get(), SkeletonSpec::desk()}; }
  /// "u=<name> r=<name>" with "-" for a missing slot.
  std::string description() const;
};

/// Resolves model identifiers into denoisers and caches them.
///
/// Identifiers: "gaussian" (analytic U and R), "gaussian-u", "gaussian-r",
/// or a checkpoint path; a checkpoint fills the U or R slot according to its
/// mode. An empty list resolves to `defaults`, and an empty `defaults` to
/// "gaussian". Thread-safe.
class ModelRegistry {
 public:
  explicit ModelRegistry(AppConfig config, std::vector<std::string> defaults = {});

  ModelSet resolve(const std::vector<std::string>& ids);

  const AppConfig& config() const { return config_; }

 private:
  std::shared_ptr<const GaussianMotionPrior> prior();

  AppConfig config_;
  std::vector<std::string> defaults_;
  std::mutex mutex_;
  std::shared_ptr<const GaussianMotionPrior> prior_;
  std::map<std::string, std::shared_ptr<const TinyDenoiserNet>> checkpoints_;
};

}  // namespace blockdetail
