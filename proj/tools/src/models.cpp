#include "blockdetail/service/models.h"

#include "blockdetail/common/error.h"
#include "blockdetail/diffusion/checkpoint.h"
#include "blockdetail/diffusion/gaussian.h"
#include "blockdetail/diffusion/network.h"
#include "blockdetail/motion/synth.h"

#include <filesystem>

namespace blockdetail {

std::string ModelSet::description() const {
  return "u=" + (u ? u->name() : std::string("-")) + " r=" + (r ? r->name() : std::string("-"));
}

ModelRegistry::ModelRegistry(AppConfig config, std::vector<std::string> defaults)
    : config_(std::move(config)), defaults_(std::move(defaults)) {
  config_.validate();
  if (defaults_.empty()) defaults_ = {"gaussian"};
}

std::shared_ptr<const GaussianMotionPrior> ModelRegistry::prior() {
  if (!prior_) {
    const auto clips = synth_dataset(config_.gaussian.clips, config_.benchmark.clip_length,
                                     config_.gaussian.seed);
    prior_ = std::make_shared<const GaussianMotionPrior>(
        GaussianMotionPrior::fit(clips, config_.gaussian.kernel));
  }
  return prior_;
}

ModelSet ModelRegistry::resolve(const std::vector<std::string>& ids) {
  std::lock_guard lock(mutex_);
  ModelSet set;
  set.ids = ids.empty() ? defaults_ : ids;
  auto put_u = [&](std::shared_ptr<const DenoiserU> u, const std::string& id) {
    if (set.u) throw ValidationError("more than one U model given: " + id, "models");
    set.u = std::move(u);
  };
  auto put_r = [&](std::shared_ptr<const DenoiserR> r, const std::string& id) {
    if (set.r) throw ValidationError("more than one R model given: " + id, "models");
    set.r = std::move(r);
  };
  for (const std::string& id : set.ids) {
    if (id == "gaussian" || id == "gaussian-u" || id == "gaussian-r") {
      if (id != "gaussian-r") {
        put_u(std::make_shared<GaussianDenoiserU>(prior(), config_.schedule()), id);
      }
      if (id != "gaussian-u") {
        put_r(std::make_shared<GaussianDenoiserR>(prior(), config_.schedule(),
                                                  config_.gaussian.obs_variance),
              id);
      }
      continue;
    }
    if (!std::filesystem::is_regular_file(id)) {
      throw ValidationError("unknown model '" + id + "' (not a checkpoint file)", "models");
    }
    auto& net = checkpoints_[std::filesystem::weakly_canonical(id).string()];
    if (!net) net = load_checkpoint(id).net;
    if (net->config().mode == DenoiserMode::unconditioned) {
      put_u(std::make_shared<NetworkDenoiserU>(net), id);
    } else {
      put_r(std::make_shared<NetworkDenoiserR>(net), id);
    }
  }
  if (set.u && set.r &&
      (!(set.u->schedule() == set.r->schedule()) || !(set.u->shape() == set.r->shape()))) {
    throw ValidationError("U and R models disagree on schedule or clip shape", "models");
  }
  return set;
}

}  // namespace blockdetail
