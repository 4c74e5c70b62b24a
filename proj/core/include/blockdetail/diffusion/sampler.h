#pragma once

#include "blockdetail/diffusion/denoiser.h"
#include "blockdetail/diffusion/schedule.h"
#include "blockdetail/motion/condition.h"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace blockdetail {

/// Fills x0[i] with the clean-signal prediction for chain i at step t.
using PredictFn = std::function<void(int t, std::span<const MotionArray> noisy,
                                     std::span<MotionArray> x0)>;

/// Called after each prediction with the current noisy states and the
/// predictions about to be used for the ancestral step. Read-only.
using StepObserver = std::function<void(int t, std::span<const MotionArray> noisy,
                                        std::span<const MotionArray> x0)>;

/// Ancestral x0-parameterized sampling of several independent chains.
///
/// Chain i owns an RNG seeded with seeds[i]: it draws Y_T ~ N(0, I), then for
/// t = T..2 one standard-normal array for q(Y_{t-1} | Y_t, x0). The final
/// step is deterministic (Y_0 = x0 at t = 1). Chains never share random
/// state, so a chain's output depends only on its seed and the predictions.
std::vector<MotionArray> run_ancestral_batch(const NoiseSchedule& schedule, ArrayShape shape,
                                             std::span<const std::uint64_t> seeds,
                                             const PredictFn& predict,
                                             const StepObserver& observer = {});

/// Lets the caller replace conditions after seeing step t's prediction. The
/// new conditions are used from step t-1 on. Must not touch `noisy`.
using ConditionHook =
    std::function<void(int t, std::span<const MotionArray> noisy, std::span<const MotionArray> x0,
                       std::span<Condition> conditions)>;

/// Ancestral sampling of R with per-chain conditions. After the hook runs,
/// every condition is re-validated (shape, finiteness); a malformed one
/// raises ValidationError("step hook returned malformed condition ...").
std::vector<MotionArray> run_conditioned_batch(const DenoiserR& denoiser,
                                               std::span<const std::uint64_t> seeds,
                                               std::vector<Condition> conditions,
                                               const ConditionHook& hook = {});

MotionArray sample(const DenoiserU& denoiser, std::uint64_t seed,
                   const StepObserver& observer = {});

MotionArray sample_conditioned(const DenoiserR& denoiser, const Condition& condition,
                               std::uint64_t seed, const ConditionHook& hook = {});

}  // namespace blockdetail
