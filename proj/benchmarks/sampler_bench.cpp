#include "blockdetail/baselines/strategies.h"
#include "blockdetail/detailing/refinement.h"
#include "blockdetail/diffusion/gaussian.h"
#include "blockdetail/diffusion/network.h"
#include "blockdetail/diffusion/sampler.h"
#include "blockdetail/eval/benchmark.h"
#include "blockdetail/eval/fid.h"
#include "blockdetail/eval/runner.h"
#include "blockdetail/motion/synth.h"

#include <benchmark/benchmark.h>

#include <memory>
#include <vector>

namespace {

using namespace blockdetail;

struct Fixture {
  std::vector<Motion> clips = synth_dataset(64, kDefaultClipLength, 1);
  std::shared_ptr<GaussianMotionPrior> prior =
      std::make_shared<GaussianMotionPrior>(GaussianMotionPrior::fit(clips));
  GaussianDenoiserU gauss_u{prior, NoiseSchedule()};
  GaussianDenoiserR gauss_r{prior, NoiseSchedule()};
  std::shared_ptr<TinyDenoiserNet> u_net = make_net(DenoiserMode::unconditioned);
  std::shared_ptr<TinyDenoiserNet> r_net = make_net(DenoiserMode::retiming);
  NetworkDenoiserU net_u{u_net};
  NetworkDenoiserR net_r{r_net};
  BlockingSet blocking;

  Fixture() {
    BenchmarkSpec spec;
    spec.seed = 7;
    blocking = make_blocking(benchmark_clips(spec).front(), spec, blocking_seed(spec.seed, 0))
                   .blocking;
  }

  std::shared_ptr<TinyDenoiserNet> make_net(DenoiserMode mode) const {
    std::vector<MotionArray> frames;
    for (const Motion& m : clips) frames.push_back(m.frames());
    NetworkConfig config;
    config.mode = mode;
    config.temporal_length = 6.0;
    auto net = std::make_shared<TinyDenoiserNet>(config, NoiseSchedule(), ChannelStats::fit(frames));
    net->initialize(5);
    return net;
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

void BM_NetworkPredictU(benchmark::State& state) {
  Fixture& f = fixture();
  const int batch = static_cast<int>(state.range(0));
  std::vector<MotionArray> noisy(batch, f.clips.front().frames());
  std::vector<MotionArray> out(batch);
  for (auto _ : state) {
    f.net_u.predict_batch(noisy, 500, out);
    benchmark::DoNotOptimize(out.front().data().data());
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_NetworkPredictU)->Arg(1)->Arg(16);

void BM_GaussianPredictU(benchmark::State& state) {
  Fixture& f = fixture();
  std::vector<MotionArray> noisy(1, f.clips.front().frames());
  std::vector<MotionArray> out(1);
  for (auto _ : state) {
    f.gauss_u.predict_batch(noisy, 500, out);
    benchmark::DoNotOptimize(out.front().data().data());
  }
}
BENCHMARK(BM_GaussianPredictU);

void BM_DetailMotionNetwork(benchmark::State& state) {
  Fixture& f = fixture();
  RefinementConfig config;
  config.cadence = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(detail_motion(f.blocking, f.net_r, f.net_u, config, 3));
  }
}
BENCHMARK(BM_DetailMotionNetwork)->Arg(100)->Arg(1001)->Unit(benchmark::kMillisecond);

void BM_DetailMotionGaussian(benchmark::State& state) {
  Fixture& f = fixture();
  RefinementConfig config;
  for (auto _ : state) {
    benchmark::DoNotOptimize(detail_motion(f.blocking, f.gauss_r, f.gauss_u, config, 3));
  }
}
BENCHMARK(BM_DetailMotionGaussian)->Unit(benchmark::kMillisecond);

void BM_MatchPose(benchmark::State& state) {
  Fixture& f = fixture();
  const MotionArray& proposal = f.clips[1].frames();
  const BlockingPose& key = f.blocking.poses.front();
  for (auto _ : state) benchmark::DoNotOptimize(match_pose(proposal, key, 10));
}
BENCHMARK(BM_MatchPose);

void BM_Fid(benchmark::State& state) {
  Fixture& f = fixture();
  const std::vector<Motion> other = synth_dataset(64, kDefaultClipLength, 2);
  for (auto _ : state) benchmark::DoNotOptimize(fid(f.clips, other));
}
BENCHMARK(BM_Fid)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
