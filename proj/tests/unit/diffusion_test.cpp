#include "blockdetail/common/error.h"
#include "blockdetail/diffusion/checkpoint.h"
#include "blockdetail/diffusion/gaussian.h"
#include "blockdetail/diffusion/network.h"
#include "blockdetail/diffusion/sampler.h"
#include "blockdetail/diffusion/schedule.h"
#include "blockdetail/diffusion/training.h"
#include "blockdetail/motion/condition.h"
#include "blockdetail/motion/synth.h"
#include "test_support.h"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

namespace blockdetail {
namespace {

using testing::random_array;
using testing::TempDir;

Eigen::MatrixXd random_spd(int n, Rng& rng, double ridge = 0.1) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = normal(rng);
  return a * a.transpose() / n + ridge * Eigen::MatrixXd::Identity(n, n);
}

std::shared_ptr<const GaussianMotionPrior> small_prior(ArrayShape shape, std::uint64_t seed,
                                                       bool per_channel) {
  Rng rng(seed);
  MotionArray mean = random_array(shape, rng, 0.5);
  std::vector<Eigen::MatrixXd> covs;
  const int count = per_channel ? shape.channels() : 1;
  for (int c = 0; c < count; ++c) covs.push_back(random_spd(shape.frames, rng));
  return std::make_shared<const GaussianMotionPrior>(std::move(mean), std::move(covs));
}

TEST(ScheduleTest, EndpointsAndMonotonicity) {
  for (int steps : {1, 2, 10, 100, 1000}) {
    const NoiseSchedule s(steps);
    EXPECT_EQ(s.alpha_bar(0), 1.0);
    EXPECT_LT(s.alpha_bar(steps), 1e-4);
    for (int t = 1; t <= steps; ++t) {
      EXPECT_LT(s.alpha_bar(t), s.alpha_bar(t - 1));
      EXPECT_GT(s.alpha_bar(t), 0.0);
      EXPECT_NEAR(s.beta(t), 1.0 - s.alpha_bar(t) / s.alpha_bar(t - 1), 1e-15);
    }
  }
  EXPECT_THROW(NoiseSchedule(0), ValidationError);
  EXPECT_THROW(NoiseSchedule(10, 0.0), ValidationError);
}

TEST(ScheduleTest, CosineShape) {
  const NoiseSchedule s(1000);
  const auto f = [](double t) {
    const double c = std::cos((t / 1000.0 + 0.008) / 1.008 * M_PI / 2.0);
    return c * c;
  };
  for (int t : {1, 10, 250, 500, 900}) EXPECT_NEAR(s.alpha_bar(t), f(t) / f(0), 1e-12);
}

TEST(ScheduleTest, PosteriorCoefficientsMatchClosedForm) {
  const NoiseSchedule s(50);
  for (int t = 1; t <= 50; ++t) {
    const double ab = s.alpha_bar(t), prev = s.alpha_bar(t - 1), beta = s.beta(t);
    const PosteriorCoefficients c = posterior_coefficients(s, t);
    EXPECT_NEAR(c.c0, std::sqrt(prev) * beta / (1.0 - ab), 1e-12);
    EXPECT_NEAR(c.ct, std::sqrt(1.0 - beta) * (1.0 - prev) / (1.0 - ab), 1e-12);
    EXPECT_NEAR(c.variance, (1.0 - prev) * beta / (1.0 - ab), 1e-12);
  }
  EXPECT_EQ(posterior_coefficients(s, 1).variance, 0.0);
  EXPECT_THROW(posterior_coefficients(s, 0), ValidationError);
}

TEST(ForwardNoiseTest, TimestepZeroIsIdentity) {
  Rng rng(1);
  const NoiseSchedule s;
  const MotionArray y = random_array({10, 4, 3}, rng);
  EXPECT_EQ(forward_noise(s, y, 0, random_array({10, 4, 3}, rng)), y);
}

TEST(ForwardNoiseTest, FinalStepIsNearlyPureNoise) {
  Rng rng(2);
  const NoiseSchedule s;
  EXPECT_GT(std::sqrt(1.0 - s.alpha_bar(s.steps())), 0.99995);
  const MotionArray noise = random_array({10, 4, 3}, rng);
  const MotionArray yt = forward_noise(s, MotionArray({10, 4, 3}), s.steps(), noise);
  EXPECT_LT((yt.data() - noise.data()).cwiseAbs().maxCoeff(), 1e-4 * noise.data().cwiseAbs().maxCoeff());
}

TEST(ForwardNoiseTest, RejectsOutOfRangeTimestep) {
  const NoiseSchedule s(10);
  MotionArray a({2, 1, 1});
  EXPECT_THROW(forward_noise(s, a, -1, a), ValidationError);
  EXPECT_THROW(forward_noise(s, a, 11, a), ValidationError);
  EXPECT_THROW(forward_noise(s, a, 3, MotionArray({3, 1, 1})), ValidationError);
}

TEST(ForwardNoiseTest, MonteCarloMoments) {
  const NoiseSchedule s;
  Rng rng(3);
  const int n = 100000;
  for (int t : {10, 300, 700}) {
    const double y = 0.7;
    const MotionArray clean({n, 1, 1}, Eigen::MatrixXd::Constant(n, 1, y));
    const MotionArray yt = forward_noise(s, clean, t, random_array({n, 1, 1}, rng));
    const Eigen::VectorXd v = yt.data().col(0);
    const double mean = v.mean();
    const double var = (v.array() - mean).square().sum() / (n - 1);
    const double ab = s.alpha_bar(t);
    const double se_mean = std::sqrt((1.0 - ab) / n);
    const double se_var = (1.0 - ab) * std::sqrt(2.0 / (n - 1));
    EXPECT_NEAR(mean, std::sqrt(ab) * y, 3.0 * se_mean) << "t=" << t;
    EXPECT_NEAR(var, 1.0 - ab, 3.0 * se_var) << "t=" << t;
  }
}

TEST(ForwardNoiseTest, VariancePreservedForUnitVarianceData) {
  const NoiseSchedule s;
  Rng rng(4);
  const int n = 10000;
  MotionArray clean = random_array({n, 1, 1}, rng);
  Eigen::VectorXd c = clean.data().col(0);
  c = (c.array() - c.mean()) / std::sqrt((c.array() - c.mean()).square().mean());
  clean.data().col(0) = c;
  for (int t = 0; t <= s.steps(); ++t) {
    const Eigen::VectorXd v = forward_noise(s, clean, t, random_array({n, 1, 1}, rng)).data().col(0);
    const double var = (v.array() - v.mean()).square().mean();
    ASSERT_GE(var, 0.95) << "t=" << t;
    ASSERT_LE(var, 1.05) << "t=" << t;
  }
}

TEST(GaussianPriorTest, RejectsNonSpdCovariance) {
  Eigen::MatrixXd bad = Eigen::MatrixXd::Identity(4, 4);
  bad(2, 2) = -1.0;
  EXPECT_THROW(GaussianMotionPrior(MotionArray({4, 1, 1}), {bad}), ValidationError);
  Eigen::MatrixXd asym = Eigen::MatrixXd::Identity(4, 4);
  asym(0, 1) = 0.3;
  EXPECT_THROW(GaussianMotionPrior(MotionArray({4, 1, 1}), {asym}), ValidationError);
  EXPECT_THROW(GaussianMotionPrior(MotionArray({4, 2, 1}), {bad, bad, bad}), ValidationError);
}

TEST(GaussianPriorTest, KernelEntries) {
  const KernelParams k;
  const Eigen::MatrixXd K = squared_exponential_kernel(12, k);
  for (int i = 0; i < 12; ++i) {
    for (int j = 0; j < 12; ++j) {
      const double expected = k.variance * std::exp(-double((i - j) * (i - j)) / (2.0 * k.length * k.length)) +
                              (i == j ? k.jitter : 0.0);
      EXPECT_NEAR(K(i, j), expected, 1e-15);
    }
  }
}

TEST(GaussianPosteriorTest, IdentityCovarianceCollapses) {
  const NoiseSchedule s;
  GaussianMotionPrior prior(MotionArray({6, 2, 3}), {Eigen::MatrixXd::Identity(6, 6)});
  Rng rng(5);
  const MotionArray yt = random_array({6, 2, 3}, rng);
  for (int t : {1, 100, 999}) {
    const MotionArray x0 = gaussian_posterior_x0(prior, s, yt, t);
    EXPECT_LT((x0.data() - std::sqrt(s.alpha_bar(t)) * yt.data()).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(GaussianPosteriorTest, ZeroInnovationReturnsMean) {
  const NoiseSchedule s;
  const auto prior = small_prior({10, 2, 3}, 6, true);
  for (int t : {1, 200, 800}) {
    const MotionArray yt(prior->shape(), std::sqrt(s.alpha_bar(t)) * prior->mean().data());
    const MotionArray x0 = gaussian_posterior_x0(*prior, s, yt, t);
    EXPECT_LT((x0.data() - prior->mean().data()).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(GaussianPosteriorTest, MatchesImportanceWeightedMonteCarlo) {
  const NoiseSchedule s;
  const int F = 8;
  Rng rng(7);
  const Eigen::MatrixXd sigma = random_spd(F, rng, 0.05) * 0.5;
  MotionArray mean({F, 1, 1});
  for (int f = 0; f < F; ++f) mean(f, 0, 0) = 0.3 * std::sin(f);
  GaussianMotionPrior prior(mean, {sigma});
  const int t = 500;
  const double ab = s.alpha_bar(t);

  // Y_t drawn from the model itself.
  const MotionArray truth = prior.sample(99);
  const MotionArray yt = forward_noise(s, truth, t, random_array({F, 1, 1}, rng));
  const MotionArray exact = gaussian_posterior_x0(prior, s, yt, t);

  const Eigen::MatrixXd chol = Eigen::LLT<Eigen::MatrixXd>(sigma).matrixL();
  const Eigen::VectorXd mu = mean.data().col(0);
  const Eigen::VectorXd y = yt.data().col(0);
  const int samples = 1000000;
  std::normal_distribution<double> normal;
  std::vector<double> log_w(samples);
  std::vector<Eigen::VectorXd> draws(samples);
  double max_log = -1e300;
  Eigen::VectorXd z(F);
  for (int i = 0; i < samples; ++i) {
    for (int f = 0; f < F; ++f) z[f] = normal(rng);
    draws[i] = mu + chol * z;
    log_w[i] = -(y - std::sqrt(ab) * draws[i]).squaredNorm() / (2.0 * (1.0 - ab));
    max_log = std::max(max_log, log_w[i]);
  }
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(F);
  double total = 0.0;
  for (int i = 0; i < samples; ++i) {
    const double w = std::exp(log_w[i] - max_log);
    acc += w * draws[i];
    total += w;
  }
  const Eigen::VectorXd mc = acc / total;
  const Eigen::VectorXd e = exact.data().col(0);
  EXPECT_LT((mc - e).norm() / e.norm(), 0.02) << "mc " << mc.transpose() << "\nexact " << e.transpose();
}

TEST(GaussianPosteriorTest, RecoveryImprovesAsNoiseShrinks) {
  const NoiseSchedule s;
  const auto prior = std::make_shared<const GaussianMotionPrior>(
      GaussianMotionPrior::squared_exponential(MotionArray({30, 2, 3})));
  Rng rng(8);
  std::vector<double> rms;
  for (int t : {100, 10, 1}) {
    double total = 0.0;
    for (int i = 0; i < 100; ++i) {
      const MotionArray y = prior->sample(1000 + i);
      const MotionArray yt = forward_noise(s, y, t, random_array(y.shape(), rng));
      const MotionArray x0 = gaussian_posterior_x0(*prior, s, yt, t);
      total += std::sqrt((x0.data() - y.data()).squaredNorm() / y.data().size());
    }
    rms.push_back(total / 100.0);
  }
  EXPECT_GT(rms[0], rms[1]);
  EXPECT_GT(rms[1], rms[2]);
  EXPECT_LT(rms[2], 0.01);
}

// E[Y | Y_t, X] from the full joint covariance of (Y, Y_t, X) for one channel.
Eigen::VectorXd dense_conditional(const Eigen::MatrixXd& sigma, const Eigen::VectorXd& mu, double ab,
                                  double obs, const Eigen::VectorXd& yt, const Eigen::VectorXd& x) {
  const int n = static_cast<int>(mu.size());
  const double r = std::sqrt(ab);
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd szz(2 * n, 2 * n);
  szz << ab * sigma + (1.0 - ab) * I, r * sigma, r * sigma, sigma + obs * I;
  Eigen::MatrixXd syz(n, 2 * n);
  syz << r * sigma, sigma;
  Eigen::VectorXd innovation(2 * n);
  innovation << yt - r * mu, x - mu;
  return mu + syz * szz.fullPivLu().solve(innovation);
}

TEST(GaussianConditionalTest, MatchesDenseJointConditioning) {
  const NoiseSchedule s;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const ArrayShape shape{7, 2, 2};
    const auto prior = small_prior(shape, 20 + seed, seed % 2 == 0);
    Rng rng(seed);
    const MotionArray yt = random_array(shape, rng);
    const Condition cond{random_array(shape, rng, 0.5)};
    const int t = 1 + int(seed) * 97;
    const double obs = 0.01 + 0.05 * seed;
    const MotionArray got = gaussian_conditional_x0(*prior, s, cond, obs, yt, t);
    for (int c = 0; c < shape.channels(); ++c) {
      const Eigen::VectorXd expected =
          dense_conditional(prior->covariance(c), prior->mean().data().col(c), s.alpha_bar(t), obs,
                            yt.data().col(c), cond.frames.data().col(c));
      EXPECT_LT((got.data().col(c) - expected).cwiseAbs().maxCoeff(), 1e-8) << "seed " << seed;
    }
  }
}

TEST(GaussianConditionalTest, LimitsOfObservationNoise) {
  const NoiseSchedule s;
  const auto prior = std::make_shared<const GaussianMotionPrior>(
      GaussianMotionPrior::squared_exponential(MotionArray({20, 3, 3})));
  Rng rng(9);
  const MotionArray yt = random_array(prior->shape(), rng);
  const Condition cond{random_array(prior->shape(), rng, 0.2)};
  for (int t : {5, 300, 900}) {
    const MotionArray loose = gaussian_conditional_x0(*prior, s, cond, 1e9, yt, t);
    const MotionArray plain = gaussian_posterior_x0(*prior, s, yt, t);
    EXPECT_LT((loose.data() - plain.data()).cwiseAbs().maxCoeff(), 1e-6);
    const MotionArray tight = gaussian_conditional_x0(*prior, s, cond, 1e-9, yt, t);
    EXPECT_LT((tight.data() - cond.frames.data()).cwiseAbs().maxCoeff(), 1e-3);
  }
}

TEST(GaussianDenoiserTest, BatchMatchesSingleCalls) {
  const NoiseSchedule s(100);
  const auto prior = small_prior({9, 2, 3}, 10, true);
  GaussianDenoiserU u(prior, s);
  GaussianDenoiserR r(prior, s, 0.02);
  Rng rng(11);
  std::vector<MotionArray> noisy;
  std::vector<Condition> conds;
  for (int i = 0; i < 5; ++i) {
    noisy.push_back(random_array(prior->shape(), rng));
    conds.push_back({random_array(prior->shape(), rng)});
  }
  std::vector<MotionArray> out_u(5), out_r(5);
  u.predict_batch(noisy, 40, out_u);
  r.predict_batch(conds, noisy, 40, out_r);
  for (int i = 0; i < 5; ++i) {
    EXPECT_LT((out_u[i].data() - gaussian_posterior_x0(*prior, s, noisy[i], 40).data()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((out_r[i].data() -
               gaussian_conditional_x0(*prior, s, conds[i], 0.02, noisy[i], 40).data())
                  .cwiseAbs()
                  .maxCoeff(),
              1e-12);
  }
  EXPECT_THROW(u.predict(noisy[0], 0), ValidationError);
  EXPECT_THROW(u.predict(noisy[0], 101), ValidationError);
  EXPECT_THROW(u.predict(MotionArray({3, 1, 1}), 5), ValidationError);
}

TEST(SamplerTest, GaussianSamplesMatchPriorMean) {
  const NoiseSchedule s(200);
  const auto prior = small_prior({12, 2, 1}, 12, true);
  GaussianDenoiserU u(prior, s);
  std::vector<std::uint64_t> seeds(500);
  std::iota(seeds.begin(), seeds.end(), 1000);
  const auto samples = run_ancestral_batch(
      s, u.shape(), seeds, [&](int t, auto noisy, auto x0) { u.predict_batch(noisy, t, x0); });
  const ArrayShape shape = u.shape();
  for (int c = 0; c < shape.channels(); ++c) {
    for (int f = 0; f < shape.frames; ++f) {
      double sum = 0.0;
      for (const auto& m : samples) sum += m.data()(f, c);
      const double mean = sum / samples.size();
      const double se = std::sqrt(prior->covariance(c)(f, f) / samples.size());
      EXPECT_NEAR(mean, prior->mean().data()(f, c), 3.0 * se) << "f " << f << " c " << c;
    }
  }
}

TEST(SamplerTest, SingleStepReturnsPrediction) {
  const NoiseSchedule s(1);
  const ArrayShape shape{4, 2, 1};
  Rng rng(13);
  const MotionArray m = random_array(shape, rng);
  std::vector<std::uint64_t> seeds(10000);
  std::iota(seeds.begin(), seeds.end(), 0);
  const auto out = run_ancestral_batch(s, shape, seeds, [&](int, auto, auto x0) {
    for (auto& x : x0) x = m;
  });
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(shape.frames, shape.channels());
  for (const auto& o : out) sum += o.data();
  EXPECT_LT((sum / out.size() - m.data()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(SamplerTest, AncestralStepFollowsPosteriorFormula) {
  // T=2: the t=2 prediction is a constant M; at t=1 the predictor echoes its
  // input, so the output is Y_1 ~ N(c0 M + ct Y_2, var).
  const NoiseSchedule s(2);
  const ArrayShape shape{3, 1, 1};
  const MotionArray m(shape, Eigen::MatrixXd::Constant(3, 1, 0.4));
  const PosteriorCoefficients pc = posterior_coefficients(s, 2);
  std::vector<std::uint64_t> seeds(20000);
  std::iota(seeds.begin(), seeds.end(), 7);
  std::vector<MotionArray> y2(seeds.size());
  const auto out = run_ancestral_batch(
      s, shape, seeds,
      [&](int t, auto noisy, auto x0) {
        for (std::size_t i = 0; i < x0.size(); ++i) x0[i] = t == 2 ? m : noisy[i];
      },
      [&](int t, auto noisy, auto) {
        if (t == 2) std::copy(noisy.begin(), noisy.end(), y2.begin());
      });
  double sum = 0.0, sq = 0.0;
  const double n = double(seeds.size()) * 3;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const Eigen::ArrayXd z = (out[i].data().col(0) - pc.c0 * m.data().col(0) - pc.ct * y2[i].data().col(0)).array() /
                             std::sqrt(pc.variance);
    sum += z.sum();
    sq += z.square().sum();
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  EXPECT_NEAR(mean, 0.0, 3.0 / std::sqrt(n));
  EXPECT_NEAR(var, 1.0, 3.0 * std::sqrt(2.0 / n));
}

TEST(SamplerTest, DeterministicAndChainsIndependent) {
  const NoiseSchedule s(50);
  const auto prior = small_prior({6, 2, 3}, 14, false);
  GaussianDenoiserU u(prior, s);
  const MotionArray a = sample(u, 77);
  EXPECT_EQ(a, sample(u, 77));
  EXPECT_FALSE(a == sample(u, 78));
  const std::vector<std::uint64_t> seeds = {5, 77, 9};
  const auto batch = run_ancestral_batch(
      s, u.shape(), seeds, [&](int t, auto noisy, auto x0) { u.predict_batch(noisy, t, x0); });
  EXPECT_EQ(batch[1], a);
  EXPECT_EQ(batch[0], sample(u, 5));
}

TEST(SamplerTest, NoNonFiniteOutputsAcrossManySeeds) {
  const NoiseSchedule s;
  const auto prior = std::make_shared<const GaussianMotionPrior>(
      GaussianMotionPrior::squared_exponential(MotionArray({8, 2, 1})));
  GaussianDenoiserU u(prior, s);
  GaussianDenoiserR r(prior, s);
  std::vector<std::uint64_t> seeds(1000);
  std::iota(seeds.begin(), seeds.end(), 0);
  const auto us = run_ancestral_batch(
      s, u.shape(), seeds, [&](int t, auto noisy, auto x0) { u.predict_batch(noisy, t, x0); });
  for (const auto& m : us) ASSERT_TRUE(m.all_finite());
  Rng rng(15);
  std::vector<Condition> conds(seeds.size(), Condition{random_array(r.shape(), rng, 0.3)});
  for (const auto& m : run_conditioned_batch(r, seeds, conds)) ASSERT_TRUE(m.all_finite());

  NetworkConfig cfg;
  cfg.shape = {8, 2, 1};
  cfg.hidden = 16;
  cfg.depth = 2;
  cfg.time_embedding = 8;
  auto net = std::make_shared<TinyDenoiserNet>(cfg, s, ChannelStats{Eigen::VectorXd::Zero(2), Eigen::VectorXd::Constant(2, 0.2)});
  net->initialize(3);
  Eigen::VectorXd p = net->parameters();
  p.tail(cfg.output_size() * (cfg.hidden + 1)).setConstant(0.05);
  net->set_parameters(p);
  NetworkDenoiserU nu(net);
  const auto ns = run_ancestral_batch(
      s, nu.shape(), seeds, [&](int t, auto noisy, auto x0) { nu.predict_batch(noisy, t, x0); });
  for (const auto& m : ns) ASSERT_TRUE(m.all_finite());
}

TEST(SamplerTest, HookReplacesConditionAndMalformedOnesAreRejected) {
  const NoiseSchedule s(20);
  const auto prior = small_prior({5, 1, 3}, 16, false);
  auto r = GaussianDenoiserR(prior, s, 1e-6);
  Rng rng(17);
  const Condition first{random_array(r.shape(), rng)};
  const Condition second{random_array(r.shape(), rng)};
  // Replacing the condition at t=2 drives the final prediction to `second`.
  const MotionArray out = sample_conditioned(r, first, 3, [&](int t, auto, auto, auto conds) {
    if (t == 2) conds[0] = second;
  });
  EXPECT_LT((out.data() - second.frames.data()).cwiseAbs().maxCoeff(), 1e-3);

  try {
    sample_conditioned(r, first, 3, [&](int t, auto, auto, auto conds) {
      if (t == 10) conds[0].frames(1, 0, 2) = std::nan("");
    });
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("step hook returned malformed condition"), std::string::npos);
  }
  EXPECT_THROW(sample_conditioned(r, first, 3, [&](int, auto, auto, auto conds) {
                 conds[0] = Condition{MotionArray({2, 1, 3})};
               }),
               ValidationError);
}

NetworkConfig tiny_config(DenoiserMode mode) {
  NetworkConfig cfg;
  cfg.mode = mode;
  cfg.shape = {6, 2, 2};
  cfg.hidden = 7;
  cfg.depth = 2;
  cfg.time_embedding = 4;
  return cfg;
}

class NetworkGradientTest : public ::testing::TestWithParam<DenoiserMode> {};

TEST_P(NetworkGradientTest, MatchesCentralDifferences) {
  const NetworkConfig cfg = tiny_config(GetParam());
  const NoiseSchedule s(100);
  Rng rng(18);
  std::normal_distribution<double> normal(0.0, 0.4);
  Eigen::VectorXd mean(4);
  for (Eigen::Index i = 0; i < mean.size(); ++i) mean[i] = normal(rng);
  ChannelStats stats{mean, Eigen::VectorXd::Constant(4, 0.5)};
  TinyDenoiserNet net(cfg, s, stats);
  Eigen::VectorXd p(net.parameter_count());
  for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = normal(rng);
  net.set_parameters(p);

  std::vector<MotionArray> noisy, targets;
  std::vector<Condition> conds;
  std::vector<int> ts = {3, 50, 97};
  for (int i = 0; i < 3; ++i) {
    noisy.push_back(random_array(cfg.shape, rng));
    targets.push_back(random_array(cfg.shape, rng, 0.5));
    if (GetParam() == DenoiserMode::retiming) conds.push_back({random_array(cfg.shape, rng, 0.5)});
  }
  Eigen::VectorXd grad;
  net.loss(noisy, conds, ts, targets, &grad);
  ASSERT_EQ(grad.size(), p.size());
  const double h = 1e-5;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    Eigen::VectorXd q = p;
    q[i] = p[i] + h;
    net.set_parameters(q);
    const double up = net.loss(noisy, conds, ts, targets, nullptr);
    q[i] = p[i] - h;
    net.set_parameters(q);
    const double down = net.loss(noisy, conds, ts, targets, nullptr);
    const double fd = (up - down) / (2.0 * h);
    worst = std::max(worst, std::abs(fd - grad[i]) / std::max(1e-4, std::abs(fd) + std::abs(grad[i])));
  }
  EXPECT_LT(worst, 1e-5);
}

INSTANTIATE_TEST_SUITE_P(Modes, NetworkGradientTest,
                         ::testing::Values(DenoiserMode::unconditioned, DenoiserMode::retiming),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(NetworkTest, UntrainedNetIsPerChannelWienerFilter) {
  const NetworkConfig cfg = tiny_config(DenoiserMode::unconditioned);
  const NoiseSchedule s(100);
  ChannelStats stats{Eigen::Vector4d(0.1, -0.2, 0.3, 0.0), Eigen::Vector4d(0.5, 0.2, 1.0, 0.05)};
  TinyDenoiserNet net(cfg, s, stats);
  net.initialize(4);
  Rng rng(19);
  const MotionArray y = random_array(cfg.shape, rng);
  std::vector<MotionArray> in = {y}, out(1);
  for (int t : {1, 30, 100}) {
    const int ts[] = {t};
    net.predict(in, {}, ts, out);
    const double ab = s.alpha_bar(t);
    for (int c = 0; c < 4; ++c) {
      const double m = stats.mean[c], sd = stats.scale[c];
      const double g = std::sqrt(ab) * sd * sd / (ab * sd * sd + 1.0 - ab);
      for (int f = 0; f < cfg.shape.frames; ++f) {
        EXPECT_NEAR(out[0].data()(f, c), m + g * (y.data()(f, c) - std::sqrt(ab) * m), 1e-12);
      }
    }
  }
}

TEST(NetworkTest, UntrainedNetWithTemporalLengthIsGaussianPosterior) {
  NetworkConfig cfg = tiny_config(DenoiserMode::unconditioned);
  cfg.temporal_length = 2.5;
  const NoiseSchedule s(100);
  ChannelStats stats{Eigen::Vector4d(0.1, -0.2, 0.3, 0.0), Eigen::Vector4d(0.5, 0.2, 1.0, 0.05)};
  TinyDenoiserNet net(cfg, s, stats);
  net.initialize(4);

  const int frames = cfg.shape.frames;
  Eigen::MatrixXd k(frames, frames);
  for (int a = 0; a < frames; ++a) {
    for (int b = 0; b < frames; ++b) k(a, b) = std::exp(-0.5 * (a - b) * (a - b) / 6.25);
  }
  k.diagonal().array() += 1e-6;
  MotionArray mean(cfg.shape);
  std::vector<Eigen::MatrixXd> covariances;
  for (int c = 0; c < 4; ++c) {
    mean.data().col(c).setConstant(stats.mean[c]);
    covariances.push_back(stats.scale[c] * stats.scale[c] * k);
  }
  const GaussianMotionPrior prior(mean, covariances);

  Rng rng(23);
  const MotionArray y = random_array(cfg.shape, rng);
  std::vector<MotionArray> in = {y}, out(1);
  for (int t : {1, 30, 100}) {
    const int ts[] = {t};
    net.predict(in, {}, ts, out);
    const MotionArray expected = gaussian_posterior_x0(prior, s, y, t);
    EXPECT_LT((out[0].data() - expected.data()).cwiseAbs().maxCoeff(), 1e-8) << "t=" << t;
  }
}

TEST(NetworkTest, LayoutAndLimits) {
  NetworkConfig cfg;
  EXPECT_LT(TinyDenoiserNet::layout(cfg).back().offset + TinyDenoiserNet::layout(cfg).back().size(), 5'000'000);
  cfg.mode = DenoiserMode::retiming;
  const auto blocks = TinyDenoiserNet::layout(cfg);
  EXPECT_LT(blocks.back().offset + blocks.back().size(), 5'000'000);
  EXPECT_EQ(blocks.front().name, "in.W");
  EXPECT_EQ(blocks.front().cols, 2 * 60 * 48 + 32);
  Eigen::Index expected = 0;
  for (const auto& b : blocks) {
    EXPECT_EQ(b.offset, expected);
    expected += b.size();
  }
  EXPECT_EQ(parse_denoiser_mode("R"), DenoiserMode::retiming);
  EXPECT_EQ(parse_denoiser_mode("unconditioned"), DenoiserMode::unconditioned);
  EXPECT_THROW(parse_denoiser_mode("Q"), ValidationError);
}

TEST(NetworkTest, TimestepEmbeddingIsBoundedAndDistinct) {
  const Eigen::VectorXd a = timestep_embedding(1, 1000, 16);
  const Eigen::VectorXd b = timestep_embedding(2, 1000, 16);
  EXPECT_EQ(a.size(), 16);
  EXPECT_LE(a.cwiseAbs().maxCoeff(), 1.0);
  EXPECT_GT((a - b).norm(), 1e-3);
  EXPECT_EQ(a, timestep_embedding(1, 1000, 16));
}

TEST(NetworkTest, SetParametersValidates) {
  TinyDenoiserNet net(tiny_config(DenoiserMode::unconditioned), NoiseSchedule(10),
                      ChannelStats{Eigen::VectorXd::Zero(4), Eigen::VectorXd::Ones(4)});
  EXPECT_THROW(net.set_parameters(Eigen::VectorXd::Zero(3)), ValidationError);
  Eigen::VectorXd p = Eigen::VectorXd::Zero(net.parameter_count());
  p[2] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(net.set_parameters(p), ValidationError);
}

TrainingConfig quick_training(std::uint64_t seed, int iterations) {
  TrainingConfig c;
  c.iterations = iterations;
  c.batch_size = 16;
  c.hidden = 32;
  c.depth = 2;
  c.time_embedding = 8;
  c.steps = 100;
  c.warmup = 10;
  c.seed = seed;
  return c;
}

TEST(TrainingTest, DeterministicForSeed) {
  const auto data = synth_dataset(20, 12, 1);
  const TrainingResult a = train_denoiser(data, DenoiserMode::retiming, quick_training(3, 30));
  const TrainingResult b = train_denoiser(data, DenoiserMode::retiming, quick_training(3, 30));
  EXPECT_EQ(a.net->parameters(), b.net->parameters());
  EXPECT_EQ(a.final_loss, b.final_loss);
  const TrainingResult c = train_denoiser(data, DenoiserMode::retiming, quick_training(4, 30));
  EXPECT_FALSE(a.net->parameters() == c.net->parameters());
}

TEST(TrainingTest, ConstantDatasetIsLearned) {
  const Motion constant = [] {
    const Motion m = synth_motion(MotionKind::idle, 16, 3);
    MotionArray frames = m.frames();
    for (int f = 1; f < 16; ++f) frames.set_pose(f, frames.pose(0));
    return Motion(frames);
  }();
  const std::vector<Motion> data(100, constant);
  const TrainingResult r = train_denoiser(data, DenoiserMode::unconditioned, quick_training(5, 200));
  NetworkDenoiserU u(r.net);
  Rng rng(20);
  double mse = 0.0;
  int count = 0;
  for (int t = 1; t <= 100; t += 7) {
    const MotionArray yt = forward_noise(u.schedule(), constant.frames(), t, random_array(constant.frames().shape(), rng));
    mse += (u.predict(yt, t).data() - constant.frames().data()).squaredNorm() / constant.frames().data().size();
    ++count;
  }
  EXPECT_LT(mse / count, 1e-3);
}

TEST(TrainingTest, LossDecreasesAndRIsAccurateNearZeroNoise) {
  const auto data = synth_dataset(120, 20, 2);
  TrainingConfig cfg = quick_training(6, 400);
  cfg.hidden = 64;
  std::vector<double> losses;
  const TrainingResult r =
      train_denoiser(data, DenoiserMode::retiming, cfg, [&](int, double l) { losses.push_back(l); });
  ASSERT_EQ(losses.size(), 400u);
  const double early = std::accumulate(losses.begin(), losses.begin() + 20, 0.0) / 20;
  EXPECT_LT(r.final_loss, early);
  NetworkDenoiserR rr(r.net);
  Rng rng(21);
  for (const Motion& held_out : synth_dataset(10, 20, 999)) {
    BlockingSet b;
    b.timeline_length = 20;
    for (int f : {0, 6, 13, 19}) {
      BlockingPose k;
      k.frame = f;
      k.pose = held_out.frames().pose(f);
      k.specified.assign(16, true);
      k.tolerance = Eigen::VectorXd::Ones(16);
      b.poses.push_back(k);
    }
    const MotionArray yt = forward_noise(rr.schedule(), held_out.frames(), 1, random_array(held_out.frames().shape(), rng));
    const MotionArray x0 = rr.predict(build_condition(b), yt, 1);
    const double rms = std::sqrt((x0.data() - held_out.frames().data()).squaredNorm() / x0.data().size());
    EXPECT_LT(rms, 0.05);
  }
}

TEST(TrainingTest, RejectsMixedLengthsAndBadConfig) {
  std::vector<Motion> data = synth_dataset(4, 12, 1);
  data.push_back(synth_motion(MotionKind::walk, 13, 0));
  EXPECT_THROW(train_denoiser(data, DenoiserMode::unconditioned, quick_training(0, 2)), ValidationError);
  TrainingConfig bad = quick_training(0, 2);
  bad.batch_size = 0;
  EXPECT_THROW(bad.validate(), ValidationError);
}

TEST(TrainingTest, ConfigJsonRoundTrip) {
  TrainingConfig c = quick_training(123456789012345ULL, 77);
  c.learning_rate = 3e-4;
  EXPECT_EQ(TrainingConfig::from_json(c.to_json()), c);
  nlohmann::json doc = c.to_json();
  doc["mystery"] = 1;
  EXPECT_THROW(TrainingConfig::from_json(doc), ValidationError);
  EXPECT_EQ(TrainingConfig::from_json(nlohmann::json::object()), TrainingConfig{});
}

TEST(TrainingTest, TrainingConditionIsDenseAndFinite) {
  Rng rng(22);
  const Motion clip = synth_motion(MotionKind::walk, 60, 5);
  for (int i = 0; i < 50; ++i) {
    const Condition c = make_training_condition(clip.frames(), 10, 5, rng);
    EXPECT_EQ(c.frames.shape(), clip.frames().shape());
    EXPECT_TRUE(c.frames.all_finite());
    // Every condition frame lies on a segment between two clip poses, so the
    // root-relative offsets stay within the clip's range.
    for (int ch = 3; ch < 48; ++ch) {
      EXPECT_LE(c.frames.data().col(ch).maxCoeff(), clip.frames().data().col(ch).maxCoeff() + 1e-12);
      EXPECT_GE(c.frames.data().col(ch).minCoeff(), clip.frames().data().col(ch).minCoeff() - 1e-12);
    }
  }
}

TEST(CheckpointTest, RoundTripIsBitExact) {
  TempDir dir("ckpt");
  const auto data = synth_dataset(10, 12, 3);
  const TrainingResult r = train_denoiser(data, DenoiserMode::retiming, quick_training(7, 5));
  const Checkpoint c = checkpoint_from(r);
  save_checkpoint(c, dir.path() / "r.ckpt");
  const Checkpoint back = load_checkpoint(dir.path() / "r.ckpt");
  EXPECT_EQ(back.net->parameters(), r.net->parameters());
  EXPECT_EQ(back.net->config(), r.net->config());
  EXPECT_EQ(back.net->stats(), r.net->stats());
  EXPECT_EQ(back.net->schedule(), r.net->schedule());
  EXPECT_EQ(back.final_loss, r.final_loss);
  EXPECT_EQ(back.clip_count, 10);
  EXPECT_EQ(TrainingConfig::from_json(back.training), r.config);
}

TEST(CheckpointTest, CorruptionIsDetected) {
  const auto data = synth_dataset(4, 12, 3);
  const std::string bytes =
      serialize_checkpoint(checkpoint_from(train_denoiser(data, DenoiserMode::unconditioned, quick_training(8, 2))));
  EXPECT_NO_THROW(deserialize_checkpoint(bytes));

  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(deserialize_checkpoint(bad_magic), ParseError);

  std::string bad_version = bytes;
  bad_version[8] = 9;
  EXPECT_THROW(deserialize_checkpoint(bad_version), ParseError);

  EXPECT_THROW(deserialize_checkpoint(bytes.substr(0, bytes.size() - 8)), ParseError);
  EXPECT_THROW(deserialize_checkpoint(bytes + "x"), ParseError);

  // Tamper with the shape table: "rows":32 becomes "rows":31.
  std::string bad_shape = bytes;
  const auto pos = bad_shape.find("\"rows\":32");
  ASSERT_NE(pos, std::string::npos);
  bad_shape[pos + 8] = '1';
  EXPECT_THROW(deserialize_checkpoint(bad_shape), ValidationError);
}

}  // namespace
}  // namespace blockdetail
