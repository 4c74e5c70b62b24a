#include "blockdetail/baselines/masks.h"
#include "blockdetail/baselines/strategies.h"
#include "blockdetail/common/error.h"
#include "blockdetail/diffusion/gaussian.h"
#include "blockdetail/diffusion/sampler.h"
#include "blockdetail/motion/condition.h"
#include "blockdetail/motion/synth.h"
#include "test_support.h"

#include <gtest/gtest.h>

#include <set>

namespace blockdetail {
namespace {

using testing::random_array;
using testing::random_blocking;

class ConstantU final : public DenoiserU {
 public:
  ConstantU(MotionArray value, NoiseSchedule schedule)
      : value_(std::move(value)), schedule_(std::move(schedule)) {}
  const NoiseSchedule& schedule() const override { return schedule_; }
  ArrayShape shape() const override { return value_.shape(); }
  std::string name() const override { return "constant-u"; }
  void predict_batch(std::span<const MotionArray>, int, std::span<MotionArray> out) const override {
    for (auto& o : out) o = value_;
  }

 private:
  MotionArray value_;
  NoiseSchedule schedule_;
};

class ConstantR final : public DenoiserR {
 public:
  ConstantR(MotionArray value, NoiseSchedule schedule)
      : value_(std::move(value)), schedule_(std::move(schedule)) {}
  const NoiseSchedule& schedule() const override { return schedule_; }
  ArrayShape shape() const override { return value_.shape(); }
  std::string name() const override { return "constant-r"; }
  void predict_batch(std::span<const Condition>, std::span<const MotionArray>, int,
                     std::span<MotionArray> out) const override {
    for (auto& o : out) o = value_;
  }

 private:
  MotionArray value_;
  NoiseSchedule schedule_;
};

struct GaussianModels {
  std::shared_ptr<const GaussianMotionPrior> prior;
  NoiseSchedule schedule;
  GaussianDenoiserU u;
  GaussianDenoiserR r;

  explicit GaussianModels(int steps)
      : prior(std::make_shared<const GaussianMotionPrior>(
            GaussianMotionPrior::fit(synth_dataset(40, 60, 11)))),
        schedule(steps),
        u(prior, schedule),
        r(prior, schedule) {}
};

BlockingSet clip_blocking(std::uint64_t seed, std::vector<int> frames, double tolerance = 0.85) {
  const MotionArray clip = synth_motion(MotionKind::walk, 60, seed).frames();
  BlockingSet b;
  b.timeline_length = 60;
  for (int f : frames) {
    BlockingPose k;
    k.frame = f;
    k.pose = clip.pose(f);
    k.specified.assign(16, false);
    for (int j : SkeletonSpec::desk().important_joints) k.specified[j] = true;
    const SkeletonSpec s = SkeletonSpec::desk();
    for (int j = 0; j < 16; ++j) {
      if (!k.specified[j]) k.pose.set_position(j, s.neutral(j));
    }
    k.tolerance = Eigen::VectorXd::Constant(16, tolerance);
    b.poses.push_back(k);
  }
  return b;
}

TEST(MaskTest, SparseMaskConstruction) {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const BlockingSet b = random_blocking({40, 8, 3}, 1 + trial % 6, rng, 1.0);
    const BlendMask m = sparse_mask(b, 0.7);
    EXPECT_NO_THROW(m.validate());
    std::set<int> key_frames;
    for (const auto& k : b.poses) key_frames.insert(k.frame);
    int nonzero_rows = 0;
    for (int f = 0; f < 40; ++f) {
      if (m.values.row(f).maxCoeff() > 0.0) ++nonzero_rows;
      for (int j = 0; j < 8; ++j) {
        double expected = 0.0;
        for (const auto& k : b.poses) {
          if (k.frame == f && k.specified[j]) expected = 0.7;
        }
        EXPECT_EQ(m.values(f, j), expected);
      }
    }
    EXPECT_EQ(nonzero_rows, b.size());
    EXPECT_TRUE(sparse_mask(b, 0.0).values.isZero());
  }
}

TEST(MaskTest, SoftMaskTriangleEndpoints) {
  BlockingSet b = clip_blocking(1, {20});
  const BlendMask m = soft_mask(b, 0.8, 10);
  EXPECT_EQ(m.values(20, 0), 0.8);
  EXPECT_EQ(m.values(10, 0), 0.0);
  EXPECT_EQ(m.values(30, 0), 0.0);
  EXPECT_NEAR(m.values(25, 0), 0.4, 1e-15);
  EXPECT_EQ(m.values(20, desk::kLeftWrist), 0.0);

  const BlendMask two = soft_mask(clip_blocking(1, {10, 30}), 1.0, 10);
  EXPECT_EQ(two.values(20, 0), 0.0);
  EXPECT_NEAR(two.values(19, 0), 0.1, 1e-15);
  EXPECT_NEAR(two.values(21, 0), 0.1, 1e-15);
}

TEST(MaskTest, SoftMaskMatchesBruteForceMaximum) {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const BlockingSet b = random_blocking({50, 6, 3}, 1 + trial % 7, rng, 1.0);
    const double c = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const int falloff = std::uniform_int_distribution<int>(1, 15)(rng);
    const BlendMask m = soft_mask(b, c, falloff);
    const BlendMask sparse = sparse_mask(b, c);
    for (int f = 0; f < 50; ++f) {
      for (int j = 0; j < 6; ++j) {
        double expected = 0.0;
        for (const auto& k : b.poses) {
          if (!k.specified[j]) continue;
          const double tri = c * std::max(0.0, 1.0 - std::abs(f - k.frame) / double(falloff));
          expected = std::max(expected, tri);
        }
        EXPECT_NEAR(m.values(f, j), expected, 1e-15);
        EXPECT_GE(m.values(f, j), sparse.values(f, j));
      }
    }
  }
}

TEST(MaskTest, ValidationRejectsOutOfRange) {
  BlendMask m = BlendMask::constant(4, 2, 0.5);
  EXPECT_NO_THROW(m.validate());
  m.values(1, 1) = 1.5;
  EXPECT_THROW(m.validate(), ValidationError);
  m.values(1, 1) = std::nan("");
  EXPECT_THROW(m.validate(), ValidationError);
  EXPECT_THROW(sparse_mask(clip_blocking(1, {3}), 2.0), ValidationError);
  EXPECT_THROW(soft_mask(clip_blocking(1, {3}), 0.5, 0), ValidationError);
}

TEST(BlendedSampleTest, ReducesToRAndUAtMaskExtremes) {
  const GaussianModels m(100);
  const BlockingSet b = clip_blocking(3, {5, 25, 50});
  const MotionArray ones = blended_sample(m.r, m.u, b, BlendMask::constant(60, 16, 1.0), 42);
  EXPECT_EQ(ones, sample_conditioned(m.r, build_condition(b), 42));
  const MotionArray zeros = blended_sample(m.r, m.u, b, BlendMask::constant(60, 16, 0.0), 42);
  EXPECT_EQ(zeros, sample(m.u, 42));
}

TEST(BlendedSampleTest, SingleStepIsConvexCombination) {
  const NoiseSchedule one(1);
  Rng rng(4);
  const ArrayShape shape{2, 3, 3};
  const MotionArray ur = random_array(shape, rng), rr = random_array(shape, rng);
  const ConstantU u(ur, one);
  const ConstantR r(rr, one);
  BlockingSet b = random_blocking(shape, 1, rng, 1.0);
  BlendMask mask = BlendMask::constant(2, 3, 0.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int f = 0; f < 2; ++f)
    for (int j = 0; j < 3; ++j) mask.values(f, j) = unit(rng);
  const MotionArray out = blended_sample(r, u, b, mask, 7);
  for (int f = 0; f < 2; ++f) {
    for (int j = 0; j < 3; ++j) {
      for (int d = 0; d < 3; ++d) {
        const double w = mask.values(f, j);
        EXPECT_NEAR(out(f, j, d), w * rr(f, j, d) + (1.0 - w) * ur(f, j, d), 1e-15);
      }
    }
  }
}

TEST(GuidanceTest, GradientArithmetic) {
  Rng rng(5);
  BlockingSet b;
  b.timeline_length = 4;
  BlockingPose k;
  k.frame = 2;
  k.pose = Pose(2, 1);
  k.pose(0, 0) = 0.0;
  k.pose(1, 0) = 1.0;  // target g
  k.specified = {true, true};
  k.tolerance = Eigen::VectorXd::Ones(2);
  b.poses.push_back(k);
  MotionArray x0({4, 2, 1});
  x0(2, 1, 0) = 3.0;  // e
  x0(2, 0, 0) = 0.0;
  x0(1, 1, 0) = 9.0;  // unconstrained frame
  apply_guidance(b, 0.25, x0);
  EXPECT_DOUBLE_EQ(x0(2, 1, 0), 3.0 - 0.5 * (3.0 - 1.0));
  EXPECT_EQ(x0(1, 1, 0), 9.0);
  EXPECT_EQ(x0(2, 0, 0), 0.0);

  b.poses[0].specified[1] = false;
  MotionArray untouched({4, 2, 1});
  untouched(2, 1, 0) = 3.0;
  apply_guidance(b, 0.25, untouched);
  EXPECT_EQ(untouched(2, 1, 0), 3.0);
}

TEST(GuidanceTest, CorrectionIsLinearInWeight) {
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const BlockingSet b = random_blocking({20, 5, 3}, 3, rng, 1.0);
    const MotionArray x = random_array({20, 5, 3}, rng);
    const double w1 = std::uniform_real_distribution<double>(0.0, 3.0)(rng);
    MotionArray a = x, c = x;
    apply_guidance(b, w1, a);
    apply_guidance(b, 2.0 * w1, c);
    // x - 2w(x - X) is affine in w: c - x = 2 (a - x).
    EXPECT_LT(((c.data() - x.data()) - 2.0 * (a.data() - x.data())).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(GuidanceTest, ResidualScalesByOneMinusTwoW) {
  Rng rng(7);
  const BlockingSet b = random_blocking({20, 5, 3}, 4, rng, 1.0);
  const MotionArray x = random_array({20, 5, 3}, rng);
  std::vector<double> residuals;
  for (double w : {0.0, 0.25, 0.5, 1.0, 5.0}) {
    MotionArray g = x;
    apply_guidance(b, w, g);
    double base = 0.0, res = 0.0;
    for (const auto& k : b.poses) {
      for (int j = 0; j < 5; ++j) {
        if (!k.specified[j]) continue;
        for (int d = 0; d < 3; ++d) {
          base = std::max(base, std::abs(x(k.frame, j, d) - k.pose(j, d)));
          res = std::max(res, std::abs(g(k.frame, j, d) - k.pose(j, d)));
        }
      }
    }
    EXPECT_NEAR(res, std::abs(1.0 - 2.0 * w) * base, 1e-12) << "w=" << w;
    residuals.push_back(res);
  }
  // Non-increasing over w in [0, 1/2], where the step does not overshoot.
  EXPECT_GE(residuals[0], residuals[1]);
  EXPECT_GE(residuals[1], residuals[2]);
  EXPECT_LT(residuals[2], 1e-12);
}

TEST(GuidanceTest, FinalResidualShrinksWithWeightOnGaussianModel) {
  const GaussianModels m(100);
  const BlockingSet b = clip_blocking(5, {10, 40});
  double previous = std::numeric_limits<double>::infinity();
  for (double w : {0.0, 0.25, 0.5}) {
    const MotionArray out = guided_sample(m.u, b, {w}, 11);
    double res = 0.0;
    for (const auto& k : b.poses) {
      for (int j = 0; j < 16; ++j) {
        if (!k.specified[j]) continue;
        for (int d = 0; d < 3; ++d) res = std::max(res, std::abs(out(k.frame, j, d) - k.pose(j, d)));
      }
    }
    EXPECT_LE(res, previous + 1e-12) << "w=" << w;
    previous = res;
  }
  EXPECT_LT(previous, 1e-12);
}

TEST(GuidanceTest, ZeroWeightIsUnconditionedSampling) {
  const GaussianModels m(100);
  EXPECT_EQ(guided_sample(m.u, clip_blocking(6, {0, 30}), {0.0}, 13), sample(m.u, 13));
}

TEST(HardImputeTest, KeysAreExactAndEmptyIsNoOp) {
  const GaussianModels m(100);
  const BlockingSet b = clip_blocking(7, {3, 17, 44, 59});
  const MotionArray out = hard_impute_sample(m.u, b, 21);
  for (const auto& k : b.poses) {
    for (int j = 0; j < 16; ++j) {
      if (!k.specified[j]) continue;
      for (int d = 0; d < 3; ++d) EXPECT_EQ(out(k.frame, j, d), k.pose(j, d));
    }
  }
  BlockingSet empty;
  empty.timeline_length = 60;
  MotionArray x = m.prior->mean();
  const MotionArray before = x;
  apply_imputation(empty, x);
  EXPECT_EQ(x, before);
  std::vector<BlockingSet> none(1, empty);
  const std::uint64_t seed = 21;
  EXPECT_EQ(hard_impute_batch(m.u, none, std::span(&seed, 1))[0], sample(m.u, 21));
}

TEST(StrategyDescriptorTest, ParseLabelAndJson) {
  const StrategyDescriptor d = StrategyDescriptor::parse("detailing,c=0.85,n=50,ground_fix=off");
  EXPECT_EQ(d.kind, StrategyKind::detailing);
  EXPECT_EQ(d.c, 0.85);
  EXPECT_EQ(d.cadence, 50);
  EXPECT_FALSE(d.ground_fix);
  EXPECT_EQ(d.label(), "detailing,c=0.85,n=50,ground_fix=off");
  EXPECT_EQ(StrategyDescriptor::parse(d.label()), d);
  EXPECT_EQ(StrategyDescriptor::from_json(d.to_json()), d);
  EXPECT_EQ(StrategyDescriptor::from_json(nlohmann::json("u-guidance,w=5")).weight, 5.0);
  EXPECT_EQ(StrategyDescriptor::parse("soft-mask").label(), "soft-mask,c=0.85");
  EXPECT_EQ(StrategyDescriptor::parse("r-notolerance").label(), "r-notolerance");

  for (const char* bad : {"teleport", "detailing,c=1.5", "detailing,n=0", "u-guidance,w=-1",
                          "detailing,zeta=3", "detailing,c", "soft-mask,falloff=0",
                          "detailing,n=abc"}) {
    EXPECT_THROW(StrategyDescriptor::parse(bad), ValidationError) << bad;
  }
}

TEST(StrategyRunTest, AllKindsShareOneSamplerCore) {
  const GaussianModels m(100);
  const std::vector<BlockingSet> blockings = {clip_blocking(8, {4, 30, 57}), clip_blocking(9, {10, 50})};
  const std::vector<std::uint64_t> seeds = {100, 200};
  const StrategyModels models{&m.r, &m.u, SkeletonSpec::desk()};
  auto run = [&](const std::string& text) {
    return run_strategy_batch(StrategyDescriptor::parse(text), models, blockings, seeds);
  };
  const auto r_only = run("r-notolerance");
  const auto u_only = run("unconditioned");
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(r_only[i].motion, sample_conditioned(m.r, build_condition(blockings[i]), seeds[i]));
    EXPECT_EQ(u_only[i].motion, sample(m.u, seeds[i]));
    EXPECT_EQ(run("detailing,c=1")[i].motion, r_only[i].motion);
    EXPECT_EQ(run("u-guidance,w=0")[i].motion, u_only[i].motion);
    EXPECT_EQ(run("diffusion-blending,c=0")[i].motion, u_only[i].motion);
    EXPECT_EQ(run("soft-mask,c=0")[i].motion, u_only[i].motion);
    EXPECT_EQ(run("hard-impute")[i].motion, hard_impute_sample(m.u, blockings[i], seeds[i]));
    EXPECT_EQ(run("diffusion-blending,c=0.7")[i].motion,
              blended_sample(m.r, m.u, blockings[i], sparse_mask(blockings[i], 0.7), seeds[i]));
  }
  const auto detailed = run("detailing,n=25");
  ASSERT_TRUE(detailed[0].trace.has_value());
  EXPECT_EQ(detailed[0].trace->events.size(), 4u);
  EXPECT_FALSE(r_only[0].trace.has_value());
}

TEST(StrategyRunTest, MissingModelsAreReported) {
  const GaussianModels m(20);
  const std::vector<BlockingSet> blockings = {clip_blocking(8, {4, 30})};
  const std::vector<std::uint64_t> seeds = {1};
  EXPECT_THROW(run_strategy_batch(StrategyDescriptor::parse("detailing"), {nullptr, &m.u}, blockings, seeds),
               ValidationError);
  EXPECT_THROW(run_strategy_batch(StrategyDescriptor::parse("hard-impute"), {&m.r, nullptr}, blockings, seeds),
               ValidationError);
  EXPECT_NO_THROW(
      run_strategy_batch(StrategyDescriptor::parse("r-notolerance"), {&m.r, nullptr}, blockings, seeds));
}

}  // namespace
}  // namespace blockdetail
