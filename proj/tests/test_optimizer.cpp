#include "skewsplat/optimizer.hpp"
#include "skewsplat/verify.hpp"

#include <gtest/gtest.h>

using namespace skewsplat;

TEST(Adam, HandTrace) {
  // g = 1 then g = -1 with lr 0.1:
  //   step 1: m_hat = 1, v_hat = 1 -> p = 1 - 0.1
  //   step 2: m = -0.01, v = 0.001999, m_hat = -1/19, v_hat = 1 -> p += 0.1 / 19
  std::vector<double> p = {1.0};
  AdamSlot slot;
  slot.resize(1);
  const AdamHyper hp{0.1, 0.9, 0.999, 0.0};
  adam_step(p, std::vector<double>{1.0}, slot, hp);
  EXPECT_NEAR(p[0], 0.9, 1e-15);
  EXPECT_EQ(slot.steps, 1);
  adam_step(p, std::vector<double>{-1.0}, slot, hp);
  EXPECT_NEAR(p[0], 0.9 + 0.1 / 19.0, 1e-14);
  EXPECT_NEAR(slot.m[0], -0.01, 1e-16);
  EXPECT_NEAR(slot.v[0], 0.001999, 1e-16);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  std::vector<double> p = {0.0, 5.0, -2.0};
  AdamSlot slot;
  slot.resize(3);
  adam_step(p, std::vector<double>{3.0, -1e-6, 40.0}, slot, AdamHyper{0.01});
  EXPECT_NEAR(p[0], -0.01, 1e-12);
  EXPECT_NEAR(p[1], 5.01, 1e-9);
  EXPECT_NEAR(p[2], -2.01, 1e-12);
}

TEST(Adam, FrozenStepIsBitExact) {
  std::vector<double> p = {0.3, -0.7};
  AdamSlot slot;
  slot.resize(2);
  adam_step(p, std::vector<double>{1.0, 2.0}, slot, AdamHyper{});
  const auto p0 = p;
  const auto s0 = slot;
  adam_step(p, std::vector<double>{5.0, 6.0}, slot, AdamHyper{}, true);
  EXPECT_EQ(p, p0);
  EXPECT_EQ(slot.m, s0.m);
  EXPECT_EQ(slot.v, s0.v);
  EXPECT_EQ(slot.steps, s0.steps);
}

TEST(Adam, RejectsNonFiniteAndMismatchedShapes) {
  std::vector<double> p = {0.0};
  AdamSlot slot;
  slot.resize(1);
  EXPECT_THROW(adam_step(p, std::vector<double>{std::nan("")}, slot, AdamHyper{}), NumericalError);
  EXPECT_EQ(slot.steps, 0);
  EXPECT_THROW(adam_step(p, std::vector<double>{1.0, 2.0}, slot, AdamHyper{}), ConfigError);
}

TEST(Sghmc, FullFrictionNoNoiseIsGradientDescent) {
  std::mt19937_64 rng(1);
  const auto rng0 = rng;
  Vec3 mu(1, 2, 3), mom(5, 5, 5);
  sghmc_step(mu, Vec3(1, -2, 0.5), mom, SGHMCHyper{0.1, 1.0, 0.0}, rng);
  EXPECT_LT((mu - Vec3(0.9, 2.2, 2.95)).norm(), 1e-15);
  EXPECT_TRUE(rng == rng0);  // no draws without noise
}

TEST(Sghmc, ZeroFrictionAccumulatesMomentum) {
  std::mt19937_64 rng(1);
  Vec3 mu = Vec3::Zero(), mom = Vec3::Zero();
  const SGHMCHyper hp{0.5, 0.0, 0.0};
  for (int i = 0; i < 3; ++i) sghmc_step(mu, Vec3(1, 0, 0), mom, hp, rng);
  // momentum -0.5, -1, -1.5; position -3.
  EXPECT_NEAR(mom.x(), -1.5, 1e-15);
  EXPECT_NEAR(mu.x(), -3.0, 1e-15);
}

TEST(Sghmc, NoiseVarianceScalesWithLearningRate) {
  std::mt19937_64 rng(2);
  const SGHMCHyper hp{0.04, 1.0, 2.0};  // std = 2 * sqrt(0.04) = 0.4
  double acc = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    Vec3 mu = Vec3::Zero(), mom = Vec3::Zero();
    sghmc_step(mu, Vec3::Zero(), mom, hp, rng);
    acc += mu.squaredNorm();
  }
  EXPECT_NEAR(acc / (3.0 * n), 0.16, 0.006);
}

TEST(Schedule, PhaseBoundaries) {
  BCDConfig c;  // 500 / 100 / 50
  EXPECT_EQ(bcd_phase(0, c), Phase::joint);
  EXPECT_EQ(bcd_phase(500, c), Phase::joint);
  EXPECT_EQ(bcd_phase(501, c), Phase::base_only);
  EXPECT_EQ(bcd_phase(549, c), Phase::base_only);
  EXPECT_EQ(bcd_phase(550, c), Phase::skew_only);
  EXPECT_EQ(bcd_phase(599, c), Phase::skew_only);
  EXPECT_EQ(bcd_phase(600, c), Phase::base_only);
  c.enabled = false;
  EXPECT_EQ(bcd_phase(550, c), Phase::joint);
}

TEST(Schedule, MatchesReferenceTranscription) {
  const auto r = verify::check_bcd_schedule(20000);
  EXPECT_TRUE(r.pass) << r.worst;
}

TEST(Schedule, InvalidConfigsThrow) {
  BCDConfig c;
  c.base_len = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c.base_len = 100;
  EXPECT_THROW(c.validate(), ConfigError);
  c.base_len = 50;
  c.t_start = -1;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Updates, FrozenGroupsStayBitExact) {
  const auto r = verify::check_freeze_exact(120, 5);
  EXPECT_TRUE(r.pass) << r.worst << " " << r.note;
}

TEST(Updates, LearningRateDecay) {
  OptimizerConfig c;
  c.lr_mu = 1e-2;
  c.lr_mu_final = 1e-4;
  c.lr_mu_decay_steps = 100;
  EXPECT_DOUBLE_EQ(c.mu_lr_at(0), 1e-2);
  EXPECT_NEAR(c.mu_lr_at(50), 1e-3, 1e-15);
  EXPECT_NEAR(c.mu_lr_at(100), 1e-4, 1e-17);
  EXPECT_NEAR(c.mu_lr_at(1000), 1e-4, 1e-17);
}

TEST(Updates, InvariantsRestored) {
  std::vector<Primitive3D> scene(3);
  TrainState st(3, 1);
  OptimizerConfig cfg;
  cfg.lr_log_scale = 50.0;
  cfg.lr_color = 10.0;
  std::vector<GradientBundle> g(3);
  for (auto& b : g) {
    b.d_quat = Vec4(0.3, -1, 2, 0.1);
    b.d_log_scale = Vec3::Constant(1e3);
    b.d_color = Vec3(-1, 1, -1);
  }
  apply_updates(scene, g, st, cfg);
  for (const auto& p : scene) {
    EXPECT_NEAR(p.quat.norm(), 1.0, 1e-12);
    EXPECT_GE(p.log_scale.minCoeff(), std::log(cfg.scale_floor));
    EXPECT_GE(p.color.minCoeff(), 0.0);
    EXPECT_LE(p.color.maxCoeff(), 1.0);
  }
  EXPECT_EQ(st.iter, 1);
}

TEST(Updates, NonFiniteGradientNamesPrimitive) {
  std::vector<Primitive3D> scene(2);
  TrainState st(2, 1);
  std::vector<GradientBundle> g(2);
  g[1].d_mag_raw = std::numeric_limits<double>::infinity();
  try {
    apply_updates(scene, g, st, OptimizerConfig{});
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find('1'), std::string::npos);
  }
}

TEST(Updates, SizeMismatchThrows) {
  std::vector<Primitive3D> scene(2);
  TrainState st(3, 1);
  std::vector<GradientBundle> g(2);
  EXPECT_THROW(apply_updates(scene, g, st, OptimizerConfig{}), ConfigError);
}

TEST(Updates, PinnedSkewNeverMoves) {
  std::vector<Primitive3D> scene(2);
  scene[0].skew.mag_raw = -3.0;
  TrainState st(2, 1);
  OptimizerConfig cfg;
  cfg.skew_trainable = false;
  std::vector<GradientBundle> g(2);
  for (auto& b : g) {
    b.d_mag_raw = 1.0;
    b.d_dir_raw = Vec3::Ones();
  }
  for (int i = 0; i < 5; ++i) apply_updates(scene, g, st, cfg);
  EXPECT_EQ(scene[0].skew.mag_raw, -3.0);
  EXPECT_EQ(scene[1].skew.dir_raw, Vec3::Zero());
  EXPECT_EQ(st.mag_raw.steps, 0);
}
