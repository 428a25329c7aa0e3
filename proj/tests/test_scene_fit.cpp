#include "skewsplat/io.hpp"
#include "skewsplat/scene_fit.hpp"

#include <gtest/gtest.h>

using namespace skewsplat;

namespace {

SceneFitConfig small_config(KernelMode k = KernelMode::skew_normal) {
  SceneFitConfig c;
  c.kernel = k;
  c.n_prims = 12;
  c.iters = 30;
  c.optimizer.bcd.t_start = 10;
  c.optimizer.bcd.cycle_len = 6;
  c.optimizer.bcd.base_len = 3;
  return c;
}

double max_param_diff(const std::vector<Primitive3D>& a, const std::vector<Primitive3D>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto fa = detail::flatten(a[i]), fb = detail::flatten(b[i]);
    for (std::size_t j = 0; j < fa.size(); ++j) m = std::max(m, std::abs(fa[j] - fb[j]));
  }
  return m;
}

}  // namespace

TEST(BoxScene, RaycastHitsBoxes) {
  const auto views = make_box_targets(3, 24, 24);
  ASSERT_EQ(views.size(), 3u);
  for (const auto& v : views) {
    // Centre ray goes through the origin, which lies inside the first box.
    EXPECT_NE(v.target.pixel(12, 12), Vec3::Zero());
    EXPECT_EQ(v.target.pixel(0, 0), Vec3::Zero());
  }
}

TEST(BoxScene, OrthographicRaycast) {
  auto cam = ring_cameras(1, 16, 16)[0];
  cam.mode = ProjectionMode::orthographic;
  cam.fx = cam.fy = 4.0;
  const auto img = raycast_boxes(sharp_box_scene(), cam);
  EXPECT_NE(img.pixel(8, 8), Vec3::Zero());
}

TEST(SceneFit, EmptySceneIsAnError) {
  auto c = small_config();
  c.n_prims = 0;
  EXPECT_THROW(fit_scene(make_box_targets(1, 16, 16), c), ConfigError);
  EXPECT_THROW(fit_scene({}, small_config()), ConfigError);
}

TEST(SceneFit, MismatchedTargetIsAnError) {
  auto views = make_box_targets(1, 16, 16);
  views[0].target = Image(8, 8);
  EXPECT_THROW(fit_scene(views, small_config()), ConfigError);
}

TEST(SceneFit, InitialisationIsSeededAndSkewOnlyInSkewMode) {
  const auto views = make_box_targets(2, 20, 20);
  auto c = small_config();
  const auto a = init_scene(views, c), b = init_scene(views, c);
  EXPECT_EQ(max_param_diff(a, b), 0.0);
  c.kernel = KernelMode::gaussian;
  const auto g = init_scene(views, c);
  for (std::size_t i = 0; i < g.size(); ++i) {
    EXPECT_EQ(g[i].mu, a[i].mu);  // same draws in both modes
    EXPECT_EQ(g[i].skew.dir_raw, Vec3::Zero());
  }
}

TEST(SceneFit, TrainingImprovesTheFit) {
  const auto views = make_box_targets(2, 24, 24);
  auto c = small_config();
  c.iters = 0;
  const auto before = fit_scene(views, c).metrics.mean_psnr;
  c.iters = 120;
  const auto after = fit_scene(views, c);
  EXPECT_GT(after.metrics.mean_psnr, before + 1.0);
  EXPECT_EQ(after.loss_curve.size(), 120u);
}

TEST(SceneFit, ExactTargetIsAFixedPoint) {
  // Pure L1: sign(0) = 0 gives exactly zero gradients. With the SSIM term, roundoff-sized
  // gradients would be rescaled to full steps by Adam.
  auto views = make_box_targets(2, 20, 20);
  auto c = small_config();
  c.lambda_ssim = 0.0;
  SceneTrainer seed_tr(views, c);
  for (std::size_t v = 0; v < views.size(); ++v) views[v].target = seed_tr.render_view(v);
  SceneTrainer tr(views, c, seed_tr.scene(), TrainState(seed_tr.scene().size(), 1));
  const auto start = tr.scene();
  for (int i = 0; i < 5; ++i) EXPECT_EQ(tr.step(), 0.0);
  EXPECT_EQ(max_param_diff(start, tr.scene()), 0.0);
  EXPECT_GE(tr.evaluate().mean_psnr, 90.0);
}

TEST(SceneFit, ResumeContinuesExactly) {
  const auto views = make_box_targets(2, 20, 20);
  auto c = small_config();
  SceneTrainer straight(views, c);
  straight.run(24);

  SceneTrainer first(views, c);
  first.run(11);
  // Round trip through the on-disk encodings.
  auto scene = parse_scene(serialize_scene(first.scene()));
  auto state = parse_train_state(serialize_train_state(first.state()));
  SceneTrainer second(views, c, std::move(scene), std::move(state));
  second.run(13);
  EXPECT_EQ(second.state().iter, 24);
  EXPECT_LE(max_param_diff(straight.scene(), second.scene()), 1e-9);
  for (int i = 0; i < 13; ++i) EXPECT_NEAR(second.loss_curve()[i], straight.loss_curve()[11 + i], 1e-9);
}

TEST(SceneFit, ResumeRejectsMismatchedState) {
  const auto views = make_box_targets(1, 16, 16);
  auto c = small_config();
  SceneTrainer tr(views, c);
  EXPECT_THROW(SceneTrainer(views, c, tr.scene(), TrainState(3, 0)), ConfigError);
  EXPECT_THROW(SceneTrainer(views, c, {}, TrainState(0, 0)), ConfigError);
}

TEST(SceneFit, GaussianModeKeepsSkewPinned) {
  const auto views = make_box_targets(2, 20, 20);
  const auto r = fit_scene(views, small_config(KernelMode::gaussian));
  for (const auto& p : r.scene) {
    EXPECT_EQ(p.skew.dir_raw, Vec3::Zero());
  }
}

TEST(SceneFit, ThreadCountDoesNotChangeResult) {
  const auto views = make_box_targets(2, 24, 24);
  auto c = small_config();
  c.iters = 15;
  const auto a = fit_scene(views, c);
  c.render.threads = 4;
  const auto b = fit_scene(views, c);
  EXPECT_EQ(a.loss_curve, b.loss_curve);
  EXPECT_EQ(max_param_diff(a.scene, b.scene), 0.0);
}
