#include "skewsplat/gradients.hpp"
#include "skewsplat/rasterizer.hpp"
#include "skewsplat/verify.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cstring>
#include <numeric>

using namespace skewsplat;

namespace {

CameraModel cam32() {
  CameraModel cam;
  cam.world_to_view = look_at(Vec3(0.3, -0.2, -4), Vec3::Zero());
  cam.width = 40;
  cam.height = 28;
  cam.fx = cam.fy = 45.0;
  cam.cx = 20.0;
  cam.cy = 14.0;
  return cam;
}

std::vector<Primitive3D> random_scene(int n, std::uint64_t seed) {
  verify::Fixtures fx(seed);
  std::vector<Primitive3D> s;
  for (int i = 0; i < n; ++i) {
    auto p = fx.primitive(0.5);
    p.opacity_raw = fx.uni(-0.5, 1.5);
    p.color = Vec3(fx.uni(0, 1), fx.uni(0, 1), fx.uni(0, 1));
    s.push_back(p);
  }
  return s;
}

// Every primitive composited at every pixel in depth order, no tiles or early stop.
Image naive_render(const std::vector<Primitive3D>& scene, const CameraModel& cam, const RenderOptions& o) {
  std::vector<SplatFootprint2D> fps;
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < scene.size(); ++i) {
    if (auto fp = project(scene[i], cam, o.effective_projection())) {
      fps.push_back(*fp);
      ids.push_back(i);
    }
  }
  std::vector<std::size_t> order(fps.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return fps[a].depth < fps[b].depth; });
  Image img(cam.width, cam.height);
  const double gain = o.kernel == KernelMode::gaussian ? 2.0 : 1.0;
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      const Vec2 u(x + 0.5, y + 0.5);
      Vec3 c = Vec3::Zero();
      double T = 1.0;
      for (auto j : order) {
        const auto& fp = fps[j];
        const Vec2 d = u - fp.mu2d;
        const double g = std::exp(-0.5 * d.dot(fp.Omega2d.inverse() * d));
        const double phi = o.kernel == KernelMode::gaussian ? 0.5 : std_normal_cdf(fp.m2d.dot(d));
        double a = gain * scene[ids[j]].opacity() * g * phi;
        a = std::clamp(a, -o.alpha_clamp, o.alpha_clamp);
        c += scene[ids[j]].color * a * T;
        T *= 1.0 - a;
      }
      img.set_pixel(x, y, c + o.background * T);
    }
  }
  return img;
}

double max_abs_diff(const Image& a, const Image& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

}  // namespace

TEST(Render, EmptySceneIsBackground) {
  RenderOptions o;
  o.background = Vec3(0.2, 0.4, 0.6);
  const auto buf = render(std::vector<Primitive3D>{}, cam32(), o);
  for (int y = 0; y < 28; ++y) {
    for (int x = 0; x < 40; ++x) EXPECT_EQ(buf.color.pixel(x, y), o.background);
  }
  for (double t : buf.final_transmittance) EXPECT_EQ(t, 1.0);
}

TEST(Render, MatchesUntiledReference) {
  for (auto mode : {KernelMode::skew_normal, KernelMode::gaussian}) {
    const auto scene = random_scene(12, 31);
    RenderOptions o;
    o.kernel = mode;
    o.radius_mult = 40.0;  // nothing culled by the tile test
    o.t_min = 0.0;
    o.background = Vec3(0.1, 0.2, 0.3);
    const auto buf = render(scene, cam32(), o);
    EXPECT_LT(max_abs_diff(buf.color, naive_render(scene, cam32(), o)), 1e-12);
  }
}

TEST(Render, DefaultCullingStaysClose) {
  const auto scene = random_scene(12, 32);
  RenderOptions o;
  const auto buf = render(scene, cam32(), o);
  o.radius_mult = 40.0;
  o.t_min = 0.0;
  EXPECT_LT(max_abs_diff(buf.color, naive_render(scene, cam32(), o)), 0.05);
}

TEST(Render, PinnedSkewMatchesGaussianMode) {
  // Gaussian mode doubles opacity, so it sees half the opacity of the pinned Skew-Normal scene.
  auto scene = random_scene(10, 33);
  for (auto& p : scene) p.skew.dir_raw = Vec3::Zero();
  const auto sn = render(scene, cam32(), RenderOptions{});
  for (auto& p : scene) p.opacity_raw = std::atanh(0.5 * std::tanh(p.opacity_raw));
  RenderOptions og;
  og.kernel = KernelMode::gaussian;
  const auto ref = render(scene, cam32(), og);
  EXPECT_LT(max_abs_diff(sn.color, ref.color), 1e-8);
}

TEST(Render, NegativeOpacitySubtracts) {
  Primitive3D bright;
  bright.log_scale = Vec3::Constant(std::log(0.5));
  bright.opacity_raw = 2.0;
  bright.color = Vec3::Ones();
  Primitive3D dark = bright;
  dark.mu = Vec3(0, 0, -0.5);  // nearer
  dark.opacity_raw = -0.5;
  dark.log_scale = Vec3::Constant(std::log(0.2));
  const auto cam = cam32();
  const auto only = render(std::vector<Primitive3D>{bright}, cam, RenderOptions{});
  const auto both = render(std::vector<Primitive3D>{bright, dark}, cam, RenderOptions{});
  const auto fp = project(dark, cam);
  const int cx = static_cast<int>(fp->mu2d.x()), cy = static_cast<int>(fp->mu2d.y());
  // Negative alpha in front pushes transmittance above one, then subtracts its own color.
  EXPECT_NE(only.color.pixel(cx, cy), both.color.pixel(cx, cy));
  EXPECT_GT(both.final_transmittance[cy * cam.width + cx], only.final_transmittance[cy * cam.width + cx]);
}

TEST(Render, AlphaIsClamped) {
  Primitive3D p;
  p.log_scale = Vec3::Constant(std::log(0.6));
  p.opacity_raw = 10.0;
  RenderOptions o;
  o.kernel = KernelMode::gaussian;
  const auto buf = render(std::vector<Primitive3D>{p}, cam32(), o);
  EXPECT_GT(buf.diag.alpha_clamped, 0);
  for (double t : buf.final_transmittance) EXPECT_GE(t, 0.01 - 1e-15);
}

TEST(Render, HitCapLimitsContributors) {
  std::vector<Primitive3D> scene(5);
  for (int i = 0; i < 5; ++i) {
    scene[i].mu = Vec3(0, 0, 0.1 * i);
    scene[i].opacity_raw = 0.3;
  }
  RenderOptions o;
  o.max_hits_per_pixel = 2;
  const auto buf = render(scene, cam32(), o);
  EXPECT_GT(buf.diag.hit_overflow, 0);
  for (int c : buf.contrib_count) EXPECT_LE(c, 2);
}

TEST(Render, ThreadCountDoesNotChangeBits) {
  const auto scene = random_scene(30, 34);
  RenderOptions o;
  o.tile_size = 8;
  const auto a = render(scene, cam32(), o);
  for (int threads : {2, 3, 4}) {
    for (bool det : {true, false}) {
      o.threads = threads;
      o.deterministic = det;
      const auto b = render(scene, cam32(), o);
      EXPECT_EQ(0, std::memcmp(a.color.data.data(), b.color.data.data(), a.color.data.size() * sizeof(double)));
    }
  }
}

TEST(Render, BadOptionsThrow) {
  RenderOptions o;
  o.tile_size = 0;
  EXPECT_THROW(render(std::vector<Primitive3D>{}, cam32(), o), ConfigError);
  auto cam = cam32();
  cam.world_to_view(0, 0) = 3.0;
  EXPECT_THROW(render(std::vector<Primitive3D>{}, cam, RenderOptions{}), ConfigError);
}

TEST(DepthSort, StableAndRejectsNaN) {
  const std::vector<double> d = {3.0, 1.0, 3.0, 2.0};
  EXPECT_EQ(depth_sort(d), (std::vector<std::size_t>{1, 3, 0, 2}));
  const std::vector<double> bad = {1.0, std::nan("")};
  EXPECT_THROW(depth_sort(bad), NumericalError);
}

TEST(Gradients, KernelLevelDifferences) {
  const auto r = verify::check_kernel_gradients(40, 99);
  EXPECT_TRUE(r.pass) << r.worst << " " << r.note;
}

TEST(Gradients, EndToEndDifferences) {
  const auto r = verify::check_end_to_end_gradients(24, 98);
  EXPECT_TRUE(r.pass) << r.worst << " " << r.note;
}

TEST(Gradients, ThreadedBackpropMatchesSerial) {
  const auto scene = random_scene(20, 35);
  RenderOptions o;
  o.retain_for_backward = true;
  o.tile_size = 8;
  const auto buf = render(scene, cam32(), o);
  std::vector<double> w(buf.color.data.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::sin(0.37 * i);
  const auto g1 = backprop_render(buf, w, scene, cam32(), o);
  o.threads = 4;
  const auto buf4 = render(scene, cam32(), o);
  const auto g4 = backprop_render(buf4, w, scene, cam32(), o);
  for (std::size_t i = 0; i < g1.size(); ++i) {
    EXPECT_EQ(g1[i].d_mu, g4[i].d_mu);
    EXPECT_EQ(g1[i].d_quat, g4[i].d_quat);
    EXPECT_EQ(g1[i].d_log_scale, g4[i].d_log_scale);
    EXPECT_EQ(g1[i].d_mag_raw, g4[i].d_mag_raw);
    EXPECT_EQ(g1[i].d_dir_raw, g4[i].d_dir_raw);
    EXPECT_EQ(g1[i].d_opacity_raw, g4[i].d_opacity_raw);
    EXPECT_EQ(g1[i].d_color, g4[i].d_color);
  }
}

TEST(Gradients, RequiresRetainedHits) {
  const auto scene = random_scene(2, 36);
  const auto buf = render(scene, cam32(), RenderOptions{});
  std::vector<double> w(buf.color.data.size(), 1.0);
  EXPECT_THROW(backprop_render(buf, w, scene, cam32(), RenderOptions{}), Error);
}

TEST(Gradients, GaussianModeLeavesSkewUntouched) {
  const auto scene = random_scene(6, 37);
  RenderOptions o;
  o.kernel = KernelMode::gaussian;
  o.retain_for_backward = true;
  const auto buf = render(scene, cam32(), o);
  std::vector<double> w(buf.color.data.size(), 1.0);
  for (const auto& g : backprop_render(buf, w, scene, cam32(), o)) {
    EXPECT_EQ(g.d_mag_raw, 0.0);
    EXPECT_EQ(g.d_dir_raw, Vec3::Zero());
  }
}
