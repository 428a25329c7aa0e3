#pragma once

// Multi-view scene fitting with the full optimizer stack, plus the synthetic
// "sharp box" scene used to compare Skew-Normal and Gaussian primitives.

#include "skewsplat/camera.hpp"
#include "skewsplat/gradients.hpp"
#include "skewsplat/image.hpp"
#include "skewsplat/metrics.hpp"
#include "skewsplat/optimizer.hpp"
#include "skewsplat/rasterizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

namespace skewsplat {

struct ViewTarget {
  CameraModel camera;
  Image target;
};

struct Box {
  Vec3 lo, hi;
  Vec3 color;
};

/// Point-sampled ray casting of axis-aligned boxes at pixel centers.
inline Image raycast_boxes(const std::vector<Box>& boxes, const CameraModel& cam,
                           const Vec3& background = Vec3::Zero()) {
  cam.validate();
  Image img(cam.width, cam.height);
  const Mat3 rt = cam.view_rotation().transpose();
  const Vec3 eye = -rt * cam.view_translation();
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      const double u = x + 0.5, v = y + 0.5;
      Vec3 origin, dir;
      if (cam.mode == ProjectionMode::pinhole) {
        origin = eye;
        dir = rt * Vec3((u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0);
      } else {
        origin = rt * (Vec3((u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 0.0) - cam.view_translation());
        dir = rt * Vec3(0, 0, 1);
      }
      double best = std::numeric_limits<double>::infinity();
      Vec3 col = background;
      for (const auto& b : boxes) {
        double t0 = 0.0, t1 = best;
        bool hit = true;
        for (int a = 0; a < 3 && hit; ++a) {
          if (std::abs(dir[a]) < 1e-15) {
            if (origin[a] < b.lo[a] || origin[a] > b.hi[a]) hit = false;
            continue;
          }
          double ta = (b.lo[a] - origin[a]) / dir[a];
          double tb = (b.hi[a] - origin[a]) / dir[a];
          if (ta > tb) std::swap(ta, tb);
          t0 = std::max(t0, ta);
          t1 = std::min(t1, tb);
          if (t0 > t1) hit = false;
        }
        if (hit && t0 < best) {
          best = t0;
          col = b.color;
        }
      }
      img.set_pixel(x, y, col);
    }
  }
  return img;
}

inline std::vector<Box> sharp_box_scene() {
  return {
      {Vec3(-0.9, -0.5, -0.5), Vec3(0.1, 0.5, 0.4), Vec3(0.9, 0.25, 0.2)},
      {Vec3(0.25, -0.8, -0.3), Vec3(0.85, 0.15, 0.5), Vec3(0.2, 0.8, 0.3)},
      {Vec3(-0.7, 0.55, -0.7), Vec3(0.7, 0.68, 0.7), Vec3(0.25, 0.35, 0.95)},
  };
}

/// Pinhole cameras on a ring around the origin, all looking at it.
inline std::vector<CameraModel> ring_cameras(int n_views, int width, int height,
                                             double radius = 4.0, double fov_deg = 45.0) {
  std::vector<CameraModel> cams;
  const double f = 0.5 * width / std::tan(0.5 * fov_deg * 3.14159265358979323846 / 180.0);
  for (int i = 0; i < n_views; ++i) {
    const double ang = 2.0 * 3.14159265358979323846 * i / std::max(n_views, 1) + 0.4;
    const Vec3 eye(radius * std::cos(ang), -1.2, radius * std::sin(ang));
    CameraModel cam;
    cam.world_to_view = look_at(eye, Vec3::Zero());
    cam.fx = cam.fy = f;
    cam.cx = 0.5 * width;
    cam.cy = 0.5 * height;
    cam.width = width;
    cam.height = height;
    cam.mode = ProjectionMode::pinhole;
    cams.push_back(cam);
  }
  return cams;
}

inline std::vector<ViewTarget> make_box_targets(int n_views = 3, int width = 64, int height = 64) {
  std::vector<ViewTarget> views;
  const auto boxes = sharp_box_scene();
  for (const auto& cam : ring_cameras(n_views, width, height)) {
    views.push_back({cam, raycast_boxes(boxes, cam)});
  }
  return views;
}

struct SceneFitConfig {
  int n_prims = 64;
  int iters = 3000;
  KernelMode kernel = KernelMode::skew_normal;
  std::uint64_t seed = 0;
  double lambda_ssim = 0.2;
  OptimizerConfig optimizer;
  RenderOptions render;
  // Initialization.
  double init_scale = 0.12;
  double init_opacity = 0.6;
  double init_skew_mag_raw = -16.0;  // m_k about 0.5
  Vec3 init_region_lo = Vec3(-1.2, -1.2, -1.2);
  Vec3 init_region_hi = Vec3(1.2, 1.2, 1.2);

  SceneFitConfig() {
    optimizer.lr_mu = 2e-3;
    optimizer.lr_mu_final = 2e-5;
    optimizer.lr_mu_decay_steps = 3000;
    optimizer.lr_quat = 1e-2;
    optimizer.lr_log_scale = 1e-2;
    optimizer.lr_skew = 5e-2;
    optimizer.bcd.t_start = 500;
    optimizer.bcd.cycle_len = 100;
    optimizer.bcd.base_len = 50;
  }

  /// Optimizer and render settings with the kernel mode applied.
  OptimizerConfig effective_optimizer() const {
    OptimizerConfig o = optimizer;
    if (kernel == KernelMode::gaussian) o.skew_trainable = false;
    return o;
  }
  RenderOptions effective_render() const {
    RenderOptions r = render;
    r.kernel = kernel;
    return r;
  }
};

/// Random primitives inside the region, kept only where they project into every view.
inline std::vector<Primitive3D> init_scene(const std::vector<ViewTarget>& views,
                                           const SceneFitConfig& cfg) {
  if (cfg.n_prims <= 0) throw ConfigError("empty scene: n_prims must be positive");
  if (views.empty()) throw ConfigError("fit_scene needs at least one target view");
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Primitive3D> scene;
  int attempts = 0;
  while (static_cast<int>(scene.size()) < cfg.n_prims) {
    if (++attempts > 1000 * cfg.n_prims) throw ConfigError("could not place primitives in the view frustums");
    Vec3 p;
    for (int a = 0; a < 3; ++a) {
      p[a] = cfg.init_region_lo[a] + (cfg.init_region_hi[a] - cfg.init_region_lo[a]) * uni(rng);
    }
    Vec3 col = Vec3::Zero();
    bool inside = true;
    for (const auto& v : views) {
      const auto la = local_affine(v.camera, p, cfg.render.projection.z_near);
      if (!la) { inside = false; break; }
      const int px = static_cast<int>(std::floor(la->mu2d.x()));
      const int py = static_cast<int>(std::floor(la->mu2d.y()));
      if (px < 0 || py < 0 || px >= v.camera.width || py >= v.camera.height) { inside = false; break; }
      col += v.target.pixel(px, py);
    }
    const Vec3 dir(normal(rng), normal(rng), normal(rng));
    if (!inside) continue;
    Primitive3D prim;
    prim.mu = p;
    prim.quat = Vec4(1, 0, 0, 0);
    prim.log_scale = Vec3::Constant(std::log(cfg.init_scale));
    prim.opacity_raw = std::atanh(cfg.init_opacity);
    prim.color = (col / static_cast<double>(views.size())).cwiseMax(0.0).cwiseMin(1.0);
    if (cfg.kernel == KernelMode::skew_normal) {
      prim.skew.mag_raw = cfg.init_skew_mag_raw;
      prim.skew.dir_raw = dir;
    }
    scene.push_back(prim);
  }
  return scene;
}

struct ViewMetrics {
  std::vector<double> psnr, ssim;
  double mean_psnr = 0.0, mean_ssim = 0.0;
};

/// Owns a scene and its optimizer state; one step renders one view chosen by the state's RNG.
class SceneTrainer {
 public:
  SceneTrainer(std::vector<ViewTarget> views, SceneFitConfig cfg)
      : views_(std::move(views)), cfg_(std::move(cfg)) {
    validate_views();
    scene_ = init_scene(views_, cfg_);
    state_ = TrainState(scene_.size(), cfg_.seed);
  }

  SceneTrainer(std::vector<ViewTarget> views, SceneFitConfig cfg, std::vector<Primitive3D> scene,
               TrainState state)
      : views_(std::move(views)), cfg_(std::move(cfg)), scene_(std::move(scene)),
        state_(std::move(state)) {
    validate_views();
    if (scene_.empty()) throw ConfigError("empty scene");
    if (state_.size() != scene_.size()) throw ConfigError("train state does not match the scene");
  }

  /// Loss of the given view at the current parameters, without updating.
  double loss_on(std::size_t view) const {
    RenderOptions ropts = cfg_.effective_render();
    const auto buf = render(scene_, views_[view].camera, ropts);
    std::vector<double> grad;
    return l1_dssim_loss(buf.color, views_[view].target, cfg_.lambda_ssim, grad);
  }

  double step() {
    std::uniform_int_distribution<std::size_t> pick(0, views_.size() - 1);
    const std::size_t v = pick(state_.rng);
    RenderOptions ropts = cfg_.effective_render();
    ropts.retain_for_backward = true;
    const auto buf = render(scene_, views_[v].camera, ropts);
    std::vector<double> grad;
    const double loss = l1_dssim_loss(buf.color, views_[v].target, cfg_.lambda_ssim, grad);
    const auto bundles = backprop_render(buf, grad, scene_, views_[v].camera, ropts);
    apply_updates(scene_, bundles, state_, cfg_.effective_optimizer());
    loss_curve_.push_back(loss);
    return loss;
  }

  void run(int iters) {
    for (int i = 0; i < iters; ++i) step();
  }

  ViewMetrics evaluate() const {
    ViewMetrics m;
    const RenderOptions ropts = cfg_.effective_render();
    for (const auto& v : views_) {
      const auto buf = render(scene_, v.camera, ropts);
      const auto q = metrics_psnr_ssim(buf.color, v.target);
      m.psnr.push_back(q.psnr);
      m.ssim.push_back(q.ssim);
      m.mean_psnr += q.psnr / static_cast<double>(views_.size());
      m.mean_ssim += q.ssim / static_cast<double>(views_.size());
    }
    return m;
  }

  Image render_view(std::size_t v) const {
    return render(scene_, views_.at(v).camera, cfg_.effective_render()).color;
  }

  const std::vector<Primitive3D>& scene() const { return scene_; }
  const TrainState& state() const { return state_; }
  const std::vector<double>& loss_curve() const { return loss_curve_; }
  const std::vector<ViewTarget>& views() const { return views_; }
  const SceneFitConfig& config() const { return cfg_; }

 private:
  void validate_views() const {
    if (views_.empty()) throw ConfigError("fit_scene needs at least one target view");
    for (const auto& v : views_) {
      v.camera.validate();
      if (v.target.width != v.camera.width || v.target.height != v.camera.height) {
        throw ConfigError("target image size does not match its camera");
      }
    }
  }

  std::vector<ViewTarget> views_;
  SceneFitConfig cfg_;
  std::vector<Primitive3D> scene_;
  TrainState state_;
  std::vector<double> loss_curve_;
};

struct SceneFitResult {
  std::vector<Primitive3D> scene;
  ViewMetrics metrics;
  std::vector<double> loss_curve;
};

inline SceneFitResult fit_scene(const std::vector<ViewTarget>& views, const SceneFitConfig& cfg) {
  SceneTrainer trainer(views, cfg);
  trainer.run(cfg.iters);
  return {trainer.scene(), trainer.evaluate(), trainer.loss_curve()};
}

}  // namespace skewsplat
