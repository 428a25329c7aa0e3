#pragma once

// Parameter updates: Adam for shape and appearance, SGHMC for positions, and
// the alternating base/skew schedule that freezes one shape block at a time.

#include "skewsplat/gradients.hpp"
#include "skewsplat/snkernel.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace skewsplat {

enum class Phase { joint, base_only, skew_only };

inline const char* phase_name(Phase p) {
  switch (p) {
    case Phase::joint: return "joint";
    case Phase::base_only: return "base_only";
    case Phase::skew_only: return "skew_only";
  }
  return "?";
}

struct BCDConfig {
  std::int64_t t_start = 500;
  std::int64_t cycle_len = 100;
  std::int64_t base_len = 50;
  bool enabled = true;

  void validate() const {
    if (t_start < 0) throw ConfigError("bcd t_start must be non-negative");
    if (!(0 < base_len && base_len < cycle_len)) {
      throw ConfigError("bcd requires 0 < base_len < cycle_len");
    }
  }
};

/// Joint while t <= t_start, then BaseOnly for the first base_len steps of each
/// cycle (by t mod cycle_len) and SkewOnly for the rest.
inline Phase bcd_phase(std::int64_t t, const BCDConfig& cfg) {
  if (!cfg.enabled || t <= cfg.t_start) return Phase::joint;
  return (t % cfg.cycle_len) < cfg.base_len ? Phase::base_only : Phase::skew_only;
}

inline bool base_frozen(Phase p) { return p == Phase::skew_only; }
inline bool skew_frozen(Phase p) { return p == Phase::base_only; }

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-15;
};

/// Moments for one parameter group; `steps` only advances on unfrozen steps.
struct AdamSlot {
  std::vector<double> m, v;
  std::int64_t steps = 0;

  void resize(std::size_t n) {
    m.assign(n, 0.0);
    v.assign(n, 0.0);
    steps = 0;
  }
};

/// Bias-corrected Adam. A frozen group keeps its parameters and moments bit-identical.
inline void adam_step(std::span<double> param, std::span<const double> grad, AdamSlot& slot,
                      const AdamHyper& hp, bool frozen = false, std::string_view id = "param") {
  if (param.size() != grad.size() || slot.m.size() != param.size() ||
      slot.v.size() != param.size()) {
    throw ConfigError("adam_step shape mismatch for " + std::string(id));
  }
  if (frozen) return;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!std::isfinite(grad[i])) {
      throw NumericalError("non-finite gradient for " + std::string(id) + "[" +
                           std::to_string(i) + "]");
    }
  }
  ++slot.steps;
  const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(slot.steps));
  const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(slot.steps));
  for (std::size_t i = 0; i < param.size(); ++i) {
    slot.m[i] = hp.beta1 * slot.m[i] + (1.0 - hp.beta1) * grad[i];
    slot.v[i] = hp.beta2 * slot.v[i] + (1.0 - hp.beta2) * grad[i] * grad[i];
    const double m_hat = slot.m[i] / bc1;
    const double v_hat = slot.v[i] / bc2;
    param[i] -= hp.lr * m_hat / (std::sqrt(v_hat) + hp.eps);
  }
}

struct SGHMCHyper {
  double lr = 1.6e-4;
  double friction = 0.1;
  double noise_scale = 0.0;
};

/// v <- (1 - friction) v - lr grad + N(0, noise_scale^2 lr); mu <- mu + v.
/// No random numbers are drawn when noise_scale is zero.
inline void sghmc_step(Vec3& mu, const Vec3& grad, Vec3& momentum, const SGHMCHyper& hp,
                       std::mt19937_64& rng) {
  momentum = (1.0 - hp.friction) * momentum - hp.lr * grad;
  if (hp.noise_scale > 0.0) {
    std::normal_distribution<double> normal(0.0, hp.noise_scale * std::sqrt(hp.lr));
    for (int i = 0; i < 3; ++i) momentum[i] += normal(rng);
  }
  mu += momentum;
}

struct OptimizerConfig {
  double lr_mu = 1.6e-4;
  double lr_mu_final = 1.6e-6;
  std::int64_t lr_mu_decay_steps = 30000;
  double lr_quat = 1e-3;
  double lr_log_scale = 5e-3;
  double lr_skew = 2e-3;
  double lr_opacity = 5e-2;
  double lr_color = 2.5e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-15;
  double friction = 0.1;
  double noise_scale = 0.0;
  double scale_floor = 1e-6;
  bool skew_trainable = true;  // false pins the latent skew (Gaussian mode)
  BCDConfig bcd;

  /// Exponential decay from lr_mu to lr_mu_final over lr_mu_decay_steps.
  double mu_lr_at(std::int64_t t) const {
    if (lr_mu_decay_steps <= 0 || lr_mu_final <= 0.0) return lr_mu;
    const double frac = std::min(1.0, static_cast<double>(t) / static_cast<double>(lr_mu_decay_steps));
    return lr_mu * std::pow(lr_mu_final / lr_mu, frac);
  }
};

/// Optimizer state for a fixed-size scene.
struct TrainState {
  std::int64_t iter = 0;
  AdamSlot quat, log_scale, mag_raw, dir_raw, opacity_raw, color;
  std::vector<Vec3> momentum;
  std::uint64_t rng_seed = 0;
  std::mt19937_64 rng;

  TrainState() = default;
  TrainState(std::size_t n_prims, std::uint64_t seed) : rng_seed(seed), rng(seed) {
    quat.resize(4 * n_prims);
    log_scale.resize(3 * n_prims);
    mag_raw.resize(n_prims);
    dir_raw.resize(3 * n_prims);
    opacity_raw.resize(n_prims);
    color.resize(3 * n_prims);
    momentum.assign(n_prims, Vec3::Zero());
  }

  std::size_t size() const { return momentum.size(); }
};

namespace detail {

template <typename Get>
std::vector<double> gather(std::size_t n, int width, Get get) {
  std::vector<double> out(n * width);
  for (std::size_t i = 0; i < n; ++i) {
    const auto v = get(i);
    for (int j = 0; j < width; ++j) out[i * width + j] = v[j];
  }
  return out;
}

}  // namespace detail

/// One training step: SGHMC on mu, Adam on every other group with phase-based
/// freezing of {quat, log_scale} vs {mag_raw, dir_raw}; restores primitive invariants.
inline void apply_updates(std::vector<Primitive3D>& scene, std::span<const GradientBundle> bundles,
                          TrainState& state, const OptimizerConfig& cfg) {
  const std::size_t n = scene.size();
  if (bundles.size() != n || state.size() != n) {
    throw ConfigError("apply_updates: scene, gradients and state sizes differ");
  }
  for (std::size_t i = 0; i < n; ++i) bundles[i].check_finite(i);
  cfg.bcd.validate();
  const Phase phase = bcd_phase(state.iter, cfg.bcd);

  const SGHMCHyper sg{cfg.mu_lr_at(state.iter), cfg.friction, cfg.noise_scale};
  for (std::size_t i = 0; i < n; ++i) {
    sghmc_step(scene[i].mu, bundles[i].d_mu, state.momentum[i], sg, state.rng);
  }

  auto hyper = [&](double lr) { return AdamHyper{lr, cfg.beta1, cfg.beta2, cfg.adam_eps}; };

  auto run_group = [&](AdamSlot& slot, int width, double lr, bool frozen, std::string_view id,
                       auto get_param, auto get_grad, auto set_param) {
    if (frozen) return;
    auto params = detail::gather(n, width, get_param);
    const auto grads = detail::gather(n, width, get_grad);
    adam_step(params, grads, slot, hyper(lr), false, id);
    for (std::size_t i = 0; i < n; ++i) set_param(i, &params[i * width]);
  };

  const bool freeze_base = base_frozen(phase);
  const bool freeze_skew = skew_frozen(phase) || !cfg.skew_trainable;

  run_group(state.quat, 4, cfg.lr_quat, freeze_base, "quat",
            [&](std::size_t i) { return scene[i].quat; },
            [&](std::size_t i) { return bundles[i].d_quat; },
            [&](std::size_t i, const double* p) { scene[i].quat = Vec4(p[0], p[1], p[2], p[3]); });
  run_group(state.log_scale, 3, cfg.lr_log_scale, freeze_base, "log_scale",
            [&](std::size_t i) { return scene[i].log_scale; },
            [&](std::size_t i) { return bundles[i].d_log_scale; },
            [&](std::size_t i, const double* p) { scene[i].log_scale = Vec3(p[0], p[1], p[2]); });
  run_group(state.mag_raw, 1, cfg.lr_skew, freeze_skew, "mag_raw",
            [&](std::size_t i) { return Eigen::Matrix<double, 1, 1>(scene[i].skew.mag_raw); },
            [&](std::size_t i) { return Eigen::Matrix<double, 1, 1>(bundles[i].d_mag_raw); },
            [&](std::size_t i, const double* p) { scene[i].skew.mag_raw = p[0]; });
  run_group(state.dir_raw, 3, cfg.lr_skew, freeze_skew, "dir_raw",
            [&](std::size_t i) { return scene[i].skew.dir_raw; },
            [&](std::size_t i) { return bundles[i].d_dir_raw; },
            [&](std::size_t i, const double* p) { scene[i].skew.dir_raw = Vec3(p[0], p[1], p[2]); });
  run_group(state.opacity_raw, 1, cfg.lr_opacity, false, "opacity_raw",
            [&](std::size_t i) { return Eigen::Matrix<double, 1, 1>(scene[i].opacity_raw); },
            [&](std::size_t i) { return Eigen::Matrix<double, 1, 1>(bundles[i].d_opacity_raw); },
            [&](std::size_t i, const double* p) { scene[i].opacity_raw = p[0]; });
  run_group(state.color, 3, cfg.lr_color, false, "color",
            [&](std::size_t i) { return scene[i].color; },
            [&](std::size_t i) { return bundles[i].d_color; },
            [&](std::size_t i, const double* p) { scene[i].color = Vec3(p[0], p[1], p[2]); });

  const double log_floor = std::log(cfg.scale_floor);
  for (auto& prim : scene) {
    if (!freeze_base) {
      const double norm = prim.quat.norm();
      prim.quat = norm > 0.0 ? Vec4(prim.quat / norm) : Vec4(1, 0, 0, 0);
      prim.log_scale = prim.log_scale.cwiseMax(log_floor);
    }
    prim.color = prim.color.cwiseMax(0.0).cwiseMin(1.0);
  }
  ++state.iter;
}

}  // namespace skewsplat
