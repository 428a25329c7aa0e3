#pragma once

// Property suites behind `skewsplat verify`. Every check compares the library
// against an independent oracle: direct formula evaluation, Monte-Carlo
// sampling through the stochastic representation, quadrature, central finite
// differences, or a straight-line reimplementation.

#include "skewsplat/camera.hpp"
#include "skewsplat/gradients.hpp"
#include "skewsplat/optimizer.hpp"
#include "skewsplat/rasterizer.hpp"
#include "skewsplat/snkernel.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace skewsplat::verify {

struct CheckResult {
  std::string name;
  bool pass = false;
  double worst = 0.0;  // worst observed error statistic
  double tol = 0.0;
  std::string note;
};

struct SuiteResult {
  std::string name;
  std::vector<CheckResult> checks;
  bool reduced = false;
  double seconds = 0.0;
  bool pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass; });
  }
};

struct VerifyOptions {
  std::int64_t samples = 0;  // >0 caps random configurations per check (reduced confidence)
  std::uint64_t seed = 20240611;
  int threads = 1;
};

inline const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = {"kernel", "projection", "gradients", "optimizer",
                                                 "render"};
  return names;
}

// ---- random fixtures ----

struct Fixtures {
  std::mt19937_64 rng;
  explicit Fixtures(std::uint64_t seed) : rng(seed) {}

  double uni(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
  double gauss() { return std::normal_distribution<double>(0.0, 1.0)(rng); }
  Vec3 gauss3() { return Vec3(gauss(), gauss(), gauss()); }

  Primitive3D primitive(double spread = 0.5, double mag_lo = -20.0, double mag_hi = 20.0) {
    Primitive3D p;
    p.mu = Vec3(uni(-spread, spread), uni(-spread, spread), uni(-spread, spread));
    p.quat = Vec4(gauss(), gauss(), gauss(), gauss()).normalized();
    p.log_scale = Vec3(uni(std::log(0.05), std::log(0.4)), uni(std::log(0.05), std::log(0.4)),
                       uni(std::log(0.05), std::log(0.4)));
    p.skew.mag_raw = uni(mag_lo, mag_hi);
    p.skew.dir_raw = gauss3();
    p.opacity_raw = uni(0.2, 1.2);
    p.color = Vec3(uni(0, 1), uni(0, 1), uni(0, 1));
    return p;
  }

  CameraModel camera(int width, int height, bool allow_ortho = true) {
    CameraModel cam;
    const Vec3 dir = gauss3().normalized();
    const double dist = uni(3.0, 6.0);
    cam.world_to_view = look_at(dist * dir, Vec3(uni(-0.2, 0.2), uni(-0.2, 0.2), uni(-0.2, 0.2)));
    cam.width = width;
    cam.height = height;
    cam.cx = 0.5 * width + uni(-2, 2);
    cam.cy = 0.5 * height + uni(-2, 2);
    cam.mode = allow_ortho && uni(0, 1) < 0.3 ? ProjectionMode::orthographic : ProjectionMode::pinhole;
    const double f = cam.mode == ProjectionMode::pinhole ? uni(0.8, 1.6) * width : uni(0.15, 0.3) * width;
    cam.fx = f;
    cam.fy = f * uni(0.9, 1.1);
    return cam;
  }
};

inline std::int64_t scaled(std::int64_t dflt, const VerifyOptions& o) {
  return o.samples > 0 ? std::min<std::int64_t>(dflt, o.samples) : dflt;
}

/// |a - b|_inf / max(|b|_inf, floor): relative error of a whole gradient vector.
template <typename A, typename B>
double rel_err(const A& analytic, const B& numeric, double floor) {
  const double diff = (analytic - numeric).cwiseAbs().maxCoeff();
  const double ref = std::max(numeric.cwiseAbs().maxCoeff(), floor);
  return diff / ref;
}

// ---- kernel ----

/// Kernel with k = 0 against 0.5 exp(-0.5 d^T Omega^-1 d) evaluated from scratch.
inline CheckResult check_gaussian_reduction(std::int64_t n, std::uint64_t seed) {
  Fixtures fx(seed);
  double worst = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    Primitive3D p = fx.primitive();
    p.skew.dir_raw = Vec3::Zero();  // k = 0
    const auto params = compose_slant(p);
    const Vec3 x = p.mu + 0.3 * fx.gauss3();
    const Mat3 rs = p.rotation() * p.scale().asDiagonal();
    const Vec3 w = rs.inverse() * (x - p.mu);  // whitened offset
    const double ref = 0.5 * std::exp(-0.5 * w.squaredNorm());
    worst = std::max(worst, std::abs(eval_kernel<3>(x, params) - ref));
  }
  return {"gaussian_reduction", worst <= 1e-12, worst, 1e-12, std::to_string(n) + " evaluations"};
}

/// Monotone in |k| on a dense grid and the grid supremum equals 2 (pi - 4)^2 / (pi - 2)^3.
inline CheckResult check_mardia_bound(std::int64_t grid) {
  const double pi = 3.14159265358979323846;
  const double limit = 2.0 * (pi - 4.0) * (pi - 4.0) / std::pow(pi - 2.0, 3);
  double prev = -1.0, sup = 0.0;
  bool monotone = true;
  for (std::int64_t i = 0; i <= grid; ++i) {
    const double kn = std::pow(10.0, -4.0 + 12.0 * static_cast<double>(i) / grid);  // 1e-4 .. 1e8
    const double g = mardia_skewness(kn);
    if (g < prev) monotone = false;
    prev = g;
    sup = std::max(sup, g);
  }
  // Linear grid on [0, 100] as well: monotone and never above the limit.
  bool bounded = true;
  prev = -1.0;
  for (int i = 0; i <= 10000; ++i) {
    const double g = mardia_skewness(0.01 * i);
    if (g < prev) monotone = false;
    if (g > limit + 1e-12) bounded = false;
    prev = g;
  }
  const double err = std::abs(sup - limit);
  // The commonly quoted decimal 0.99067 agrees with the closed form (0.990566) only to ~1e-4.
  return {"mardia_bound", monotone && bounded && err <= 1e-6 && std::abs(limit - 0.99067) < 2e-4, err,
          1e-6, "sup " + std::to_string(sup) + (monotone ? ", monotone" : ", NOT monotone") +
                    (bounded ? "" : ", EXCEEDS limit")};
}

// ---- projection ----

/// Whitened 2D density 2 phi(z) Phi(mt^T z) of a footprint with Omega2d = L L^T, mt = L^T m.
inline double whitened_density(const Vec2& z, const Vec2& mt) {
  return 2.0 * std::exp(-0.5 * z.squaredNorm()) / (2.0 * 3.14159265358979323846) *
         std_normal_cdf(mt.dot(z));
}

/// Chi-square p-value of 3D samples pushed through the local affine map vs the
/// analytic footprint (no dilation), binned in the footprint's whitened frame.
inline double affine_closure_pvalue(const Primitive3D& prim, const CameraModel& cam,
                                    std::int64_t n_samples, std::uint64_t seed) {
  const auto la = local_affine(cam, prim.mu);
  if (!la) throw ConfigError("closure fixture behind camera");
  ProjectOptions po;
  po.dilation = 0.0;
  const SplatFootprint2D fp = project_with(prim, *la, po);
  const Eigen::LLT<Mat2> llt(fp.Omega2d);
  const Mat2 L = llt.matrixL();
  const Mat2 L_inv = L.inverse();
  const Vec2 mt = L.transpose() * fp.m2d;

  constexpr int nb = 16;
  constexpr double lo = -4.0, hi = 4.0, bw = (hi - lo) / nb;
  std::vector<double> observed(nb * nb + 1, 0.0), expected(nb * nb + 1, 0.0);
  const auto samples = sample_sn<3>(compose_slant(prim), n_samples, seed);
  for (std::int64_t i = 0; i < samples.rows(); ++i) {
    const Vec3 x = samples.row(i).transpose();
    const Vec2 y = la->mu2d + la->A * (x - prim.mu);
    const Vec2 z = L_inv * (y - fp.mu2d);
    const int bx = static_cast<int>(std::floor((z.x() - lo) / bw));
    const int by = static_cast<int>(std::floor((z.y() - lo) / bw));
    if (bx < 0 || by < 0 || bx >= nb || by >= nb) {
      observed[nb * nb] += 1.0;
    } else {
      observed[by * nb + bx] += 1.0;
    }
  }
  // Bin probabilities by 3-point Gauss-Legendre in each direction on a 4x4 sub-grid.
  const double gl_x[3] = {-std::sqrt(0.6), 0.0, std::sqrt(0.6)};
  const double gl_w[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
  constexpr int sub = 4;
  const double sw = bw / sub;
  double inside = 0.0;
  for (int by = 0; by < nb; ++by) {
    for (int bx = 0; bx < nb; ++bx) {
      double acc = 0.0;
      for (int sy = 0; sy < sub; ++sy) {
        for (int sx = 0; sx < sub; ++sx) {
          const double cx = lo + bx * bw + (sx + 0.5) * sw;
          const double cy = lo + by * bw + (sy + 0.5) * sw;
          for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
              acc += gl_w[i] * gl_w[j] *
                     whitened_density(Vec2(cx + 0.5 * sw * gl_x[i], cy + 0.5 * sw * gl_x[j]), mt);
            }
          }
        }
      }
      acc *= 0.25 * sw * sw;
      expected[by * nb + bx] = acc;
      inside += acc;
    }
  }
  expected[nb * nb] = std::max(0.0, 1.0 - inside);
  const double n = static_cast<double>(n_samples);
  // Pool sparse bins so every cell has expectation >= 5.
  double chi2 = 0.0, pool_o = 0.0, pool_e = 0.0;
  int cells = 0;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const double e = expected[i] * n;
    if (e < 5.0) {
      pool_o += observed[i];
      pool_e += e;
      continue;
    }
    chi2 += (observed[i] - e) * (observed[i] - e) / e;
    ++cells;
  }
  if (pool_e > 0.0) {
    chi2 += (pool_o - pool_e) * (pool_o - pool_e) / std::max(pool_e, 1e-300);
    ++cells;
  }
  if (cells < 2) return 1.0;
  boost::math::chi_squared_distribution<double> dist(cells - 1);
  return boost::math::cdf(boost::math::complement(dist, chi2));
}

inline CheckResult check_affine_closure(std::int64_t pairs, std::int64_t n_samples, std::uint64_t seed) {
  Fixtures fx(seed);
  double min_p = 1.0;
  for (std::int64_t i = 0; i < pairs; ++i) {
    const Primitive3D prim = fx.primitive(0.5, -12.0, 20.0);
    const CameraModel cam = fx.camera(128, 128);
    min_p = std::min(min_p, affine_closure_pvalue(prim, cam, n_samples, seed + 1000 + i));
  }
  return {"affine_closure", min_p > 1e-3, min_p, 1e-3,
          "min p-value over " + std::to_string(pairs) + " pairs, " + std::to_string(n_samples) +
              " samples each"};
}

/// Monte-Carlo mean of the sampler against mu + sqrt(2/pi) R S k / sqrt(1 + k^T k), in standard errors.
inline CheckResult check_exact_mean(std::int64_t prims, std::int64_t n_samples, std::uint64_t seed) {
  Fixtures fx(seed);
  double worst_z = 0.0;
  for (std::int64_t i = 0; i < prims; ++i) {
    const Primitive3D p = fx.primitive(0.5, -12.0, 20.0);
    const auto samples = sample_sn<3>(compose_slant(p), n_samples, seed + 77 + i);
    const Vec3 mean = samples.colwise().mean().transpose();
    const Vec3 var = (samples.rowwise() - mean.transpose()).array().square().colwise().sum().transpose() /
                     static_cast<double>(n_samples - 1);
    const Vec3 se = (var / static_cast<double>(n_samples)).cwiseSqrt();
    const Vec3 pred = p.mu + mean_offset(p);
    worst_z = std::max(worst_z, ((mean - pred).cwiseQuotient(se)).cwiseAbs().maxCoeff());
  }
  return {"exact_mean", worst_z <= 4.0, worst_z, 4.0, "max |z| over coordinates"};
}

/// Quadrature centroid of the dilated 2D footprint against bbox_center, in pixels.
inline CheckResult check_centroid(std::int64_t n, std::uint64_t seed) {
  Fixtures fx(seed);
  double worst = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const Primitive3D prim = fx.primitive(0.5, -12.0, 20.0);
    const CameraModel cam = fx.camera(128, 128);
    const auto fp = project(prim, cam);
    if (!fp) continue;
    const Eigen::LLT<Mat2> llt(fp->Omega2d);
    const Mat2 L = llt.matrixL();
    const Vec2 mt = L.transpose() * fp->m2d;
    // Trapezoid rule on [-10, 10]^2 is spectrally accurate for this integrand.
    constexpr int steps = 800;
    const double h = 20.0 / steps;
    double mass = 0.0;
    Vec2 first = Vec2::Zero();
    for (int a = 0; a <= steps; ++a) {
      for (int b = 0; b <= steps; ++b) {
        const Vec2 z(-10.0 + a * h, -10.0 + b * h);
        const double w = whitened_density(z, mt);
        mass += w;
        first += w * z;
      }
    }
    const Vec2 centroid = fp->mu2d + L * (first / mass);
    worst = std::max(worst, (centroid - fp->bbox_center).norm());
  }
  return {"centroid_bbox_center", worst <= 1e-3, worst, 1e-3, "pixels"};
}

// ---- gradients ----

/// Closed-form dSN/d(mu2d, k, Q) against central differences of eval_sn2d.
inline CheckResult check_kernel_gradients(std::int64_t n, std::uint64_t seed) {
  Fixtures fx(seed);
  ProjectOptions po;  // default dilation
  double worst = 0.0;
  std::int64_t done = 0;
  while (done < n) {
    Mat23 Q;
    for (int r = 0; r < 2; ++r) {
      for (int c = 0; c < 3; ++c) Q(r, c) = fx.uni(-4.0, 4.0);
    }
    const Vec3 k = fx.gauss3() * fx.uni(0.0, 2.5);
    const Vec2 mu(fx.uni(0, 32), fx.uni(0, 32));
    const SplatFootprint2D fp = footprint_from_q(mu, Q, k, po);
    const Vec2 u = mu + fp.Omega2d.llt().matrixL() * Vec2(fx.gauss(), fx.gauss());
    const double sn = eval_sn2d(u, fp);
    if (sn < 1e-3) continue;  // keep the check away from underflowed tails
    ++done;
    const AuxTerms aux = aux_terms(u, fp);
    const double h = 1e-5;
    auto f_mu = [&](const Vec2& m) { return eval_sn2d(u, footprint_from_q(m, Q, k, po)); };
    auto f_k = [&](const Vec3& kk) { return eval_sn2d(u, footprint_from_q(mu, Q, kk, po)); };
    auto f_q = [&](const Mat23& qq) { return eval_sn2d(u, footprint_from_q(mu, qq, k, po)); };
    Vec2 n_mu;
    for (int i = 0; i < 2; ++i) {
      Vec2 e = Vec2::Zero();
      e[i] = h;
      n_mu[i] = (f_mu(mu + e) - f_mu(mu - e)) / (2 * h);
    }
    Vec3 n_k;
    for (int i = 0; i < 3; ++i) {
      Vec3 e = Vec3::Zero();
      e[i] = h;
      n_k[i] = (f_k(k + e) - f_k(k - e)) / (2 * h);
    }
    Mat23 n_q;
    for (int r = 0; r < 2; ++r) {
      for (int c = 0; c < 3; ++c) {
        Mat23 e = Mat23::Zero();
        e(r, c) = h;
        n_q(r, c) = (f_q(Q + e) - f_q(Q - e)) / (2 * h);
      }
    }
    const double floor = 1e-6;
    worst = std::max({worst, rel_err(grad_mu2d(aux, fp.m2d), n_mu, floor),
                      rel_err(grad_k(aux, fp, k), n_k, floor), rel_err(grad_Q(aux, fp, k), n_q, floor)});
  }
  return {"kernel_gradients", worst <= 1e-4, worst, 1e-4,
          std::to_string(n) + " configurations, dSN/dmu2d, dSN/dk, dSN/dQ"};
}

namespace detail {

/// Scalar test loss sum_i w_i C_i of a rendered image.
inline double weighted_sum(const Image& img, const std::vector<double>& w) {
  return std::inner_product(img.data.begin(), img.data.end(), w.begin(), 0.0);
}

inline double& raw_param(Primitive3D& p, int idx) {
  if (idx < 3) return p.mu[idx];
  if (idx < 7) return p.quat[idx - 3];
  if (idx < 10) return p.log_scale[idx - 7];
  if (idx == 10) return p.skew.mag_raw;
  if (idx < 14) return p.skew.dir_raw[idx - 11];
  if (idx == 14) return p.opacity_raw;
  return p.color[idx - 15];
}

inline Eigen::Matrix<double, 18, 1> flatten_grad(const GradientBundle& g) {
  Eigen::Matrix<double, 18, 1> v;
  v << g.d_mu, g.d_quat, g.d_log_scale, g.d_mag_raw, g.d_dir_raw, g.d_opacity_raw, g.d_color;
  return v;
}

}  // namespace detail

/// dL/dtheta through render + backprop_render against central differences of the render.
inline CheckResult check_end_to_end_gradients(std::int64_t n, std::uint64_t seed, int threads = 1) {
  Fixtures fx(seed);
  double worst = 0.0;
  std::string worst_where;
  for (std::int64_t c = 0; c < n; ++c) {
    const int w = 24, h = 20;
    CameraModel cam = fx.camera(w, h);
    const int n_prims = 1 + static_cast<int>(fx.uni(0, 3));
    std::vector<Primitive3D> scene;
    for (int i = 0; i < n_prims; ++i) {
      Primitive3D p = fx.primitive(0.4, -15.0, 15.0);
      p.opacity_raw = fx.uni(-0.4, 0.9);  // signed, well inside the alpha clamp
      p.log_scale = (p.log_scale.array() + std::log(1.5)).matrix();
      scene.push_back(p);
    }
    RenderOptions ro;
    ro.kernel = c % 4 == 3 ? KernelMode::gaussian : KernelMode::skew_normal;
    ro.radius_mult = 9.0;  // tile culling error far below FD resolution
    ro.background = Vec3(fx.uni(0, 1), fx.uni(0, 1), fx.uni(0, 1));
    ro.threads = threads;
    ro.retain_for_backward = true;
    std::vector<double> wts(static_cast<std::size_t>(w) * h * 3);
    for (auto& x : wts) x = fx.uni(-1, 1);

    const auto buf = render(scene, cam, ro);
    if (buf.diag.alpha_clamped > 0) continue;
    const auto bundles = backprop_render(buf, wts, scene, cam, ro);
    RenderOptions fwd = ro;
    fwd.retain_for_backward = false;
    for (int i = 0; i < n_prims; ++i) {
      Eigen::Matrix<double, 18, 1> num;
      for (int idx = 0; idx < 18; ++idx) {
        // Scaled step: mag_raw sits far out on its sigmoid, where a fixed tiny step
        // leaves the difference dominated by roundoff.
        const double step = 2e-5 * std::max(1.0, std::abs(detail::raw_param(scene[i], idx)));
        auto plus = scene, minus = scene;
        detail::raw_param(plus[i], idx) += step;
        detail::raw_param(minus[i], idx) -= step;
        num[idx] = (detail::weighted_sum(render(plus, cam, fwd).color, wts) -
                    detail::weighted_sum(render(minus, cam, fwd).color, wts)) /
                   (2 * step);
      }
      const auto ana = detail::flatten_grad(bundles[i]);
      // Each parameter group is compared as a vector.
      const int groups[7][2] = {{0, 3}, {3, 4}, {7, 3}, {10, 1}, {11, 3}, {14, 1}, {15, 3}};
      static const char* names[7] = {"mu", "quat", "log_scale", "mag_raw", "dir_raw", "opacity_raw", "color"};
      const double floor = std::max(1e-6, 1e-4 * num.cwiseAbs().maxCoeff());
      for (int g = 0; g < 7; ++g) {
        const double e = rel_err(ana.segment(groups[g][0], groups[g][1]),
                                 num.segment(groups[g][0], groups[g][1]), floor);
        if (e > worst) {
          worst = e;
          worst_where = std::string(names[g]) + " (config " + std::to_string(c) + ")";
        }
      }
    }
  }
  return {"end_to_end_gradients", worst <= 1e-3, worst, 1e-3,
          std::to_string(n) + " configurations, worst at " + (worst_where.empty() ? "-" : worst_where)};
}

// ---- optimizer ----

/// Straight-line transcription of the alternating schedule.
inline Phase reference_phase(std::int64_t t, std::int64_t t_start, std::int64_t C, std::int64_t C_base) {
  if (t > t_start) {
    const std::int64_t step_cycle = t % C;
    if (step_cycle < C_base) return Phase::base_only;
    return Phase::skew_only;
  }
  return Phase::joint;
}

inline CheckResult check_bcd_schedule(std::int64_t iters) {
  const std::int64_t cfgs[][3] = {{500, 100, 50}, {0, 7, 3}, {123, 10, 1}, {1000, 250, 249}};
  std::int64_t mismatches = 0;
  for (const auto& c : cfgs) {
    BCDConfig cfg;
    cfg.t_start = c[0];
    cfg.cycle_len = c[1];
    cfg.base_len = c[2];
    for (std::int64_t t = 0; t < iters; ++t) {
      if (bcd_phase(t, cfg) != reference_phase(t, c[0], c[1], c[2])) ++mismatches;
    }
  }
  return {"bcd_schedule", mismatches == 0, static_cast<double>(mismatches), 0.0,
          std::to_string(iters) + " iterations x 4 configurations"};
}

/// Runs apply_updates through every phase and checks frozen groups bit-for-bit, moments included.
inline CheckResult check_freeze_exact(std::int64_t iters, std::uint64_t seed) {
  Fixtures fx(seed);
  std::vector<Primitive3D> scene;
  for (int i = 0; i < 4; ++i) scene.push_back(fx.primitive());
  OptimizerConfig cfg;
  cfg.bcd.t_start = 10;
  cfg.bcd.cycle_len = 6;
  cfg.bcd.base_len = 2;
  TrainState st(scene.size(), seed);
  auto bits_equal = [](const auto& a, const auto& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
  };
  std::int64_t violations = 0, frozen_steps = 0;
  for (std::int64_t t = 0; t < iters; ++t) {
    std::vector<GradientBundle> g(scene.size());
    for (auto& b : g) {
      b.d_mu = fx.gauss3();
      b.d_quat = Vec4(fx.gauss(), fx.gauss(), fx.gauss(), fx.gauss());
      b.d_log_scale = fx.gauss3();
      b.d_mag_raw = fx.gauss();
      b.d_dir_raw = fx.gauss3();
      b.d_opacity_raw = fx.gauss();
      b.d_color = fx.gauss3();
    }
    const Phase ph = bcd_phase(st.iter, cfg.bcd);
    const auto before = scene;
    const TrainState sb = st;
    apply_updates(scene, g, st, cfg);
    if (ph == Phase::joint) continue;
    ++frozen_steps;
    for (std::size_t i = 0; i < scene.size(); ++i) {
      if (ph == Phase::skew_only) {
        if (std::memcmp(before[i].quat.data(), scene[i].quat.data(), 4 * sizeof(double)) ||
            std::memcmp(before[i].log_scale.data(), scene[i].log_scale.data(), 3 * sizeof(double))) {
          ++violations;
        }
      } else {
        if (std::memcmp(&before[i].skew.mag_raw, &scene[i].skew.mag_raw, sizeof(double)) ||
            std::memcmp(before[i].skew.dir_raw.data(), scene[i].skew.dir_raw.data(), 3 * sizeof(double))) {
          ++violations;
        }
      }
    }
    const AdamSlot* fa = ph == Phase::skew_only ? &sb.quat : &sb.mag_raw;
    const AdamSlot* fb = ph == Phase::skew_only ? &sb.log_scale : &sb.dir_raw;
    const AdamSlot* na = ph == Phase::skew_only ? &st.quat : &st.mag_raw;
    const AdamSlot* nb = ph == Phase::skew_only ? &st.log_scale : &st.dir_raw;
    if (!bits_equal(fa->m, na->m) || !bits_equal(fa->v, na->v) || fa->steps != na->steps ||
        !bits_equal(fb->m, nb->m) || !bits_equal(fb->v, nb->v) || fb->steps != nb->steps) {
      ++violations;
    }
  }
  return {"freeze_exact", violations == 0 && frozen_steps > 0, static_cast<double>(violations), 0.0,
          std::to_string(frozen_steps) + " frozen steps"};
}

// ---- render ----

/// SN mode with k = 0 against Gaussian mode with halved opacities, per channel.
inline CheckResult check_gaussian_render(std::int64_t n, std::uint64_t seed, int threads = 1) {
  Fixtures fx(seed);
  double worst = 0.0;
  for (std::int64_t c = 0; c < n; ++c) {
    const CameraModel cam = fx.camera(48, 40);
    std::vector<Primitive3D> sn, ga;
    for (int i = 0; i < 6; ++i) {
      Primitive3D p = fx.primitive();
      p.skew.dir_raw = Vec3::Zero();
      p.opacity_raw = fx.uni(-0.5, 2.0);
      sn.push_back(p);
      p.opacity_raw = std::atanh(0.5 * std::tanh(p.opacity_raw));
      ga.push_back(p);
    }
    RenderOptions ro;
    ro.threads = threads;
    const auto a = render(sn, cam, ro);
    ro.kernel = KernelMode::gaussian;
    const auto b = render(ga, cam, ro);
    for (std::size_t i = 0; i < a.color.data.size(); ++i) {
      worst = std::max(worst, std::abs(a.color.data[i] - b.color.data[i]));
    }
  }
  return {"gaussian_render_reduction", worst <= 1e-6, worst, 1e-6, "max per-channel difference"};
}

/// Shuffled inputs, other thread counts and tile-order independence give bit-identical images.
inline CheckResult check_render_determinism(std::int64_t n, std::uint64_t seed) {
  Fixtures fx(seed);
  std::int64_t mismatches = 0;
  for (std::int64_t c = 0; c < n; ++c) {
    const CameraModel cam = fx.camera(64, 48);
    std::vector<Primitive3D> scene;
    for (int i = 0; i < 12; ++i) scene.push_back(fx.primitive(0.8));
    RenderOptions ro;
    ro.deterministic = true;
    const auto ref = render(scene, cam, ro);
    auto shuffled = scene;
    std::shuffle(shuffled.begin(), shuffled.end(), fx.rng);
    ro.threads = 4;
    const auto other = render(shuffled, cam, ro);
    if (std::memcmp(ref.color.data.data(), other.color.data.data(), ref.color.data.size() * sizeof(double))) {
      ++mismatches;
    }
  }
  return {"render_determinism", mismatches == 0, static_cast<double>(mismatches), 0.0,
          "shuffled input order, 1 vs 4 threads"};
}

/// With o >= 0: sum of blend weights plus final transmittance is 1 per pixel.
inline CheckResult check_weight_conservation(std::int64_t n, std::uint64_t seed) {
  Fixtures fx(seed);
  double worst = 0.0;
  for (std::int64_t c = 0; c < n; ++c) {
    const CameraModel cam = fx.camera(40, 40);
    std::vector<Primitive3D> scene;
    for (int i = 0; i < 10; ++i) {
      Primitive3D p = fx.primitive(0.6);
      p.color = Vec3::Ones();
      scene.push_back(p);
    }
    RenderOptions ro;
    ro.background = Vec3::Zero();
    const auto buf = render(scene, cam, ro);
    for (std::size_t p = 0; p < buf.color.pixel_count(); ++p) {
      worst = std::max(worst, std::abs(buf.color.data[p * 3] + buf.final_transmittance[p] - 1.0));
    }
  }
  return {"weight_conservation", worst <= 1e-6, worst, 1e-6, "max |sum w + T - 1|"};
}

// ---- driver ----

inline SuiteResult run_suite(const std::string& name, const VerifyOptions& o) {
  SuiteResult r;
  r.name = name;
  r.reduced = o.samples > 0;
  const auto t0 = std::chrono::steady_clock::now();
  const std::uint64_t s = o.seed;
  // Monte-Carlo sizes shrink with the configuration count in reduced mode.
  const double frac = o.samples > 0 ? std::min(1.0, static_cast<double>(o.samples) / 200.0) : 1.0;
  auto mc = [&](std::int64_t dflt) {
    return std::max<std::int64_t>(2000, static_cast<std::int64_t>(dflt * frac));
  };
  if (name == "kernel") {
    r.checks.push_back(check_gaussian_reduction(scaled(10000, o), s));
    r.checks.push_back(check_mardia_bound(scaled(200000, o) < 200000 ? 20000 : 200000));
  } else if (name == "projection") {
    r.checks.push_back(check_affine_closure(scaled(20, o), mc(200000), s + 1));
    r.checks.push_back(check_exact_mean(scaled(10, o), mc(1000000), s + 2));
    r.checks.push_back(check_centroid(scaled(10, o), s + 3));
  } else if (name == "gradients") {
    r.checks.push_back(check_kernel_gradients(scaled(200, o), s + 4));
    r.checks.push_back(check_end_to_end_gradients(scaled(200, o), s + 5, o.threads));
  } else if (name == "optimizer") {
    r.checks.push_back(check_bcd_schedule(scaled(100000, o) < 100000 ? 1000 : 100000));
    r.checks.push_back(check_freeze_exact(scaled(400, o), s + 6));
  } else if (name == "render") {
    r.checks.push_back(check_gaussian_render(scaled(20, o), s + 7, o.threads));
    r.checks.push_back(check_render_determinism(scaled(10, o), s + 8));
    r.checks.push_back(check_weight_conservation(scaled(10, o), s + 9));
  } else {
    throw ConfigError("unknown verify suite '" + name + "'");
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace skewsplat::verify
