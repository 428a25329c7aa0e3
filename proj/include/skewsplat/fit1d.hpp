#pragma once

// 1D mixture fitting of a square wave with Gaussian, Skew-Normal and
// Half-Gaussian kernels.
//
// All three kernels share the unnormalized convention G(x - mu; sigma^2) * Phi(.):
//   Gaussian       Phi frozen at 1/2          (slant zero)
//   Skew-Normal    Phi(alpha (x - mu) / sigma)
//   Half-Gaussian  indicator[side (x - mu) >= 0] (the limit alpha -> +-inf)

#include "skewsplat/optimizer.hpp"
#include "skewsplat/snkernel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace skewsplat {

enum class Family { gaussian, skew_normal, half_gaussian };

inline const char* family_name(Family f) {
  switch (f) {
    case Family::gaussian: return "gaussian";
    case Family::skew_normal: return "skewnormal";
    case Family::half_gaussian: return "halfgaussian";
  }
  return "?";
}

inline Family parse_family(std::string_view s) {
  if (s == "gaussian") return Family::gaussian;
  if (s == "skewnormal" || s == "skew_normal" || s == "sn") return Family::skew_normal;
  if (s == "halfgaussian" || s == "half_gaussian" || s == "hg") return Family::half_gaussian;
  throw ConfigError("unknown kernel family '" + std::string(s) + "'");
}

/// Piecewise-constant wave: `high` on the first duty fraction of every period.
inline double square_wave(double x, double period = 2.0, double duty = 0.5, double low = 0.0,
                          double high = 1.0) {
  if (!(period > 0.0) || !(duty > 0.0 && duty < 1.0)) {
    throw ConfigError("square_wave requires period > 0 and duty in (0, 1)");
  }
  double phase = std::fmod(x, period) / period;
  if (phase < 0.0) phase += 1.0;
  return phase < duty ? high : low;
}

struct Component1D {
  double weight = 1.0;
  double mu = 0.0;
  double sigma = 1.0;
  double alpha = 0.0;  // Skew-Normal slant
  int side = 1;        // Half-Gaussian side, +1 or -1
};

struct Mixture1D {
  Family family = Family::gaussian;
  std::vector<Component1D> components;

  static double kernel(Family family, const Component1D& c, double x) {
    const double d = x - c.mu;
    const double g = std::exp(-0.5 * d * d / (c.sigma * c.sigma));
    switch (family) {
      case Family::gaussian: return 0.5 * g;
      case Family::skew_normal: return g * std_normal_cdf(c.alpha * d / c.sigma);
      case Family::half_gaussian: return c.side * d >= 0.0 ? g : 0.0;
    }
    return 0.0;
  }

  double operator()(double x) const {
    double acc = 0.0;
    for (const auto& c : components) acc += c.weight * kernel(family, c, x);
    return acc;
  }
};

struct Fit1DConfig {
  Family family = Family::skew_normal;
  int n_components = 4;
  int iters = 5000;
  std::uint64_t seed = 0;
  double lr = 0.01;
  double lr_alpha = 0.05;
  BCDConfig bcd;        // Skew-Normal only: base = {sigma}, skew = {alpha}
  bool pin_alpha = false;
  double domain_lo = -2.0, domain_hi = 2.0;
  int samples = 1024;
  double period = 2.0, duty = 0.5, low = 0.0, high = 1.0;
  double init_jitter = 0.1;     // of the mean spacing
  bool hg_boundary_term = false;  // Half-Gaussian: include the cut's term in dL/dmu
  int side_probe_iters = -1;    // Half-Gaussian side search; -1 = iters / 10

  void validate() const {
    if (n_components < 1) throw ConfigError("n_components must be >= 1");
    if (iters < 0) throw ConfigError("iters must be >= 0");
    if (samples < 2) throw ConfigError("samples must be >= 2");
    if (!(domain_hi > domain_lo)) throw ConfigError("empty domain");
    if (family == Family::skew_normal && bcd.enabled) bcd.validate();
  }
};

struct FitReport {
  Family family = Family::gaussian;
  int n_components = 0;
  double initial_mse = 0.0;
  double final_mse = 0.0;
  int iteration_count = 0;
  double wall_time = 0.0;  // seconds
  std::uint64_t seed = 0;
  bool diverged = false;
  Mixture1D model;
};

namespace detail {

struct Fit1DProblem {
  std::vector<double> xs, ys;
};

inline Fit1DProblem make_problem(const Fit1DConfig& cfg) {
  Fit1DProblem p;
  p.xs.resize(cfg.samples);
  p.ys.resize(cfg.samples);
  for (int i = 0; i < cfg.samples; ++i) {
    const double x = cfg.domain_lo + (cfg.domain_hi - cfg.domain_lo) * i / (cfg.samples - 1);
    p.xs[i] = x;
    p.ys[i] = square_wave(x, cfg.period, cfg.duty, cfg.low, cfg.high);
  }
  return p;
}

inline double mixture_mse(const Mixture1D& m, const Fit1DProblem& p) {
  double acc = 0.0;
  for (std::size_t i = 0; i < p.xs.size(); ++i) {
    const double r = m(p.xs[i]) - p.ys[i];
    acc += r * r;
  }
  return acc / static_cast<double>(p.xs.size());
}

inline Mixture1D initial_mixture(const Fit1DConfig& cfg) {
  Mixture1D m;
  m.family = cfg.family;
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> jitter(-1.0, 1.0);
  const double spacing = (cfg.domain_hi - cfg.domain_lo) / cfg.n_components;
  for (int i = 0; i < cfg.n_components; ++i) {
    Component1D c;
    c.mu = cfg.domain_lo + (i + 0.5) * spacing + cfg.init_jitter * spacing * jitter(rng);
    c.sigma = cfg.period / 8.0;
    c.weight = 1.0;
    c.alpha = 0.0;
    c.side = 1;
    m.components.push_back(c);
  }
  return m;
}

/// Gradient descent with Adam on (weight, mu, log sigma[, alpha]); sides are fixed.
inline FitReport run_fit(const Fit1DConfig& cfg, Mixture1D model, const Fit1DProblem& prob,
                         int iters) {
  const int n = static_cast<int>(model.components.size());
  const bool sn = model.family == Family::skew_normal;
  std::vector<double> w(n), mu(n), log_sigma(n), alpha(n);
  for (int i = 0; i < n; ++i) {
    w[i] = model.components[i].weight;
    mu[i] = model.components[i].mu;
    log_sigma[i] = std::log(model.components[i].sigma);
    alpha[i] = model.components[i].alpha;
  }
  AdamSlot sw, smu, ssig, salpha;
  sw.resize(n);
  smu.resize(n);
  ssig.resize(n);
  salpha.resize(n);
  const AdamHyper hp{cfg.lr, 0.9, 0.999, 1e-8};
  const AdamHyper hp_alpha{cfg.lr_alpha, 0.9, 0.999, 1e-8};

  auto sync = [&] {
    for (int i = 0; i < n; ++i) {
      auto& c = model.components[i];
      c.weight = w[i];
      c.mu = mu[i];
      c.sigma = std::max(std::exp(log_sigma[i]), 1e-6);
      c.alpha = alpha[i];
    }
  };

  FitReport rep;
  rep.family = model.family;
  rep.n_components = n;
  rep.seed = cfg.seed;
  rep.initial_mse = mixture_mse(model, prob);
  const std::size_t ns = prob.xs.size();
  std::vector<double> gw(n), gmu(n), gsig(n), galpha(n), resid(ns);
  int above = 0;
  int it = 0;
  for (; it < iters; ++it) {
    for (std::size_t j = 0; j < ns; ++j) resid[j] = model(prob.xs[j]) - prob.ys[j];
    std::fill(gw.begin(), gw.end(), 0.0);
    std::fill(gmu.begin(), gmu.end(), 0.0);
    std::fill(gsig.begin(), gsig.end(), 0.0);
    std::fill(galpha.begin(), galpha.end(), 0.0);
    const double scale = 2.0 / static_cast<double>(ns);
    for (int i = 0; i < n; ++i) {
      const auto& c = model.components[i];
      const double inv_var = 1.0 / (c.sigma * c.sigma);
      for (std::size_t j = 0; j < ns; ++j) {
        const double r = scale * resid[j];
        const double d = prob.xs[j] - c.mu;
        const double g = std::exp(-0.5 * d * d * inv_var);
        double f = 0.0, df_dmu = 0.0, df_dsigma = 0.0, df_dalpha = 0.0;
        switch (model.family) {
          case Family::gaussian:
            f = 0.5 * g;
            df_dmu = f * d * inv_var;
            df_dsigma = f * d * d * inv_var / c.sigma;
            break;
          case Family::half_gaussian:
            if (c.side * d >= 0.0) {
              f = g;
              df_dmu = g * d * inv_var;
              df_dsigma = g * d * d * inv_var / c.sigma;
            }
            break;
          case Family::skew_normal: {
            // 1D instance of the auxiliary-term gradients with m = alpha / sigma.
            const double m = c.alpha / c.sigma;
            const double phi = std_normal_cdf(m * d);
            const double s = g / kSqrt2Pi * std::exp(-0.5 * (m * d) * (m * d));
            const double c_delta = phi * g * d * inv_var;
            const double p_delta = s * d * inv_var;
            f = g * phi;
            df_dmu = c_delta - s * m;
            df_dsigma = c_delta * d / c.sigma - p_delta * c.alpha;
            df_dalpha = s * d / c.sigma;
            break;
          }
        }
        gw[i] += r * f;
        gmu[i] += r * c.weight * df_dmu;
        gsig[i] += r * c.weight * df_dsigma * c.sigma;  // d/d log sigma
        galpha[i] += r * c.weight * df_dalpha;
      }
      // Optional: the masked gradient misses the jump at the cut. This adds the
      // boundary term of d/dmu (1/L) integral r^2.
      if (model.family == Family::half_gaussian && cfg.hg_boundary_term && c.mu > cfg.domain_lo && c.mu < cfg.domain_hi) {
        const double y = square_wave(c.mu, cfg.period, cfg.duty, cfg.low, cfg.high);
        const double r_in = model(c.mu) - y;
        const double r_out = r_in - c.weight;
        gmu[i] += c.side * (r_out * r_out - r_in * r_in) / (cfg.domain_hi - cfg.domain_lo);
      }
    }
    const Phase phase = sn && cfg.bcd.enabled && !cfg.pin_alpha ? bcd_phase(it, cfg.bcd) : Phase::joint;
    adam_step(w, gw, sw, hp, false, "weight");
    adam_step(mu, gmu, smu, hp, false, "mu");
    adam_step(log_sigma, gsig, ssig, hp, base_frozen(phase), "log_sigma");
    if (sn) adam_step(alpha, galpha, salpha, hp_alpha, skew_frozen(phase) || cfg.pin_alpha, "alpha");
    for (auto& ls : log_sigma) ls = std::max(ls, std::log(1e-6));
    sync();

    double e = 0.0;
    for (std::size_t j = 0; j < ns; ++j) {
      const double r = model(prob.xs[j]) - prob.ys[j];
      e += r * r;
    }
    e /= static_cast<double>(ns);
    above = e > 10.0 * rep.initial_mse ? above + 1 : 0;
    if (above >= 100) {
      rep.diverged = true;
      ++it;
      break;
    }
  }
  rep.iteration_count = it;
  rep.final_mse = mixture_mse(model, prob);
  rep.model = model;
  return rep;
}

}  // namespace detail

/// Fits the configured family to the sampled square wave and reports the final MSE.
inline FitReport fit_mixture_1d(const Fit1DConfig& cfg) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  const auto prob = detail::make_problem(cfg);
  Mixture1D init = detail::initial_mixture(cfg);

  if (cfg.family == Family::half_gaussian) {
    // Sides are discrete: probe side assignments briefly and keep the best.
    const int n = cfg.n_components;
    const int probe = cfg.side_probe_iters >= 0 ? cfg.side_probe_iters : cfg.iters / 10;
    std::vector<std::vector<int>> candidates;
    if (n <= 6) {
      for (int mask = 0; mask < (1 << n); ++mask) {
        std::vector<int> sides(n);
        for (int i = 0; i < n; ++i) sides[i] = (mask >> i) & 1 ? -1 : 1;
        candidates.push_back(sides);
      }
    } else {
      for (int flip = 0; flip < 2; ++flip) {
        std::vector<int> sides(n);
        for (int i = 0; i < n; ++i) sides[i] = ((i + flip) % 2) ? -1 : 1;
        candidates.push_back(sides);
      }
    }
    double best = std::numeric_limits<double>::infinity();
    std::vector<int> best_sides = candidates.front();
    for (const auto& sides : candidates) {
      Mixture1D m = init;
      for (int i = 0; i < n; ++i) m.components[i].side = sides[i];
      const double e = detail::run_fit(cfg, m, prob, probe).final_mse;
      if (e < best) {
        best = e;
        best_sides = sides;
      }
    }
    for (int i = 0; i < n; ++i) init.components[i].side = best_sides[i];
  }

  FitReport rep = detail::run_fit(cfg, init, prob, cfg.iters);
  rep.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

/// Largest absolute difference between neighbouring samples of the model on [lo, hi].
inline double max_adjacent_jump(const Mixture1D& m, double lo, double hi, int samples) {
  double worst = 0.0;
  double prev = m(lo);
  for (int i = 1; i < samples; ++i) {
    const double cur = m(lo + (hi - lo) * i / (samples - 1));
    worst = std::max(worst, std::abs(cur - prev));
    prev = cur;
  }
  return worst;
}

}  // namespace skewsplat
