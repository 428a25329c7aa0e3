#include "skewsplat/fit1d.hpp"

#include <gtest/gtest.h>

using namespace skewsplat;

TEST(SquareWave, Levels) {
  EXPECT_EQ(square_wave(0.0), 1.0);
  EXPECT_EQ(square_wave(0.99), 1.0);
  EXPECT_EQ(square_wave(1.0), 0.0);
  EXPECT_EQ(square_wave(1.5), 0.0);
  EXPECT_EQ(square_wave(2.0), 1.0);
  EXPECT_EQ(square_wave(-0.5), 0.0);
  EXPECT_EQ(square_wave(-1.5), 1.0);
  EXPECT_EQ(square_wave(0.3, 1.0, 0.25, -1.0, 3.0), -1.0);
  EXPECT_EQ(square_wave(0.2, 1.0, 0.25, -1.0, 3.0), 3.0);
}

TEST(Mixture, KernelConventions) {
  Component1D c{2.0, 0.5, 0.25, 0.0, 1};
  // Gaussian and zero-slant Skew-Normal both carry the factor one half.
  EXPECT_DOUBLE_EQ(Mixture1D::kernel(Family::gaussian, c, 0.5), 0.5);
  EXPECT_DOUBLE_EQ(Mixture1D::kernel(Family::skew_normal, c, 0.75),
                   Mixture1D::kernel(Family::gaussian, c, 0.75));
  EXPECT_DOUBLE_EQ(Mixture1D::kernel(Family::half_gaussian, c, 0.5), 1.0);
  EXPECT_EQ(Mixture1D::kernel(Family::half_gaussian, c, 0.49), 0.0);
  c.side = -1;
  EXPECT_EQ(Mixture1D::kernel(Family::half_gaussian, c, 0.51), 0.0);
  c.alpha = 50.0;
  EXPECT_NEAR(Mixture1D::kernel(Family::skew_normal, c, 0.75), std::exp(-0.5), 1e-12);
  EXPECT_NEAR(Mixture1D::kernel(Family::skew_normal, c, 0.25), 0.0, 1e-12);
}

TEST(Fit1D, ConfigValidation) {
  Fit1DConfig c;
  c.n_components = 0;
  EXPECT_THROW(fit_mixture_1d(c), ConfigError);
  c = {};
  c.iters = -1;
  EXPECT_THROW(fit_mixture_1d(c), ConfigError);
  c = {};
  c.domain_hi = c.domain_lo;
  EXPECT_THROW(fit_mixture_1d(c), ConfigError);
  c = {};
  c.bcd.base_len = c.bcd.cycle_len;
  EXPECT_THROW(fit_mixture_1d(c), ConfigError);
  EXPECT_THROW(parse_family("cauchy"), ConfigError);
  EXPECT_EQ(parse_family("sn"), Family::skew_normal);
}

TEST(Fit1D, ZeroIterationsReportsInitialState) {
  Fit1DConfig c;
  c.iters = 0;
  const auto r = fit_mixture_1d(c);
  EXPECT_EQ(r.iteration_count, 0);
  EXPECT_EQ(r.final_mse, r.initial_mse);
  EXPECT_EQ(r.model.components.size(), 4u);
}

TEST(Fit1D, SmoothFamiliesImprove) {
  // The Half-Gaussian masked gradient is not the loss gradient (it drops the cut's jump),
  // so only the boundary-term variant is expected to descend.
  for (auto f : {Family::gaussian, Family::skew_normal, Family::half_gaussian}) {
    Fit1DConfig c;
    c.family = f;
    c.iters = 800;
    c.hg_boundary_term = f == Family::half_gaussian;
    const auto r = fit_mixture_1d(c);
    EXPECT_FALSE(r.diverged);
    EXPECT_LT(r.final_mse, r.initial_mse) << family_name(f);
  }
}

TEST(Fit1D, SeedDeterminism) {
  Fit1DConfig c;
  c.iters = 400;
  c.seed = 17;
  const auto a = fit_mixture_1d(c), b = fit_mixture_1d(c);
  EXPECT_EQ(a.final_mse, b.final_mse);
  c.seed = 18;
  EXPECT_NE(fit_mixture_1d(c).final_mse, a.final_mse);
}

TEST(Fit1D, PinnedSlantReproducesGaussian) {
  Fit1DConfig c;
  c.iters = 1500;
  c.seed = 4;
  c.family = Family::gaussian;
  const auto g = fit_mixture_1d(c);
  c.family = Family::skew_normal;
  c.pin_alpha = true;
  c.bcd.enabled = false;
  const auto s = fit_mixture_1d(c);
  EXPECT_NEAR(s.final_mse, g.final_mse, 1e-8 * g.final_mse);
  for (std::size_t i = 0; i < g.model.components.size(); ++i) {
    EXPECT_NEAR(s.model.components[i].mu, g.model.components[i].mu, 1e-8);
    EXPECT_EQ(s.model.components[i].alpha, 0.0);
  }
}

TEST(Fit1D, RecoversSingleBump) {
  // One wide pulse: a single Gaussian fit lands within a percent of the best possible MSE,
  // found here by brute-force search over (weight, mu, sigma).
  Fit1DConfig c;
  c.family = Family::gaussian;
  c.n_components = 1;
  c.iters = 6000;
  c.period = 8.0;
  c.duty = 0.5;
  c.domain_lo = -2.0;
  c.domain_hi = 6.0;
  c.init_jitter = 0.0;
  const auto r = fit_mixture_1d(c);
  const auto prob = detail::make_problem(c);
  double best = 1e9;
  for (double w = 1.0; w <= 3.0; w += 0.02) {
    for (double mu = 1.9; mu <= 2.1; mu += 0.05) {
      for (double s = 1.0; s <= 3.0; s += 0.02) {
        Mixture1D m;
        m.family = Family::gaussian;
        m.components = {Component1D{w, mu, s, 0.0, 1}};
        best = std::min(best, detail::mixture_mse(m, prob));
      }
    }
  }
  EXPECT_LT(r.final_mse, best * 1.01);
}

TEST(Fit1D, HalfGaussianHasSharperEdgesThanSkewNormal) {
  Fit1DConfig c;
  c.iters = 1500;
  c.family = Family::half_gaussian;
  const auto hg = fit_mixture_1d(c);
  c.family = Family::skew_normal;
  const auto sn = fit_mixture_1d(c);
  const double jh = max_adjacent_jump(hg.model, c.domain_lo, c.domain_hi, 40001);
  const double js = max_adjacent_jump(sn.model, c.domain_lo, c.domain_hi, 40001);
  EXPECT_GT(jh, 10.0 * js);
}

TEST(Fit1D, BoundaryTermHelpsHalfGaussian) {
  Fit1DConfig c;
  c.family = Family::half_gaussian;
  c.iters = 2500;
  const auto plain = fit_mixture_1d(c);
  c.hg_boundary_term = true;
  const auto with = fit_mixture_1d(c);
  EXPECT_LT(with.final_mse, plain.final_mse);
}

TEST(Fit1D, ReportFields) {
  Fit1DConfig c;
  c.iters = 50;
  c.seed = 9;
  c.n_components = 3;
  const auto r = fit_mixture_1d(c);
  EXPECT_EQ(r.seed, 9u);
  EXPECT_EQ(r.n_components, 3);
  EXPECT_EQ(r.iteration_count, 50);
  EXPECT_GE(r.wall_time, 0.0);
  EXPECT_EQ(r.family, Family::skew_normal);
}
