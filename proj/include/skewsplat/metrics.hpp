#pragma once

// Image losses and quality metrics: PSNR, SSIM (11x11 Gaussian window,
// sigma 1.5, K1 = 0.01, K2 = 0.03, zero padding) and the differentiable
// L1 + D-SSIM training loss.

#include "skewsplat/image.hpp"

#include <array>
#include <cmath>
#include <vector>

namespace skewsplat {

inline constexpr double kPsnrCap = 99.0;

inline void require_same_size(const Image& a, const Image& b) {
  if (!a.same_size(b)) throw ConfigError("image size mismatch");
}

inline double mse(const Image& img, const Image& ref) {
  require_same_size(img, ref);
  double acc = 0.0;
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    const double d = img.data[i] - ref.data[i];
    acc += d * d;
  }
  return img.data.empty() ? 0.0 : acc / static_cast<double>(img.data.size());
}

/// 10 log10(1 / MSE) for [0, 1] images, capped at 99 dB.
inline double psnr(const Image& img, const Image& ref) {
  const double e = mse(img, ref);
  if (e <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / e));
}

namespace detail {

inline std::array<double, 11> ssim_window() {
  std::array<double, 11> w{};
  double sum = 0.0;
  for (int i = 0; i < 11; ++i) {
    const double x = i - 5;
    w[i] = std::exp(-x * x / (2.0 * 1.5 * 1.5));
    sum += w[i];
  }
  for (auto& v : w) v /= sum;
  return w;
}

/// Separable same-size correlation with zero padding on one channel plane.
inline std::vector<double> blur(const std::vector<double>& in, int w, int h) {
  static const auto win = ssim_window();
  std::vector<double> tmp(in.size(), 0.0), out(in.size(), 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -5; k <= 5; ++k) {
        const int xx = x + k;
        if (xx >= 0 && xx < w) acc += win[k + 5] * in[static_cast<std::size_t>(y) * w + xx];
      }
      tmp[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -5; k <= 5; ++k) {
        const int yy = y + k;
        if (yy >= 0 && yy < h) acc += win[k + 5] * tmp[static_cast<std::size_t>(yy) * w + x];
      }
      out[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  return out;
}

inline std::vector<double> plane(const Image& img, int c) {
  std::vector<double> p(img.pixel_count());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = img.data[i * 3 + c];
  return p;
}

}  // namespace detail

/// Mean SSIM over pixels and channels; fills d_img with dSSIM/d(img) when given.
inline double ssim(const Image& img, const Image& ref, std::vector<double>* d_img = nullptr) {
  require_same_size(img, ref);
  constexpr double C1 = 0.01 * 0.01;
  constexpr double C2 = 0.03 * 0.03;
  const int w = img.width, h = img.height;
  const std::size_t npix = img.pixel_count();
  const double inv_n = 1.0 / static_cast<double>(npix * 3);
  if (d_img) d_img->assign(img.data.size(), 0.0);
  double total = 0.0;
  for (int c = 0; c < 3; ++c) {
    const auto x = detail::plane(img, c);
    const auto y = detail::plane(ref, c);
    std::vector<double> xx(npix), yy(npix), xy(npix);
    for (std::size_t i = 0; i < npix; ++i) {
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = detail::blur(x, w, h), my = detail::blur(y, w, h);
    const auto exx = detail::blur(xx, w, h), eyy = detail::blur(yy, w, h);
    const auto exy = detail::blur(xy, w, h);
    std::vector<double> g_m(npix), g_xx(npix), g_xy(npix);
    for (std::size_t i = 0; i < npix; ++i) {
      const double sxx = exx[i] - mx[i] * mx[i];
      const double syy = eyy[i] - my[i] * my[i];
      const double sxy = exy[i] - mx[i] * my[i];
      const double a1 = 2.0 * mx[i] * my[i] + C1, a2 = 2.0 * sxy + C2;
      const double b1 = mx[i] * mx[i] + my[i] * my[i] + C1, b2 = sxx + syy + C2;
      const double s = a1 * a2 / (b1 * b2);
      total += s;
      if (d_img) {
        g_m[i] = inv_n * (2.0 * my[i] * (a2 - a1) / (b1 * b2) - 2.0 * mx[i] * s / b1 +
                          2.0 * mx[i] * s / b2);
        g_xx[i] = inv_n * (-s / b2);
        g_xy[i] = inv_n * (2.0 * a1 / (b1 * b2));
      }
    }
    if (d_img) {
      // The symmetric window makes the blur self-adjoint.
      const auto bm = detail::blur(g_m, w, h), bxx = detail::blur(g_xx, w, h);
      const auto bxy = detail::blur(g_xy, w, h);
      for (std::size_t i = 0; i < npix; ++i) {
        (*d_img)[i * 3 + c] = bm[i] + 2.0 * x[i] * bxx[i] + y[i] * bxy[i];
      }
    }
  }
  return total * inv_n;
}

struct QualityMetrics {
  double psnr = 0.0;
  double ssim = 0.0;
};

inline QualityMetrics metrics_psnr_ssim(const Image& img, const Image& ref) {
  return {psnr(img, ref), ssim(img, ref)};
}

/// (1 - lambda) * L1 + lambda * (1 - SSIM); writes dL/d(img) into grad.
inline double l1_dssim_loss(const Image& img, const Image& ref, double lambda,
                            std::vector<double>& grad) {
  require_same_size(img, ref);
  const double n = static_cast<double>(img.data.size());
  std::vector<double> d_ssim;
  const double s = lambda > 0.0 ? ssim(img, ref, &d_ssim) : 1.0;
  grad.assign(img.data.size(), 0.0);
  double l1 = 0.0;
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    const double d = img.data[i] - ref.data[i];
    l1 += std::abs(d);
    const double sign = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
    grad[i] = (1.0 - lambda) * sign / n;
    if (lambda > 0.0) grad[i] -= lambda * d_ssim[i];
  }
  return (1.0 - lambda) * l1 / n + lambda * (1.0 - s);
}

}  // namespace skewsplat
