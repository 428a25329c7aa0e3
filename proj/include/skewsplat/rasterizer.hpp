#pragma once

// Tile-based forward renderer: front-to-back blending of signed-opacity
// Skew-Normal footprints, optionally retaining the per-pixel hit records that
// the backward pass replays.

#include "skewsplat/camera.hpp"
#include "skewsplat/image.hpp"
#include "skewsplat/parallel.hpp"
#include "skewsplat/snkernel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

namespace skewsplat {

enum class KernelMode { skew_normal, gaussian };

struct RenderOptions {
  int tile_size = 16;
  Vec3 background = Vec3::Zero();
  double t_min = 1e-4;
  double alpha_clamp = 0.99;
  double radius_mult = 3.0;
  bool retain_for_backward = false;
  int max_hits_per_pixel = 512;
  int threads = 1;
  // Static tile partition across threads. Results are identical either way;
  // the flag only changes scheduling.
  bool deterministic = true;
  KernelMode kernel = KernelMode::skew_normal;
  ProjectOptions projection;

  ProjectOptions effective_projection() const {
    ProjectOptions p = projection;
    p.ignore_skew = p.ignore_skew || kernel == KernelMode::gaussian;
    return p;
  }
};

struct Hit {
  std::uint32_t prim = 0;   // scene index
  std::uint32_t local = 0;  // position in the tile list
  double sn = 0.0;          // kernel value
  double a = 0.0;           // blended (clamped) alpha
  double T = 1.0;           // transmittance before this contribution
  bool clamped = false;
};

struct RenderDiagnostics {
  ProjectStats projection;
  std::int64_t hit_overflow = 0;
  std::int64_t early_stops = 0;
  std::int64_t alpha_clamped = 0;
};

struct RenderBuffers {
  int width = 0, height = 0;
  int tile_size = 16;
  int tiles_x = 0, tiles_y = 0;
  Image color;
  std::vector<double> final_transmittance;
  std::vector<int> contrib_count;
  std::vector<std::vector<std::uint32_t>> tile_lists;
  std::vector<std::optional<SplatFootprint2D>> footprints;  // per scene primitive
  bool has_hits = false;
  std::vector<std::vector<Hit>> tile_hits;
  std::vector<std::uint32_t> hit_offset;  // per pixel, into its tile's hit vector
  RenderDiagnostics diag;

  int tile_of(int x, int y) const { return (y / tile_size) * tiles_x + x / tile_size; }
};

/// Ascending depth, ties broken by ascending index.
inline std::vector<std::size_t> depth_sort(std::span<const double> depths) {
  for (double d : depths) {
    if (!std::isfinite(d)) throw NumericalError("non-finite depth in depth_sort");
  }
  std::vector<std::size_t> order(depths.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return depths[a] < depths[b]; });
  return order;
}

inline std::vector<std::size_t> depth_sort(std::span<const SplatFootprint2D> footprints) {
  std::vector<double> depths;
  depths.reserve(footprints.size());
  for (const auto& fp : footprints) depths.push_back(fp.depth);
  return depth_sort(depths);
}

/// G_2(u - mu2d; Omega2d) * Phi(m2d^T (u - mu2d)).
inline double eval_sn2d(const Vec2& u, const SplatFootprint2D& fp) {
  const Vec2 d = u - fp.mu2d;
  return std::exp(-0.5 * d.dot(fp.Omega2d_inv * d)) * std_normal_cdf(fp.m2d.dot(d));
}

/// Gaussian mode doubles opacities so that a = o G, the usual splatting kernel.
inline double kernel_opacity_gain(KernelMode k) { return k == KernelMode::gaussian ? 2.0 : 1.0; }

/// Gaussian kernel with Phi frozen at one half.
inline double eval_gauss2d_half(const Vec2& u, const SplatFootprint2D& fp) {
  const Vec2 d = u - fp.mu2d;
  return 0.5 * std::exp(-0.5 * d.dot(fp.Omega2d_inv * d));
}

inline RenderBuffers render(std::span<const Primitive3D> prims, const CameraModel& cam,
                            const RenderOptions& opts) {
  cam.validate();
  if (opts.tile_size <= 0) throw ConfigError("tile size must be positive");
  RenderBuffers buf;
  buf.width = cam.width;
  buf.height = cam.height;
  buf.tile_size = opts.tile_size;
  buf.tiles_x = (cam.width + opts.tile_size - 1) / opts.tile_size;
  buf.tiles_y = (cam.height + opts.tile_size - 1) / opts.tile_size;
  const std::size_t n_tiles = static_cast<std::size_t>(buf.tiles_x) * buf.tiles_y;
  buf.color = Image(cam.width, cam.height);
  buf.final_transmittance.assign(buf.color.pixel_count(), 1.0);
  buf.contrib_count.assign(buf.color.pixel_count(), 0);
  buf.tile_lists.assign(n_tiles, {});
  buf.footprints.assign(prims.size(), std::nullopt);

  const ProjectOptions popts = opts.effective_projection();
  std::vector<TileRect> rects(prims.size());
  std::vector<std::size_t> visible;
  std::vector<double> visible_depth;
  for (std::size_t i = 0; i < prims.size(); ++i) {
    auto fp = project(prims[i], cam, popts, &buf.diag.projection);
    if (!fp) continue;
    rects[i] = bbox_tiles(*fp, opts.tile_size, cam.width, cam.height, opts.radius_mult);
    if (rects[i].empty()) continue;
    visible.push_back(i);
    visible_depth.push_back(fp->depth);
    buf.footprints[i] = std::move(fp);
  }
  for (std::size_t v : depth_sort(visible_depth)) {
    const std::size_t i = visible[v];
    const TileRect& r = rects[i];
    for (int ty = r.y0; ty < r.y1; ++ty) {
      for (int tx = r.x0; tx < r.x1; ++tx) {
        buf.tile_lists[static_cast<std::size_t>(ty) * buf.tiles_x + tx].push_back(
            static_cast<std::uint32_t>(i));
      }
    }
  }

  std::vector<double> opacity(prims.size());
  const double gain = kernel_opacity_gain(opts.kernel);
  for (std::size_t i = 0; i < prims.size(); ++i) opacity[i] = gain * prims[i].opacity();

  buf.has_hits = opts.retain_for_backward;
  if (buf.has_hits) {
    buf.tile_hits.assign(n_tiles, {});
    buf.hit_offset.assign(buf.color.pixel_count(), 0);
  }
  std::vector<std::int64_t> overflow(n_tiles, 0), stops(n_tiles, 0), clamps(n_tiles, 0);
  const bool gaussian = opts.kernel == KernelMode::gaussian;

  parallel_for(
      n_tiles, opts.threads,
      [&](std::size_t t) {
        const auto& list = buf.tile_lists[t];
        const int tx = static_cast<int>(t) % buf.tiles_x;
        const int ty = static_cast<int>(t) / buf.tiles_x;
        const int x_end = std::min(cam.width, (tx + 1) * opts.tile_size);
        const int y_end = std::min(cam.height, (ty + 1) * opts.tile_size);
        std::vector<Hit>* hits = buf.has_hits ? &buf.tile_hits[t] : nullptr;
        for (int y = ty * opts.tile_size; y < y_end; ++y) {
          for (int x = tx * opts.tile_size; x < x_end; ++x) {
            const std::size_t pix = static_cast<std::size_t>(y) * cam.width + x;
            const Vec2 u(x + 0.5, y + 0.5);
            if (hits) buf.hit_offset[pix] = static_cast<std::uint32_t>(hits->size());
            Vec3 c = Vec3::Zero();
            double T = 1.0;
            int count = 0;
            int nonincreasing = 0;
            for (std::size_t j = 0; j < list.size(); ++j) {
              if (count >= opts.max_hits_per_pixel) {
                ++overflow[t];
                break;
              }
              const std::uint32_t p = list[j];
              const SplatFootprint2D& fp = *buf.footprints[p];
              const double sn = gaussian ? eval_gauss2d_half(u, fp) : eval_sn2d(u, fp);
              const double raw = opacity[p] * sn;
              const double a = std::clamp(raw, -opts.alpha_clamp, opts.alpha_clamp);
              if (a != raw) ++clamps[t];
              if (hits) hits->push_back(Hit{p, static_cast<std::uint32_t>(j), sn, a, T, a != raw});
              c += prims[p].color * (a * T);
              T *= 1.0 - a;
              ++count;
              nonincreasing = a >= 0.0 ? nonincreasing + 1 : 0;
              if (T < opts.t_min && nonincreasing >= 2) {
                ++stops[t];
                break;
              }
            }
            c += opts.background * T;
            buf.color.set_pixel(x, y, c);
            buf.final_transmittance[pix] = T;
            buf.contrib_count[pix] = count;
          }
        }
      },
      opts.deterministic);

  for (std::size_t t = 0; t < n_tiles; ++t) {
    buf.diag.hit_overflow += overflow[t];
    buf.diag.early_stops += stops[t];
    buf.diag.alpha_clamped += clamps[t];
  }
  return buf;
}

}  // namespace skewsplat
