#pragma once

// Analytical backward pass. The rendering stage evaluates shared auxiliary
// terms per pixel and accumulates d/d(mu2d), d/dQ and d/dk with Q = A R S;
// the preprocessing stage chains those to every raw primitive parameter.

#include "skewsplat/camera.hpp"
#include "skewsplat/parallel.hpp"
#include "skewsplat/rasterizer.hpp"
#include "skewsplat/snkernel.hpp"

#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace skewsplat {

struct AuxTerms {
  Vec2 delta = Vec2::Zero();            // u - mu2d
  Vec2 omega_inv_delta = Vec2::Zero();  // Omega2d^-1 delta
  double mdotd = 0.0;                   // m^T delta
  double G2 = 0.0;
  double Phi = 0.5;
  Vec2 c_delta = Vec2::Zero();
  Mat2 M_delta = Mat2::Zero();
  double s_delta = 0.0;
  Vec2 p_delta = Vec2::Zero();
};

inline AuxTerms aux_terms(const Vec2& u, const SplatFootprint2D& fp) {
  AuxTerms aux;
  aux.delta = u - fp.mu2d;
  aux.omega_inv_delta = fp.Omega2d_inv * aux.delta;
  aux.mdotd = fp.m2d.dot(aux.delta);
  aux.G2 = std::exp(-0.5 * aux.delta.dot(aux.omega_inv_delta));
  aux.Phi = std_normal_cdf(aux.mdotd);
  const double phi_g = aux.Phi * aux.G2;
  aux.c_delta = phi_g * aux.omega_inv_delta;
  aux.M_delta = phi_g * aux.omega_inv_delta * aux.omega_inv_delta.transpose();
  aux.s_delta = aux.G2 / kSqrt2Pi * std::exp(-0.5 * aux.mdotd * aux.mdotd);
  aux.p_delta = aux.s_delta * aux.omega_inv_delta;
  return aux;
}

/// dSN/dmu2d = c_delta - s_delta m.
inline Vec2 grad_mu2d(const AuxTerms& aux, const Vec2& m) { return aux.c_delta - aux.s_delta * m; }

/// dSN/dk. A clamped D is a constant, so its derivative terms drop out.
inline Vec3 grad_k(const AuxTerms& aux, const SplatFootprint2D& fp, const Vec3& k) {
  if (fp.d_clamped) return fp.Q.transpose() * aux.p_delta / fp.D;
  const Vec2& m = fp.m2d;
  const double pom = aux.p_delta.dot(fp.Omega2d * m);  // = s_delta * m^T delta
  return fp.Q.transpose() * (aux.p_delta + pom * m) / fp.D - (pom / (fp.D * fp.D)) * k;
}

/// dSN/dQ, including the Gaussian factor's dependence on Omega2d = Q Q^T (+ dilation).
inline Mat23 grad_Q(const AuxTerms& aux, const SplatFootprint2D& fp, const Vec3& k) {
  const Vec2& m = fp.m2d;
  const Vec2& p = aux.p_delta;
  if (fp.d_clamped) {
    return (aux.M_delta - p * m.transpose() - m * p.transpose()) * fp.Q +
           (p / fp.D) * k.transpose();
  }
  const double pom = p.dot(fp.Omega2d * m);
  return (aux.M_delta - p * m.transpose() - m * p.transpose() - pom * m * m.transpose()) * fp.Q +
         ((p + pom * m) / fp.D) * k.transpose();
}

/// Gradient of a scalar loss with respect to every raw parameter of one primitive.
struct GradientBundle {
  Vec3 d_mu = Vec3::Zero();
  Vec4 d_quat = Vec4::Zero();
  Vec3 d_log_scale = Vec3::Zero();
  double d_mag_raw = 0.0;
  Vec3 d_dir_raw = Vec3::Zero();
  double d_opacity_raw = 0.0;
  Vec3 d_color = Vec3::Zero();

  GradientBundle& operator+=(const GradientBundle& o) {
    d_mu += o.d_mu;
    d_quat += o.d_quat;
    d_log_scale += o.d_log_scale;
    d_mag_raw += o.d_mag_raw;
    d_dir_raw += o.d_dir_raw;
    d_opacity_raw += o.d_opacity_raw;
    d_color += o.d_color;
    return *this;
  }

  bool all_finite() const {
    return d_mu.allFinite() && d_quat.allFinite() && d_log_scale.allFinite() &&
           std::isfinite(d_mag_raw) && d_dir_raw.allFinite() && std::isfinite(d_opacity_raw) &&
           d_color.allFinite();
  }

  void check_finite(std::size_t prim_id) const {
    if (!all_finite()) {
      throw NumericalError("non-finite gradient for primitive " + std::to_string(prim_id));
    }
  }
};

/// Image-space gradients of one primitive, accumulated over pixels.
struct Footprint2DGrad {
  Vec2 d_mu2d = Vec2::Zero();
  Mat23 d_Q = Mat23::Zero();
  Vec3 d_k = Vec3::Zero();
  double d_opacity = 0.0;
  Vec3 d_color = Vec3::Zero();

  Footprint2DGrad& operator+=(const Footprint2DGrad& o) {
    d_mu2d += o.d_mu2d;
    d_Q += o.d_Q;
    d_k += o.d_k;
    d_opacity += o.d_opacity;
    d_color += o.d_color;
    return *this;
  }
};

/// Preprocessing stage: image-space gradients to raw 3D parameters.
inline GradientBundle chain_to_primitive(const Footprint2DGrad& g, const Primitive3D& prim,
                                         const SplatFootprint2D& fp, const CameraModel& cam,
                                         const ProjectOptions& popts) {
  GradientBundle out;
  out.d_color = g.d_color;
  const double o = prim.opacity();
  out.d_opacity_raw = g.d_opacity * (1.0 - o * o);

  if (!popts.ignore_skew) {
    const SkewSettings& s = popts.skew;
    const Vec3 dir = skew_direction(prim.skew.dir_raw, s);
    const double mag = skew_magnitude(prim.skew.mag_raw, s);
    out.d_mag_raw = skew_magnitude_derivative(prim.skew.mag_raw, s) * dir.dot(g.d_k);
    out.d_dir_raw = skew_direction_jacobian(prim.skew.dir_raw, s).transpose() * (mag * g.d_k);
  }

  // Q = A R S.
  const Mat3 rot = prim.rotation();
  const Vec3 scale = prim.scale(popts.scale_floor);
  const Mat3 d_rot = fp.A.transpose() * g.d_Q * scale.asDiagonal();
  out.d_quat = rotation_grad_to_quat(prim.quat, d_rot);
  const Mat3 rt_at_g = rot.transpose() * fp.A.transpose() * g.d_Q;
  out.d_log_scale = rt_at_g.diagonal().cwiseProduct(scale);

  // mu enters through mu2d and, for pinhole cameras, through the Jacobian J(t).
  out.d_mu = fp.A.transpose() * g.d_mu2d;
  if (cam.mode == ProjectionMode::pinhole) {
    const Mat3 w_rot = cam.view_rotation();
    const Mat23 d_a = g.d_Q * (rot * scale.asDiagonal()).transpose();
    const Mat23 d_j = d_a * w_rot.transpose();
    const Vec3& t = fp.t_view;
    const double iz = 1.0 / t.z(), iz2 = iz * iz, iz3 = iz2 * iz;
    Vec3 d_t;
    d_t.x() = d_j(0, 2) * (-cam.fx * iz2);
    d_t.y() = d_j(1, 2) * (-cam.fy * iz2);
    d_t.z() = d_j(0, 0) * (-cam.fx * iz2) + d_j(0, 2) * (2.0 * cam.fx * t.x() * iz3) +
              d_j(1, 1) * (-cam.fy * iz2) + d_j(1, 2) * (2.0 * cam.fy * t.y() * iz3);
    out.d_mu += w_rot.transpose() * d_t;
  }
  return out;
}

/// Replays the retained hit records back to front and returns one bundle per primitive.
/// dL_dC has the layout of Image::data.
inline std::vector<GradientBundle> backprop_render(const RenderBuffers& buf,
                                                   std::span<const double> dL_dC,
                                                   std::span<const Primitive3D> scene,
                                                   const CameraModel& cam,
                                                   const RenderOptions& opts) {
  if (!buf.has_hits) throw Error("backprop_render requires buffers rendered with retain_for_backward");
  if (dL_dC.size() != buf.color.data.size()) throw ConfigError("dL_dC size does not match the image");
  if (buf.footprints.size() != scene.size()) throw ConfigError("scene does not match render buffers");

  const ProjectOptions popts = opts.effective_projection();
  const bool gaussian = opts.kernel == KernelMode::gaussian;
  const std::size_t n_tiles = buf.tile_lists.size();
  std::vector<double> opacity(scene.size());
  const double gain = kernel_opacity_gain(opts.kernel);
  for (std::size_t i = 0; i < scene.size(); ++i) opacity[i] = gain * scene[i].opacity();

  std::vector<std::vector<Footprint2DGrad>> tile_grads(n_tiles);
  parallel_for(
      n_tiles, opts.threads,
      [&](std::size_t t) {
        const auto& list = buf.tile_lists[t];
        auto& acc = tile_grads[t];
        acc.assign(list.size(), Footprint2DGrad{});
        if (list.empty()) return;
        const auto& hits = buf.tile_hits[t];
        const int tx = static_cast<int>(t) % buf.tiles_x;
        const int ty = static_cast<int>(t) / buf.tiles_x;
        const int x_end = std::min(buf.width, (tx + 1) * buf.tile_size);
        const int y_end = std::min(buf.height, (ty + 1) * buf.tile_size);
        for (int y = ty * buf.tile_size; y < y_end; ++y) {
          for (int x = tx * buf.tile_size; x < x_end; ++x) {
            const std::size_t pix = static_cast<std::size_t>(y) * buf.width + x;
            const int count = buf.contrib_count[pix];
            if (count == 0) continue;
            const std::size_t base = pix * 3;
            const Vec3 dl_dc(dL_dC[base], dL_dC[base + 1], dL_dC[base + 2]);
            const Vec2 u(x + 0.5, y + 0.5);
            Vec3 after = opts.background;
            for (int h = count - 1; h >= 0; --h) {
              const Hit& hit = hits[buf.hit_offset[pix] + h];
              const Vec3& col = scene[hit.prim].color;
              Footprint2DGrad& g = acc[hit.local];
              g.d_color += dl_dc * (hit.a * hit.T);
              const double dl_da = hit.T * dl_dc.dot(col - after);
              after = hit.a * col + (1.0 - hit.a) * after;
              if (hit.clamped) continue;
              g.d_opacity += dl_da * gain * hit.sn;
              const double dl_dsn = dl_da * opacity[hit.prim];
              const SplatFootprint2D& fp = *buf.footprints[hit.prim];
              if (gaussian) {
                const Vec2 d = u - fp.mu2d;
                const Vec2 oid = fp.Omega2d_inv * d;
                const double half_g = hit.sn;  // 0.5 * G
                g.d_mu2d += dl_dsn * half_g * oid;
                g.d_Q += dl_dsn * half_g * (oid * oid.transpose()) * fp.Q;
              } else {
                const AuxTerms aux = aux_terms(u, fp);
                g.d_mu2d += dl_dsn * grad_mu2d(aux, fp.m2d);
                g.d_Q += dl_dsn * grad_Q(aux, fp, fp.k);
                g.d_k += dl_dsn * grad_k(aux, fp, fp.k);
              }
            }
          }
        }
      },
      opts.deterministic);

  // Reduction in tile order keeps the summation order independent of threading.
  std::vector<Footprint2DGrad> per_prim(scene.size());
  for (std::size_t t = 0; t < n_tiles; ++t) {
    const auto& list = buf.tile_lists[t];
    for (std::size_t j = 0; j < list.size(); ++j) per_prim[list[j]] += tile_grads[t][j];
  }

  std::vector<GradientBundle> bundles(scene.size());
  for (std::size_t i = 0; i < scene.size(); ++i) {
    if (!buf.footprints[i]) continue;
    bundles[i] = chain_to_primitive(per_prim[i], scene[i], *buf.footprints[i], cam, popts);
    bundles[i].check_finite(i);
  }
  return bundles;
}

}  // namespace skewsplat
