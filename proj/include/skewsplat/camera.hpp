#pragma once

// View transform, EWA-style local affine approximation and the closed-form
// projection of a 3D Skew-Normal primitive onto the image plane.

#include "skewsplat/snkernel.hpp"
#include "skewsplat/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>

namespace skewsplat {

enum class ProjectionMode { pinhole, orthographic };

struct CameraModel {
  Mat4 world_to_view = Mat4::Identity();
  double fx = 1.0, fy = 1.0;
  double cx = 0.0, cy = 0.0;
  int width = 1, height = 1;
  ProjectionMode mode = ProjectionMode::pinhole;

  Mat3 view_rotation() const { return world_to_view.topLeftCorner<3, 3>(); }
  Vec3 view_translation() const { return world_to_view.topRightCorner<3, 1>(); }
  Vec3 to_view(const Vec3& p) const { return view_rotation() * p + view_translation(); }

  void validate() const {
    const Mat3 r = view_rotation();
    if ((r.transpose() * r - Mat3::Identity()).norm() > 1e-9) {
      throw ConfigError("camera rotation block is not orthonormal");
    }
    if (!(fx > 0.0) || !(fy > 0.0)) throw ConfigError("camera focal lengths must be positive");
    if (width <= 0 || height <= 0) throw ConfigError("camera image size must be positive");
  }
};

/// Camera looking from `eye` towards `target`; view +z points forward, +y down.
inline Mat4 look_at(const Vec3& eye, const Vec3& target, const Vec3& up_hint = Vec3(0, -1, 0)) {
  const Vec3 fwd = (target - eye).normalized();
  Vec3 right = up_hint.cross(fwd);
  if (right.norm() < 1e-9) right = Vec3(1, 0, 0).cross(fwd);
  right.normalize();
  const Vec3 down = fwd.cross(right);
  Mat3 r;
  r.row(0) = right.transpose();
  r.row(1) = down.transpose();
  r.row(2) = fwd.transpose();
  Mat4 w = Mat4::Identity();
  w.topLeftCorner<3, 3>() = r;
  w.topRightCorner<3, 1>() = -r * eye;
  return w;
}

struct LocalAffine {
  Mat23 A;      // J * W_rot
  Vec2 mu2d;    // projected location (pixels)
  Vec3 t_view;  // view-space location the Jacobian was evaluated at
};

/// Local affine map around mu; nullopt when mu is at or behind the near plane.
inline std::optional<LocalAffine> local_affine(const CameraModel& cam, const Vec3& mu,
                                               double z_near = 0.01) {
  const Vec3 t = cam.to_view(mu);
  if (!(t.z() > z_near)) return std::nullopt;
  Mat23 jac = Mat23::Zero();
  LocalAffine out;
  if (cam.mode == ProjectionMode::pinhole) {
    const double inv_z = 1.0 / t.z();
    jac(0, 0) = cam.fx * inv_z;
    jac(0, 2) = -cam.fx * t.x() * inv_z * inv_z;
    jac(1, 1) = cam.fy * inv_z;
    jac(1, 2) = -cam.fy * t.y() * inv_z * inv_z;
    out.mu2d = Vec2(cam.fx * t.x() * inv_z + cam.cx, cam.fy * t.y() * inv_z + cam.cy);
  } else {
    jac(0, 0) = cam.fx;
    jac(1, 1) = cam.fy;
    out.mu2d = Vec2(cam.fx * t.x() + cam.cx, cam.fy * t.y() + cam.cy);
  }
  out.A = jac * cam.view_rotation();
  out.t_view = t;
  return out;
}

struct ProjectOptions {
  double dilation = 0.3;  // added to Omega2d (pixels^2)
  double z_near = 0.01;
  double d_floor = 1e-4;
  double scale_floor = 1e-6;
  bool ignore_skew = false;  // Gaussian kernel mode: k treated as zero
  SkewSettings skew;
};

struct ProjectStats {
  std::int64_t culled = 0;
  std::int64_t d_clamps = 0;
  std::int64_t singular = 0;
};

/// Projected 2D kernel of one primitive under one camera.
struct SplatFootprint2D {
  Vec2 mu2d = Vec2::Zero();
  Mat2 Omega2d = Mat2::Identity();
  Mat2 Omega2d_inv = Mat2::Identity();
  Vec2 m2d = Vec2::Zero();
  Vec2 ARSk = Vec2::Zero();
  double D = 1.0;
  bool d_clamped = false;
  Vec2 bbox_center = Vec2::Zero();
  double depth = 0.0;
  Mat23 Q = Mat23::Zero();  // A R S
  Mat23 A = Mat23::Zero();
  Vec3 k = Vec3::Zero();
  Vec3 t_view = Vec3::Zero();
};

inline double max_eigenvalue(const Mat2& m) {
  const double mid = 0.5 * (m(0, 0) + m(1, 1));
  const double det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
  return mid + std::sqrt(std::max(mid * mid - det, 0.0));
}

/// Footprint from image-space quantities alone: Omega2d = Q Q^T + dilation I,
/// D = sqrt(1 + k^T k - (Qk)^T Omega2d^-1 (Qk)) and m2d = Omega2d^-1 Q k / D.
inline SplatFootprint2D footprint_from_q(const Vec2& mu2d, const Mat23& Q, const Vec3& k,
                                         const ProjectOptions& opts, ProjectStats* stats = nullptr) {
  SplatFootprint2D fp;
  fp.mu2d = mu2d;
  fp.Q = Q;
  fp.k = k;
  Mat2 omega = Q * Q.transpose();
  omega += opts.dilation * Mat2::Identity();
  if (omega.determinant() <= 1e-12 * std::max(1.0, omega.trace() * omega.trace())) {
    omega += (opts.dilation > 0.0 ? opts.dilation : 0.3) * Mat2::Identity();
    if (stats) ++stats->singular;
  }
  fp.Omega2d = omega;
  fp.Omega2d_inv = omega.inverse();
  fp.ARSk = Q * k;

  const double kk = k.squaredNorm();
  const double radicand = 1.0 + kk - fp.ARSk.dot(fp.Omega2d_inv * fp.ARSk);
  if (radicand >= opts.d_floor * opts.d_floor) {
    fp.D = std::sqrt(radicand);
  } else {
    fp.D = opts.d_floor;
    fp.d_clamped = true;
    if (stats) ++stats->d_clamps;
  }
  fp.m2d = fp.Omega2d_inv * fp.ARSk / fp.D;
  fp.bbox_center = fp.mu2d + kSqrt2OverPi * fp.ARSk / std::sqrt(1.0 + kk);
  return fp;
}

/// Builds the footprint from an already computed local affine map.
inline SplatFootprint2D project_with(const Primitive3D& prim, const LocalAffine& la,
                                     const ProjectOptions& opts, ProjectStats* stats = nullptr) {
  const Vec3 scale = prim.scale(opts.scale_floor);
  const Mat23 q = la.A * prim.rotation() * scale.asDiagonal();
  const Vec3 k = opts.ignore_skew ? Vec3::Zero() : prim.k(opts.skew);
  SplatFootprint2D fp = footprint_from_q(la.mu2d, q, k, opts, stats);
  fp.A = la.A;
  fp.t_view = la.t_view;
  fp.depth = la.t_view.z();
  return fp;
}

/// Closed-form 2D footprint; nullopt when the primitive is culled by the near plane.
inline std::optional<SplatFootprint2D> project(const Primitive3D& prim, const CameraModel& cam,
                                               const ProjectOptions& opts = {},
                                               ProjectStats* stats = nullptr) {
  const auto la = local_affine(cam, prim.mu, opts.z_near);
  if (!la) {
    if (stats) ++stats->culled;
    return std::nullopt;
  }
  return project_with(prim, *la, opts, stats);
}

/// Inclusive-exclusive tile index rectangle.
struct TileRect {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  bool empty() const { return x1 <= x0 || y1 <= y0; }
  int count() const { return empty() ? 0 : (x1 - x0) * (y1 - y0); }
  bool operator==(const TileRect&) const = default;
};

/// Tiles touched by the disc of radius radius_mult * sqrt(lambda_max) around bbox_center.
inline TileRect bbox_tiles(const SplatFootprint2D& fp, int tile_size, int width, int height,
                           double radius_mult = 3.0) {
  const double r = radius_mult * std::sqrt(max_eigenvalue(fp.Omega2d));
  const double lo_x = fp.bbox_center.x() - r, hi_x = fp.bbox_center.x() + r;
  const double lo_y = fp.bbox_center.y() - r, hi_y = fp.bbox_center.y() + r;
  if (!(hi_x >= 0.0 && lo_x < width && hi_y >= 0.0 && lo_y < height)) return {};
  const int tiles_x = (width + tile_size - 1) / tile_size;
  const int tiles_y = (height + tile_size - 1) / tile_size;
  TileRect rect;
  rect.x0 = std::clamp(static_cast<int>(std::floor(lo_x / tile_size)), 0, tiles_x - 1);
  rect.y0 = std::clamp(static_cast<int>(std::floor(lo_y / tile_size)), 0, tiles_y - 1);
  rect.x1 = std::clamp(static_cast<int>(std::floor(hi_x / tile_size)), 0, tiles_x - 1) + 1;
  rect.y1 = std::clamp(static_cast<int>(std::floor(hi_y / tile_size)), 0, tiles_y - 1) + 1;
  return rect;
}

}  // namespace skewsplat
