#pragma once

// Skew-Normal kernel mathematics: the unnormalized d-dimensional kernel,
// the latent-skew reparameterization, Mardia skewness, the exact mean offset
// and a sampler built on the conditional stochastic representation.

#include "skewsplat/types.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>

namespace skewsplat {

inline constexpr double kSqrt2Pi = 2.5066282746310002;  // sqrt(2*pi)
inline constexpr double kSqrt2OverPi = 0.79788456080286535588;  // sqrt(2/pi)

/// Standard normal CDF through the exact complementary error function.
inline double std_normal_cdf(double t) {
  return 0.5 * std::erfc(-t * (1.0 / std::numbers::sqrt2));
}

inline double std_normal_pdf(double t) {
  return std::exp(-0.5 * t * t) / kSqrt2Pi;
}

/// Constants of the magnitude/direction split k = m_k * d_k.
struct SkewSettings {
  double mag_cap = 8.0;          // m_k in (0, mag_cap)
  double mag_temperature = 6.0;  // m_k = cap / (1 + exp(-x / temperature))
  double dir_eps = 1e-8;         // d_k = v / (|v| + eps)
};

struct SkewLatent {
  double mag_raw = 0.0;
  Vec3 dir_raw = Vec3::Zero();
};

inline double skew_magnitude(double mag_raw, const SkewSettings& s = {}) {
  return s.mag_cap / (1.0 + std::exp(-mag_raw / s.mag_temperature));
}

/// dm_k/dx of the logistic magnitude map.
inline double skew_magnitude_derivative(double mag_raw, const SkewSettings& s = {}) {
  const double m = skew_magnitude(mag_raw, s);
  return m * (s.mag_cap - m) / (s.mag_cap * s.mag_temperature);
}

inline Vec3 skew_direction(const Vec3& v, const SkewSettings& s = {}) {
  return v / (v.norm() + s.dir_eps);
}

/// Exact Jacobian of d_k = v / (|v| + eps). Tends to (I - d d^T)/|v| as eps -> 0.
inline Mat3 skew_direction_jacobian(const Vec3& v, const SkewSettings& s = {}) {
  const double n = v.norm();
  const double denom = n + s.dir_eps;
  Mat3 jac = Mat3::Identity() / denom;
  if (n > 0.0) jac -= v * v.transpose() / (n * denom * denom);
  return jac;
}

inline Vec3 compose_k(const SkewLatent& latent, const SkewSettings& s = {}) {
  return skew_magnitude(latent.mag_raw, s) * skew_direction(latent.dir_raw, s);
}

/// Rotation matrix of the quaternion (w, x, y, z); the quaternion is normalized first.
inline Mat3 quat_to_rotation(const Vec4& quat) {
  const Vec4 q = quat / quat.norm();
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Mat3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

/// Pulls dL/dR back to the raw (not necessarily unit) quaternion.
inline Vec4 rotation_grad_to_quat(const Vec4& quat, const Mat3& d_rot) {
  const double norm = quat.norm();
  const Vec4 q = quat / norm;
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Mat3 dw, dx, dy, dz;
  dw << 0, -z, y, z, 0, -x, -y, x, 0;
  dx << 0, y, z, y, -2 * x, -w, z, w, -2 * x;
  dy << -2 * y, x, w, x, 0, z, -w, z, -2 * y;
  dz << -2 * z, -w, x, w, -2 * z, y, x, y, 0;
  const Vec4 d_unit(2 * (dw.cwiseProduct(d_rot)).sum(), 2 * (dx.cwiseProduct(d_rot)).sum(),
                    2 * (dy.cwiseProduct(d_rot)).sum(), 2 * (dz.cwiseProduct(d_rot)).sum());
  return (d_unit - q * q.dot(d_unit)) / norm;
}

/// One Skew-Normal splat in world space.
struct Primitive3D {
  Vec3 mu = Vec3::Zero();
  Vec4 quat = Vec4(1, 0, 0, 0);  // (w, x, y, z)
  Vec3 log_scale = Vec3::Zero();
  SkewLatent skew;
  double opacity_raw = 0.0;
  Vec3 color = Vec3::Constant(0.5);

  Mat3 rotation() const { return quat_to_rotation(quat); }
  double opacity() const { return std::tanh(opacity_raw); }
  Vec3 k(const SkewSettings& s = {}) const { return compose_k(skew, s); }

  /// Diagonal of S; throws DegeneratePrimitive below the floor.
  Vec3 scale(double floor = 1e-6) const {
    const Vec3 s = log_scale.array().exp();
    for (int i = 0; i < 3; ++i) {
      if (!std::isfinite(s[i]) || s[i] < floor) {
        throw DegeneratePrimitive("primitive scale " + std::to_string(s[i]) +
                                  " below floor " + std::to_string(floor));
      }
    }
    return s;
  }
};

/// Location, scale matrix and slant of a d-dimensional Skew-Normal kernel.
template <int D>
struct SNDensityParams {
  VecN<D> mu;
  MatN<D> Omega;
  VecN<D> alpha;
  VecN<D> omega;  // sqrt(diag(Omega))
  MatN<D> Omega_inv;

  static SNDensityParams make(const VecN<D>& mu, const MatN<D>& Omega, const VecN<D>& alpha) {
    if ((Omega - Omega.transpose()).cwiseAbs().maxCoeff() > 1e-9 * Omega.cwiseAbs().maxCoeff()) {
      throw NumericalError("scale matrix is not symmetric");
    }
    Eigen::LLT<MatN<D>> llt(Omega);
    if (llt.info() != Eigen::Success) throw NumericalError("scale matrix is not positive definite");
    SNDensityParams p;
    p.mu = mu;
    p.Omega = Omega;
    p.alpha = alpha;
    p.omega = Omega.diagonal().cwiseSqrt();
    p.Omega_inv = llt.solve(MatN<D>::Identity());
    return p;
  }

  /// Correlation matrix omega^-1 Omega omega^-1.
  MatN<D> Omega_bar() const {
    const VecN<D> inv = omega.cwiseInverse();
    return inv.asDiagonal() * Omega * inv.asDiagonal();
  }
};

/// Builds (mu, Omega = R S S^T R^T, alpha = omega R S^-1 k) for a primitive.
inline SNDensityParams<3> compose_slant(const Primitive3D& prim, const SkewSettings& s = {},
                                        double scale_floor = 1e-6) {
  const Vec3 scale = prim.scale(scale_floor);
  const Mat3 r = prim.rotation();
  const Mat3 rs = r * scale.asDiagonal();
  const Mat3 omega_mat = rs * rs.transpose();
  const Vec3 omega = omega_mat.diagonal().cwiseSqrt();
  const Vec3 alpha = omega.asDiagonal() * (r * scale.cwiseInverse().asDiagonal() * prim.k(s));
  return SNDensityParams<3>::make(prim.mu, omega_mat, alpha);
}

/// Unnormalized kernel G_d(x - mu; Omega) * Phi(alpha^T omega^-1 (x - mu)).
template <int D>
double eval_kernel(const VecN<D>& x, const SNDensityParams<D>& p) {
  const VecN<D> d = x - p.mu;
  const double maha = d.dot(p.Omega_inv * d);
  const double slant = p.alpha.dot(d.cwiseQuotient(p.omega));
  return std::exp(-0.5 * maha) * std_normal_cdf(slant);
}

/// alpha_* = sqrt(alpha^T Omega_bar alpha).
template <int D>
double alpha_star(const SNDensityParams<D>& p) {
  return std::sqrt(p.alpha.dot(p.Omega_bar() * p.alpha));
}

/// Mardia skewness of the Skew-Normal family as a function of alpha_* (= |k|).
inline double mardia_skewness(double k_norm) {
  const double pi = std::numbers::pi;
  const double a2 = k_norm * k_norm;
  const double lead = (4.0 - pi) / 2.0;
  // Written in 1/a^2 so the floating-point evaluation is monotone as well.
  const double ratio = a2 > 0.0 ? (2.0 / pi) / (1.0 / a2 + (1.0 - 2.0 / pi)) : 0.0;
  return lead * lead * ratio * ratio * ratio;
}

/// Supremum of mardia_skewness, 2 (pi - 4)^2 / (pi - 2)^3.
inline double mardia_skewness_limit() {
  const double pi = std::numbers::pi;
  return 2.0 * (pi - 4.0) * (pi - 4.0) / ((pi - 2.0) * (pi - 2.0) * (pi - 2.0));
}

/// E[X] - mu = sqrt(2/pi) R S k / sqrt(1 + k^T k).
inline Vec3 mean_offset(const Primitive3D& prim, const SkewSettings& s = {},
                        double scale_floor = 1e-6) {
  const Vec3 k = prim.k(s);
  return kSqrt2OverPi * (prim.rotation() * (prim.scale(scale_floor).asDiagonal() * k)) /
         std::sqrt(1.0 + k.squaredNorm());
}

template <int D>
using SampleMatrix = Eigen::Matrix<double, Eigen::Dynamic, D>;

/// Draws n samples: (U, Z) jointly normal with covariance [[1, delta^T], [delta, Omega_bar]],
/// Z is kept when U > 0 and negated otherwise; returns rows mu + omega Z.
template <int D>
SampleMatrix<D> sample_sn(const SNDensityParams<D>& p, std::int64_t n, std::uint64_t seed) {
  if (n < 1) throw ConfigError("sample count must be positive");
  const MatN<D> omega_bar = p.Omega_bar();
  const double a_star2 = p.alpha.dot(omega_bar * p.alpha);
  const VecN<D> delta = omega_bar * p.alpha / std::sqrt(1.0 + a_star2);
  // Conditional covariance of Z given U; SPD iff the block covariance is SPD.
  const MatN<D> schur = omega_bar - delta * delta.transpose();
  Eigen::LLT<MatN<D>> llt(schur);
  if (llt.info() != Eigen::Success) throw NumericalError("block covariance is not SPD");
  const MatN<D> chol = llt.matrixL();

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  SampleMatrix<D> out(n, D);
  VecN<D> eps;
  for (std::int64_t i = 0; i < n; ++i) {
    const double u = normal(rng);
    for (int j = 0; j < D; ++j) eps[j] = normal(rng);
    VecN<D> z = delta * u + chol * eps;
    if (u <= 0.0) z = -z;
    out.row(i) = (p.mu + p.omega.cwiseProduct(z)).transpose();
  }
  return out;
}

}  // namespace skewsplat
