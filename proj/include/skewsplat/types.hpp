#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace skewsplat {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Mat23 = Eigen::Matrix<double, 2, 3>;

template <int D>
using VecN = Eigen::Matrix<double, D, 1>;
template <int D>
using MatN = Eigen::Matrix<double, D, D>;

// Errors map onto the CLI exit codes: config 2, numerical 3, I/O 4.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 1; }
};

class ConfigError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

class NumericalError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

class IoError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 4; }
};

/// Thrown when a primitive's scale falls below the floor or goes non-finite.
class DegeneratePrimitive : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace skewsplat
