#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace recon {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

/// Selects the serial reference loop or the OpenMP loop for a kernel.
enum class Exec { serial, parallel };

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input record; `record()` is the 1-based line or vertex index.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t record)
      : Error(what + " (record " + std::to_string(record) + ")"), record_(record) {}
  std::size_t record() const { return record_; }

 private:
  std::size_t record_;
};

class EmptyCloudError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ModelError : public Error {
 public:
  using Error::Error;
};

constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double deg) { return deg * kPi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / kPi; }

}  // namespace recon
