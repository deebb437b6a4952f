#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace helimin {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Unit-length tolerance for nodal constraint classification.
inline constexpr double tolerance_unit = 1e-10;
/// Absolute slack on cot(a1) + cot(a2) in the angle-condition audit.
inline constexpr double tolerance_angle = 1e-12;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MeshError : public Error {
 public:
  using Error::Error;
};

/// Mesh text with a malformed or invalid line.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A nodal value violates the unit-length / tangency constraint it is required to satisfy.
class ConstraintViolation : public Error {
 public:
  ConstraintViolation(std::size_t node, const std::string& what)
      : Error("node " + std::to_string(node) + ": " + what), node_(node) {}
  std::size_t node() const noexcept { return node_; }

 private:
  std::size_t node_;
};

class SolverError : public Error {
 public:
  SolverError(const std::string& what, double residual, std::size_t iterations)
      : Error(what), residual_(residual), iterations_(iterations) {}
  double residual() const noexcept { return residual_; }
  std::size_t iterations() const noexcept { return iterations_; }

 private:
  double residual_;
  std::size_t iterations_;
};

inline Vec3 unit_vector(int i) {
  Vec3 e = Vec3::Zero();
  e[i] = 1.0;
  return e;
}

}  // namespace helimin
