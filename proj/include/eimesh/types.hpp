#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace eimesh {

// Points and tensors are always stored in 3D. Two-dimensional data keeps
// z = 0 and a zero third row/column; every routine that cares takes `dim`.
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

struct Box {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());

  Box() = default;
  Box(const Vec3& lo_, const Vec3& hi_) : lo(lo_), hi(hi_) {}

  bool empty() const { return !(lo.x() <= hi.x()); }

  void extend(const Vec3& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }

  bool contains(const Vec3& p, double tol = 0.0) const {
    return (p.array() >= lo.array() - tol).all() && (p.array() <= hi.array() + tol).all();
  }

  Vec3 extent() const { return hi - lo; }
  Vec3 center() const { return 0.5 * (lo + hi); }
  double diagonal(int dim) const { return extent().head(dim).norm(); }

  // Box with the same center and `factor` times the extent.
  Box scaled(double factor) const {
    const Vec3 c = center();
    const Vec3 half = 0.5 * factor * extent();
    return {c - half, c + half};
  }
};

// Error hierarchy. The CLI maps each class onto a fixed exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File missing, unreadable, or malformed.
class IoError : public Error {
 public:
  using Error::Error;
};

// A parameter value outside its documented range.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Input data that does not meet an operation's preconditions
// (missing normals, degenerate neighborhoods, query outside the mesh, ...).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// Broken internal invariant. Never expected for valid inputs.
class InternalError : public Error {
 public:
  using Error::Error;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw InvalidArgument(what);
}

}  // namespace eimesh
