#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "helimin/core.hpp"
#include "helimin/mesh.hpp"

namespace helimin {

/// P1 vector field given by one R^3 value per mesh node.
class NodalVectorField {
 public:
  NodalVectorField() = default;
  explicit NodalVectorField(const Mesh& mesh, const Vec3& fill = Vec3::Zero())
      : mesh_id_(mesh.id()), values_(mesh.num_nodes(), fill) {}
  NodalVectorField(const Mesh& mesh, std::vector<Vec3> values) : mesh_id_(mesh.id()), values_(std::move(values)) {
    if (values_.size() != mesh.num_nodes())
      throw Error("field has " + std::to_string(values_.size()) + " values for a mesh with " +
                  std::to_string(mesh.num_nodes()) + " nodes");
    for (std::size_t z = 0; z < values_.size(); ++z)
      if (!values_[z].allFinite()) throw ConstraintViolation(z, "non-finite field value");
  }

  std::uint64_t mesh_id() const noexcept { return mesh_id_; }
  std::size_t size() const noexcept { return values_.size(); }
  const std::vector<Vec3>& values() const noexcept { return values_; }
  std::vector<Vec3>& values() noexcept { return values_; }
  const Vec3& operator[](std::size_t z) const { return values_[z]; }
  Vec3& operator[](std::size_t z) { return values_[z]; }

  bool lives_on(const Mesh& mesh) const noexcept { return mesh_id_ == mesh.id() && values_.size() == mesh.num_nodes(); }

  /// Coefficient vector ordered (node, component).
  Eigen::VectorXd flat() const {
    Eigen::VectorXd x(3 * values_.size());
    for (std::size_t z = 0; z < values_.size(); ++z) x.segment<3>(3 * z) = values_[z];
    return x;
  }
  static NodalVectorField from_flat(const Mesh& mesh, const Eigen::VectorXd& x) {
    if (x.size() != static_cast<Eigen::Index>(3 * mesh.num_nodes())) throw Error("flat vector size mismatch");
    NodalVectorField f(mesh);
    for (std::size_t z = 0; z < f.size(); ++z) f.values_[z] = x.segment<3>(3 * z);
    return f;
  }

  NodalVectorField& operator+=(const NodalVectorField& o) {
    require_same(o);
    for (std::size_t z = 0; z < values_.size(); ++z) values_[z] += o.values_[z];
    return *this;
  }
  NodalVectorField& operator-=(const NodalVectorField& o) {
    require_same(o);
    for (std::size_t z = 0; z < values_.size(); ++z) values_[z] -= o.values_[z];
    return *this;
  }
  NodalVectorField& operator*=(double s) {
    for (auto& v : values_) v *= s;
    return *this;
  }
  friend NodalVectorField operator+(NodalVectorField a, const NodalVectorField& b) { return a += b; }
  friend NodalVectorField operator-(NodalVectorField a, const NodalVectorField& b) { return a -= b; }
  friend NodalVectorField operator*(double s, NodalVectorField a) { return a *= s; }

  double max_abs_diff(const NodalVectorField& o) const {
    require_same(o);
    double d = 0.0;
    for (std::size_t z = 0; z < values_.size(); ++z) d = std::max(d, (values_[z] - o.values_[z]).cwiseAbs().maxCoeff());
    return d;
  }

 private:
  void require_same(const NodalVectorField& o) const {
    if (o.mesh_id_ != mesh_id_ || o.values_.size() != values_.size()) throw Error("fields live on different meshes");
  }

  std::uint64_t mesh_id_ = 0;
  std::vector<Vec3> values_;
};

enum class ConstraintKind { InMh, InMhPlus, Tangent, Unconstrained };

struct ConstraintClass {
  ConstraintKind kind = ConstraintKind::Unconstrained;
  double tolerance = tolerance_unit;
};

inline const char* to_string(ConstraintKind k) {
  switch (k) {
    case ConstraintKind::InMh: return "InMh";
    case ConstraintKind::InMhPlus: return "InMhPlus";
    case ConstraintKind::Tangent: return "Tangent";
    case ConstraintKind::Unconstrained: return "Unconstrained";
  }
  return "?";
}

inline bool is_unit(const NodalVectorField& f, double tol = tolerance_unit) {
  for (const auto& v : f.values())
    if (std::abs(v.norm() - 1.0) > tol) return false;
  return true;
}

inline bool is_at_least_unit(const NodalVectorField& f, double tol = tolerance_unit) {
  for (const auto& v : f.values())
    if (v.norm() < 1.0 - tol) return false;
  return true;
}

inline bool is_tangent(const NodalVectorField& f, const NodalVectorField& base, double tol = tolerance_unit) {
  for (std::size_t z = 0; z < f.size(); ++z)
    if (std::abs(f[z].dot(base[z])) > tol) return false;
  return true;
}

/// Strongest constraint class the field satisfies. Tangency is only tested when `base` is given
/// and takes precedence over the unit-length classes.
inline ConstraintClass classify(const NodalVectorField& field, const NodalVectorField* base = nullptr) {
  if (base) {
    if (base->mesh_id() != field.mesh_id() || base->size() != field.size())
      throw Error("classify: field and base live on different meshes");
    if (is_tangent(field, *base)) return {ConstraintKind::Tangent, tolerance_unit};
  }
  if (is_unit(field)) return {ConstraintKind::InMh, tolerance_unit};
  if (is_at_least_unit(field)) return {ConstraintKind::InMhPlus, tolerance_unit};
  return {ConstraintKind::Unconstrained, tolerance_unit};
}

/// Nodal unit-length projection v(z) / |v(z)|, defined on fields with |v(z)| >= 1.
inline NodalVectorField nodal_project(const NodalVectorField& v) {
  NodalVectorField out = v;
  for (std::size_t z = 0; z < v.size(); ++z) {
    const double n = v[z].norm();
    if (n < 1.0 - tolerance_unit) throw ConstraintViolation(z, "nodal projection needs |v(z)| >= 1, got " + std::to_string(n));
    out[z] = v[z] / n;
  }
  return out;
}

/// Nodal interpolation I_h f: values[z] = f(node z).
template <class F>
NodalVectorField nodal_interpolate(F&& f, const Mesh& mesh) {
  std::vector<Vec3> values;
  values.reserve(mesh.num_nodes());
  for (std::size_t z = 0; z < mesh.num_nodes(); ++z) {
    const Vec3 v = f(mesh.node(z));
    if (!v.allFinite()) throw ConstraintViolation(z, "interpolated function is not finite");
    values.push_back(v);
  }
  return NodalVectorField(mesh, std::move(values));
}

template <class F>
std::vector<double> nodal_interpolate_scalar(F&& f, const Mesh& mesh) {
  std::vector<double> values;
  values.reserve(mesh.num_nodes());
  for (std::size_t z = 0; z < mesh.num_nodes(); ++z) {
    const double v = f(mesh.node(z));
    if (!std::isfinite(v)) throw ConstraintViolation(z, "interpolated function is not finite");
    values.push_back(v);
  }
  return values;
}

/// Evaluate the P1 field inside triangle t at barycentric coordinates (l0, l1, l2).
inline Vec3 evaluate(const NodalVectorField& f, const Mesh& mesh, std::size_t t, const Vec3& bary) {
  const auto& tri = mesh.triangle(t);
  return bary[0] * f[tri[0]] + bary[1] * f[tri[1]] + bary[2] * f[tri[2]];
}

// ---------------------------------------------------------------------------------------------
// Householder tangent frames

/// Orthogonal matrix with Q e3 = -u, so Q e1 and Q e2 span the tangent plane of the sphere at u.
/// On the lower hemisphere u + e3 is short and the reflection through it loses digits; there the
/// negated reflection mapping e3 to u is used instead, which equals diag(-1, -1, 1) at u = -e3.
inline Mat3 householder_matrix(const Vec3& u) {
  if (u.z() >= 0.0) {
    const Vec3 v = (u + unit_vector(2)).normalized();
    return Mat3::Identity() - 2.0 * v * v.transpose();
  }
  const Vec3 v = (u - unit_vector(2)).normalized();
  return 2.0 * v * v.transpose() - Mat3::Identity();
}

struct HouseholderFrame {
  std::uint64_t mesh_id = 0;
  std::vector<Mat3> Q;

  std::size_t size() const noexcept { return Q.size(); }
  /// 3x2 block of tangent directions at node z.
  Eigen::Matrix<double, 3, 2> tangent_block(std::size_t z) const { return Q[z].leftCols<2>(); }
};

inline HouseholderFrame householder_frame(const NodalVectorField& u) {
  HouseholderFrame frame;
  frame.mesh_id = u.mesh_id();
  frame.Q.reserve(u.size());
  for (std::size_t z = 0; z < u.size(); ++z) {
    if (std::abs(u[z].norm() - 1.0) > tolerance_unit) throw ConstraintViolation(z, "Householder frame needs a unit vector");
    frame.Q.push_back(householder_matrix(u[z]));
  }
  return frame;
}

/// Tangent field sum_z (w1 Q e1 + w2 Q e2) phi_z.
inline NodalVectorField prolong(const HouseholderFrame& frame, const Mesh& mesh, const std::vector<Vec2>& w_hat) {
  if (w_hat.size() != frame.size() || frame.mesh_id != mesh.id()) throw Error("prolong: size mismatch");
  NodalVectorField out(mesh);
  for (std::size_t z = 0; z < w_hat.size(); ++z) out[z] = frame.tangent_block(z) * w_hat[z];
  return out;
}

/// Inverse of prolong on tangent fields: coefficients (Q e1 . v, Q e2 . v).
inline std::vector<Vec2> restrict_to_frame(const HouseholderFrame& frame, const NodalVectorField& v) {
  if (v.size() != frame.size() || v.mesh_id() != frame.mesh_id) throw Error("restrict: size mismatch");
  std::vector<Vec2> out(v.size());
  for (std::size_t z = 0; z < v.size(); ++z) {
    const double normal = frame.Q[z].col(2).dot(v[z]);
    if (std::abs(normal) > tolerance_unit * std::max(1.0, v[z].norm()))
      throw ConstraintViolation(z, "field is not tangent to the frame base");
    out[z] = frame.tangent_block(z).transpose() * v[z];
  }
  return out;
}

// ---------------------------------------------------------------------------------------------
// Text format: "field <N>" then N lines "ux uy uz".

inline void write_field(std::ostream& out, const NodalVectorField& f) {
  out << "field " << f.size() << '\n' << std::setprecision(17);
  for (const auto& v : f.values()) out << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
}

inline NodalVectorField read_field(std::istream& in, const Mesh& mesh) {
  std::string line;
  std::size_t lineno = 0;
  auto next = [&]() -> std::string {
    while (std::getline(in, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r") != std::string::npos) return line;
    }
    throw ParseError(lineno + 1, "unexpected end of file");
  };
  std::istringstream hs(next());
  std::string word;
  long long n = -1;
  if (!(hs >> word >> n) || word != "field" || n < 0) throw ParseError(lineno, "expected 'field <count>'");
  if (static_cast<std::size_t>(n) != mesh.num_nodes())
    throw ParseError(lineno, "field has " + std::to_string(n) + " values but mesh has " + std::to_string(mesh.num_nodes()) + " nodes");
  std::vector<Vec3> values;
  values.reserve(static_cast<std::size_t>(n));
  for (long long i = 0; i < n; ++i) {
    std::istringstream ss(next());
    double x, y, z;
    std::string rest;
    if (!(ss >> x >> y >> z) || (ss >> rest)) throw ParseError(lineno, "expected 'ux uy uz'");
    values.emplace_back(x, y, z);
  }
  return NodalVectorField(mesh, std::move(values));
}

inline void save_field(const NodalVectorField& f, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write field file '" + path + "'");
  write_field(out, f);
}

inline NodalVectorField load_field(const std::string& path, const Mesh& mesh) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open field file '" + path + "'");
  return read_field(in, mesh);
}

}  // namespace helimin
