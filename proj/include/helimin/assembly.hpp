#pragma once

#include <array>
#include <cmath>
#include <vector>

#include <Eigen/Sparse>

#include "helimin/core.hpp"
#include "helimin/fields.hpp"
#include "helimin/mesh.hpp"

namespace helimin {

/// Dimensionless model coefficients: kappa scales the anti-symmetric exchange, gamma the anisotropy.
struct ModelParams {
  double kappa = 0.0;
  double gamma = 0.0;
};

/// Anisotropy bilinear form: gamma (w.e3)(v.e3) for gamma >= 0, |gamma| (w x e3).(v x e3) otherwise.
inline double g_gamma(double gamma, const Vec3& w, const Vec3& v) {
  if (gamma >= 0.0) return gamma * w.z() * v.z();
  return -gamma * (w.x() * v.x() + w.y() * v.y());
}

/// Riesz representative of g_gamma(v, .).
inline Vec3 g_gamma_vector(double gamma, const Vec3& v) {
  if (gamma >= 0.0) return {0.0, 0.0, gamma * v.z()};
  return {-gamma * v.x(), -gamma * v.y(), 0.0};
}

// ---------------------------------------------------------------------------------------------
// P1 element geometry and quadrature

struct P1Element {
  double area = 0.0;
  std::array<Vec2, 3> grad;  // constant gradients of the three hat functions
};

inline P1Element p1_element(const std::array<Vec2, 3>& v) {
  P1Element e;
  e.area = signed_area(v[0], v[1], v[2]);
  if (!(std::abs(e.area) > 0.0)) throw MeshError("degenerate triangle");
  for (int a = 0; a < 3; ++a) {
    const Vec2& p = v[(a + 1) % 3];
    const Vec2& q = v[(a + 2) % 3];
    e.grad[a] = Vec2(p.y() - q.y(), q.x() - p.x()) / (2.0 * e.area);
  }
  e.area = std::abs(e.area);
  return e;
}

struct QuadraturePoint {
  Vec3 bary;
  double weight;  // fraction of the triangle area
};

/// Edge-midpoint rule, exact for quadratic polynomials.
inline const std::array<QuadraturePoint, 3>& midpoint_rule() {
  static const std::array<QuadraturePoint, 3> rule{{{Vec3(0.5, 0.5, 0.0), 1.0 / 3.0},
                                                     {Vec3(0.0, 0.5, 0.5), 1.0 / 3.0},
                                                     {Vec3(0.5, 0.0, 0.5), 1.0 / 3.0}}};
  return rule;
}

/// Six-point rule exact for polynomials of degree 4 (Dunavant).
inline const std::array<QuadraturePoint, 6>& degree4_rule() {
  constexpr double a = 0.445948490915965, wa = 0.223381589678011;
  constexpr double b = 0.091576213509771, wb = 0.109951743655322;
  static const std::array<QuadraturePoint, 6> rule{{{Vec3(a, a, 1 - 2 * a), wa},
                                                     {Vec3(a, 1 - 2 * a, a), wa},
                                                     {Vec3(1 - 2 * a, a, a), wa},
                                                     {Vec3(b, b, 1 - 2 * b), wb},
                                                     {Vec3(b, 1 - 2 * b, b), wb},
                                                     {Vec3(1 - 2 * b, b, b), wb}}};
  return rule;
}

using ElementBlock = Eigen::Matrix<double, 9, 9>;  // index 3 * local_node + component
using Mat32 = Eigen::Matrix<double, 3, 2>;

/// Helical gradient (d_1 v + kappa v x e1, d_2 v + kappa v x e2) of a P1 field on one element.
inline Mat32 helical_gradient(const P1Element& el, const std::array<Vec3, 3>& values, const Vec3& bary, double kappa) {
  Mat32 g = Mat32::Zero();
  Vec3 v = Vec3::Zero();
  for (int a = 0; a < 3; ++a) {
    g += values[a] * el.grad[a].transpose();
    v += bary[a] * values[a];
  }
  for (int i = 0; i < 2; ++i) g.col(i) += kappa * v.cross(unit_vector(i));
  return g;
}

/// Exact element matrix of (v, w) -> int_T grad_h v : grad_h w for the P1 basis phi_a e_p.
inline ElementBlock element_helical_stiffness(const std::array<Vec2, 3>& vertices, const ModelParams& params) {
  const P1Element el = p1_element(vertices);
  ElementBlock K = ElementBlock::Zero();
  for (const auto& qp : midpoint_rule()) {
    // Column (3a+p) holds the flattened helical gradient of phi_a e_p at this point.
    Eigen::Matrix<double, 6, 9> G;
    for (int a = 0; a < 3; ++a)
      for (int p = 0; p < 3; ++p) {
        const Vec3 ep = unit_vector(p);
        for (int i = 0; i < 2; ++i)
          G.block<3, 1>(3 * i, 3 * a + p) = ep * el.grad[a][i] + params.kappa * qp.bary[a] * ep.cross(unit_vector(i));
      }
    K.noalias() += (qp.weight * el.area) * G.transpose() * G;
  }
  return K;
}

/// Mass-lumped anisotropy block: g_gamma(e_i, e_j) |T| / 3 on each vertex diagonal block.
inline ElementBlock element_lumped_anisotropy(const std::array<Vec2, 3>& vertices, const ModelParams& params) {
  const P1Element el = p1_element(vertices);
  ElementBlock M = ElementBlock::Zero();
  for (int a = 0; a < 3; ++a)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        M(3 * a + i, 3 * a + j) = g_gamma(params.gamma, unit_vector(i), unit_vector(j)) * el.area / 3.0;
  return M;
}

/// Symmetric sparse operator with an optional dense block of constraint rows.
struct SparseSystem {
  Eigen::SparseMatrix<double> matrix;
  Eigen::MatrixXd constraints;  // m x dimension, possibly empty

  Eigen::Index dimension() const { return matrix.rows(); }

  double symmetry_defect() const {
    const Eigen::SparseMatrix<double> t = matrix.transpose();
    return (matrix - t).norm();
  }
};

/// Global matrix of a_h on (node, component) ordered coefficients, dimension 3N.
inline SparseSystem assemble_a(const Mesh& mesh, const ModelParams& params) {
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(mesh.num_triangles() * 81);
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto vertices = mesh.vertices(t);
    const ElementBlock K = element_helical_stiffness(vertices, params) + element_lumped_anisotropy(vertices, params);
    const auto& tri = mesh.triangle(t);
    for (int a = 0; a < 3; ++a)
      for (int p = 0; p < 3; ++p)
        for (int b = 0; b < 3; ++b)
          for (int q = 0; q < 3; ++q) {
            const double v = K(3 * a + p, 3 * b + q);
            if (v != 0.0) triplets.emplace_back(3 * tri[a] + p, 3 * tri[b] + q, v);
          }
  }
  SparseSystem sys;
  const auto n = static_cast<Eigen::Index>(3 * mesh.num_nodes());
  sys.matrix.resize(n, n);
  sys.matrix.setFromTriplets(triplets.begin(), triplets.end());
  sys.matrix.makeCompressed();
  return sys;
}

/// Scalar P1 stiffness matrix int grad phi_z . grad phi_z' (N x N).
inline Eigen::SparseMatrix<double> assemble_scalar_stiffness(const Mesh& mesh) {
  std::vector<Eigen::Triplet<double>> triplets;
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const P1Element el = p1_element(mesh.vertices(t));
    const auto& tri = mesh.triangle(t);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) triplets.emplace_back(tri[a], tri[b], el.area * el.grad[a].dot(el.grad[b]));
  }
  const auto n = static_cast<Eigen::Index>(mesh.num_nodes());
  Eigen::SparseMatrix<double> A(n, n);
  A.setFromTriplets(triplets.begin(), triplets.end());
  return A;
}

/// x^T A y accumulated in extended precision.
inline double bilinear(const Eigen::SparseMatrix<double>& A, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  long double s = 0.0L;
  for (Eigen::Index k = 0; k < A.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(A, k); it; ++it)
      s += static_cast<long double>(x[it.row()]) * it.value() * y[it.col()];
  return static_cast<double>(s);
}

inline double quadratic_energy(const SparseSystem& a, const NodalVectorField& v) {
  const Eigen::VectorXd x = v.flat();
  return 0.5 * bilinear(a.matrix, x, x);
}

struct EnergyBreakdown {
  double helical_term = 0.0;     // int |grad_h v|^2
  double anisotropy_term = 0.0;  // int I_h g_gamma(v, v)
  double total_J = 0.0;          // (helical + anisotropy) / 2
  double original_E = 0.0;       // model energy with mu = gamma + kappa^2, no lumping
  double offset_check = 0.0;     // total_J - original_E
};

/// Element-by-element evaluation of J_h and of the model energy E, without forming a_h.
inline EnergyBreakdown energy_Jh(const NodalVectorField& v, const Mesh& mesh, const ModelParams& params) {
  if (!v.lives_on(mesh)) throw Error("energy_Jh: field does not live on the mesh");
  const double mu = params.gamma + params.kappa * params.kappa;
  long double helical = 0.0L, original = 0.0L, aniso = 0.0L;
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const P1Element el = p1_element(mesh.vertices(t));
    const auto& tri = mesh.triangle(t);
    const std::array<Vec3, 3> values{v[tri[0]], v[tri[1]], v[tri[2]]};
    Mat32 grad = Mat32::Zero();
    for (int a = 0; a < 3; ++a) grad += values[a] * el.grad[a].transpose();
    const Vec3 curl = unit_vector(0).cross(grad.col(0)) + unit_vector(1).cross(grad.col(1));
    for (const auto& qp : midpoint_rule()) {
      const double w = qp.weight * el.area;
      const Vec3 val = qp.bary[0] * values[0] + qp.bary[1] * values[1] + qp.bary[2] * values[2];
      helical += w * helical_gradient(el, values, qp.bary, params.kappa).squaredNorm();
      original += w * (0.5 * grad.squaredNorm() + params.kappa * val.dot(curl) + 0.5 * mu * val.z() * val.z());
    }
  }
  const auto& weights = mesh.lumped_weights();
  for (std::size_t z = 0; z < v.size(); ++z) aniso += weights[z] * g_gamma(params.gamma, v[z], v[z]);
  EnergyBreakdown e;
  e.helical_term = static_cast<double>(helical);
  e.anisotropy_term = static_cast<double>(aniso);
  e.total_J = 0.5 * (e.helical_term + e.anisotropy_term);
  e.original_E = static_cast<double>(original);
  e.offset_check = e.total_J - e.original_E;
  return e;
}

/// ||grad v||^2_{L^2}.
inline double gradient_norm_sq(const NodalVectorField& v, const Mesh& mesh) {
  double s = 0.0;
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const P1Element el = p1_element(mesh.vertices(t));
    const auto& tri = mesh.triangle(t);
    Mat32 grad = Mat32::Zero();
    for (int a = 0; a < 3; ++a) grad += v[tri[a]] * el.grad[a].transpose();
    s += el.area * grad.squaredNorm();
  }
  return s;
}

/// Mass-lumped ||v||^2 = sum_z (int phi_z) |v(z)|^2.
inline double lumped_norm_sq(const NodalVectorField& v, const Mesh& mesh) {
  double s = 0.0;
  const auto& w = mesh.lumped_weights();
  for (std::size_t z = 0; z < v.size(); ++z) s += w[z] * v[z].squaredNorm();
  return s;
}

/// ||v . e_comp||^2_{L^2}, exact for P1 data.
inline double component_l2_norm_sq(const NodalVectorField& v, const Mesh& mesh, int comp) {
  double s = 0.0;
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangle(t);
    for (const auto& qp : midpoint_rule()) {
      const double val = qp.bary[0] * v[tri[0]][comp] + qp.bary[1] * v[tri[1]][comp] + qp.bary[2] * v[tri[2]][comp];
      s += qp.weight * mesh.area(t) * val * val;
    }
  }
  return s;
}

/// Discrete weak Euler-Lagrange residual: the functional
///   r(v) = int (u x grad_h u) : grad_h v + I_h g_gamma(u, v x u)
/// evaluated on every nodal direction phi_z e_i; returns its Euclidean norm.
inline double el_residual(const NodalVectorField& u, const Mesh& mesh, const ModelParams& params) {
  if (!u.lives_on(mesh)) throw Error("el_residual: field does not live on the mesh");
  for (std::size_t z = 0; z < u.size(); ++z)
    if (std::abs(u[z].norm() - 1.0) > tolerance_unit) throw ConstraintViolation(z, "el_residual needs a unit-length field");
  std::vector<Vec3> r(u.size(), Vec3::Zero());
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const P1Element el = p1_element(mesh.vertices(t));
    const auto& tri = mesh.triangle(t);
    const std::array<Vec3, 3> values{u[tri[0]], u[tri[1]], u[tri[2]]};
    for (const auto& qp : degree4_rule()) {
      const double w = qp.weight * el.area;
      const Vec3 val = qp.bary[0] * values[0] + qp.bary[1] * values[1] + qp.bary[2] * values[2];
      const Mat32 gh = helical_gradient(el, values, qp.bary, params.kappa);
      const Vec3 m0 = val.cross(gh.col(0));
      const Vec3 m1 = val.cross(gh.col(1));
      for (int b = 0; b < 3; ++b) {
        const Vec3 contrib = m0 * el.grad[b].x() + m1 * el.grad[b].y() +
                             params.kappa * qp.bary[b] * (unit_vector(0).cross(m0) + unit_vector(1).cross(m1));
        r[tri[b]] += w * contrib;
      }
    }
  }
  const auto& weights = mesh.lumped_weights();
  double s = 0.0;
  for (std::size_t z = 0; z < u.size(); ++z) {
    r[z] += weights[z] * u[z].cross(g_gamma_vector(params.gamma, u[z]));
    s += r[z].squaredNorm();
  }
  return std::sqrt(s);
}

}  // namespace helimin
