#pragma once

#include <cstdint>
#include <random>

#include <Eigen/LU>

#include "helimin/helimin.hpp"

namespace helimin::testing {

inline Vec3 random_vec(std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n;
  return scale * Vec3(n(rng), n(rng), n(rng));
}

inline Vec3 random_unit(std::mt19937_64& rng) {
  Vec3 v;
  do v = random_vec(rng);
  while (v.norm() < 1e-6);
  return v.normalized();
}

inline NodalVectorField random_field(const Mesh& mesh, std::mt19937_64& rng, double scale = 1.0) {
  NodalVectorField f(mesh);
  for (std::size_t z = 0; z < f.size(); ++z) f[z] = random_vec(rng, scale);
  return f;
}

inline NodalVectorField random_unit_field(const Mesh& mesh, std::mt19937_64& rng) {
  NodalVectorField f(mesh);
  for (std::size_t z = 0; z < f.size(); ++z) f[z] = random_unit(rng);
  return f;
}

/// Random field with every nodal value tangent to u.
inline NodalVectorField random_tangent(const NodalVectorField& u, const Mesh& mesh, std::mt19937_64& rng) {
  NodalVectorField v(mesh);
  for (std::size_t z = 0; z < v.size(); ++z) {
    const Vec3 r = random_vec(rng);
    v[z] = r - r.dot(u[z]) * u[z];
  }
  return v;
}

/// Structured square with interior nodes jittered; keeps the mesh valid but generally breaks
/// the angle condition.
inline Mesh jittered_square(int n, double amount, std::mt19937_64& rng) {
  const Mesh base = generate_structured_square(n);
  std::uniform_real_distribution<double> u(-amount / n, amount / n);
  std::vector<Vec2> nodes = base.nodes();
  for (auto& p : nodes)
    if (p.x() > 1e-12 && p.x() < 1 - 1e-12 && p.y() > 1e-12 && p.y() < 1 - 1e-12) p += Vec2(u(rng), u(rng));
  return Mesh(nodes, base.triangles());
}

// Dense oracle: full 3N saddle system with nodal tangency rows u(z)^T and, when present, the
// uniqueness rows (w_z b_i) on every node; solved by full-pivot LU.
inline NodalVectorField dense_oracle(const Mesh& mesh, const NodalVectorField& u, const ModelParams& p, const ConstraintBasis& basis) {
  const Eigen::MatrixXd A(assemble_a(mesh, p).matrix);
  const auto N = static_cast<Eigen::Index>(mesh.num_nodes());
  const auto m = static_cast<Eigen::Index>(basis.m());
  const Eigen::Index n = 3 * N + N + m;
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n, n);
  K.topLeftCorner(3 * N, 3 * N) = A;
  for (Eigen::Index z = 0; z < N; ++z) {
    K.block(3 * N + z, 3 * z, 1, 3) = u[z].transpose();
    K.block(3 * z, 3 * N + z, 3, 1) = u[z];
  }
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index z = 0; z < N; ++z) {
      const Vec3 row = mesh.lumped_weights()[z] * basis.vectors[i];
      K.block(4 * N + i, 3 * z, 1, 3) = row.transpose();
      K.block(3 * z, 4 * N + i, 3, 1) = row;
    }
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs.head(3 * N) = A * u.flat();
  const Eigen::VectorXd x = K.fullPivLu().solve(rhs);
  return NodalVectorField::from_flat(mesh, x.head(3 * N));
}

}  // namespace helimin::testing
