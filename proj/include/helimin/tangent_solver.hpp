#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Sparse>

#include "helimin/assembly.hpp"
#include "helimin/core.hpp"
#include "helimin/fields.hpp"
#include "helimin/krylov.hpp"
#include "helimin/mesh.hpp"

namespace helimin {

struct SolverConfig {
  double rtol = 1e-10;
  std::size_t max_iters = 0;  // 0 selects 10 * (2N + m)
  bool uniqueness_constraints = true;
  std::optional<std::uint64_t> initial_guess_seed;  // random Krylov start vector when set
};

/// Orthonormal basis of (span B)^perp; these constant directions are the kernel of the
/// tangent problem when kappa = 0.
struct ConstraintBasis {
  std::vector<Vec3> vectors;
  std::string provenance;

  std::size_t m() const noexcept { return vectors.size(); }
};

/// Constraint detection for the tangential update. Only kappa = 0 can lose uniqueness; the
/// spanning set is the nodal values plus e3 (gamma > 0) or e1, e2 (gamma < 0). With the first
/// vector b0 of that set, p = b0 x b is formed for every b: if all vanish the complement is the
/// plane orthogonal to b0; otherwise with the first non-zero p, the complement is p/|p| when p is
/// orthogonal to every b, and trivial otherwise.
/// Cross products below this count as zero. Nodal values closer than about sqrt(machine eps)
/// to a common line or plane leave near-null modes whose roundoff amplification spoils the
/// solve, so such sets are treated as degenerate; the constraint rows never break the energy
/// split J(u - w) = J(u) - J(w) because the multiplier term vanishes on w.
inline constexpr double constraint_zero_tol = 1e-6;

inline ConstraintBasis detect_constraints(const NodalVectorField& u, const ModelParams& params) {
  constexpr double zero_tol = constraint_zero_tol;
  ConstraintBasis basis;
  if (params.kappa != 0.0) {
    basis.provenance = "kappa-nonzero";
    return basis;
  }
  std::vector<Vec3> spanning;
  if (params.gamma > 0.0) spanning.push_back(unit_vector(2));
  if (params.gamma < 0.0) {
    spanning.push_back(unit_vector(0));
    spanning.push_back(unit_vector(1));
  }
  for (const auto& v : u.values()) spanning.push_back(v);
  if (spanning.empty()) {
    basis.provenance = "empty";
    return basis;
  }

  const Vec3 b0 = spanning.front().normalized();
  std::optional<Vec3> p1;
  for (const auto& b : spanning) {
    const Vec3 p = b0.cross(b);
    if (p.norm() > zero_tol * std::max(1.0, b.norm())) {
      p1 = p.normalized();
      break;
    }
  }
  if (!p1) {
    const Mat3 Q = householder_matrix(b0);
    basis.vectors = {Q.col(0), Q.col(1)};
    basis.provenance = "collinear";
    return basis;
  }
  for (const auto& b : spanning) {
    if (std::abs(p1->dot(b)) > zero_tol * std::max(1.0, b.norm())) {
      basis.provenance = "full-span";
      return basis;
    }
  }
  basis.vectors = {*p1};
  basis.provenance = "planar";
  return basis;
}

struct TangentSolveResult {
  NodalVectorField w;
  Eigen::VectorXd lambda;
  std::size_t iterations = 0;
  double residual = 0.0;  // ||rhs - K x|| of the reduced (saddle-point) system
  ConstraintBasis basis;
};

/// Householder prolongation as a sparse 3N x 2N matrix.
inline Eigen::SparseMatrix<double> prolongation_matrix(const HouseholderFrame& frame) {
  const auto n = static_cast<Eigen::Index>(frame.size());
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(6 * n));
  for (Eigen::Index z = 0; z < n; ++z)
    for (int p = 0; p < 3; ++p)
      for (int j = 0; j < 2; ++j) triplets.emplace_back(3 * z + p, 2 * z + j, frame.Q[z](p, j));
  Eigen::SparseMatrix<double> P(3 * n, 2 * n);
  P.setFromTriplets(triplets.begin(), triplets.end());
  return P;
}

/// Tangential update: find w in K_h[u] with a_h(w, v) = a_h(u, v) for all tangent v, solved in
/// Householder coordinates, with Lagrange-multiplier rows int w . b = 0 for each b in the
/// constraint basis when uniqueness constraints are enabled.
inline TangentSolveResult solve_tangent_update(const Mesh& mesh, const SparseSystem& a, const NodalVectorField& u,
                                               const ModelParams& params, const SolverConfig& cfg = {}) {
  if (!u.lives_on(mesh)) throw Error("solve_tangent_update: field does not live on the mesh");
  const HouseholderFrame frame = householder_frame(u);  // throws on non-unit nodes
  const Eigen::SparseMatrix<double> P = prolongation_matrix(frame);
  const Eigen::SparseMatrix<double> AP = a.matrix * P;
  const Eigen::SparseMatrix<double> reduced = Eigen::SparseMatrix<double>(P.transpose()) * AP;
  const Eigen::VectorXd rhs_reduced = P.transpose() * (a.matrix * u.flat());

  TangentSolveResult result;
  if (cfg.uniqueness_constraints) result.basis = detect_constraints(u, params);
  const auto n2 = reduced.rows();
  const auto m = static_cast<Eigen::Index>(result.basis.m());
  const auto& weights = mesh.lumped_weights();

  Eigen::MatrixXd C(m, n2);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index z = 0; z < n2 / 2; ++z)
      for (int j = 0; j < 2; ++j) C(i, 2 * z + j) = weights[z] * frame.Q[z].col(j).dot(result.basis.vectors[i]);

  Eigen::VectorXd diag = reduced.diagonal();
  for (Eigen::Index k = 0; k < n2; ++k)
    if (!(diag[k] > 0.0)) diag[k] = 1.0;
  Eigen::VectorXd inv_diag(n2 + m);
  inv_diag.head(n2) = diag.cwiseInverse();
  for (Eigen::Index i = 0; i < m; ++i) {
    const double schur = (C.row(i).array().square() / diag.transpose().array()).sum();
    inv_diag[n2 + i] = schur > 0.0 ? 1.0 / schur : 1.0;
  }

  auto apply = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd y(n2 + m);
    y.head(n2) = reduced * x.head(n2);
    if (m > 0) {
      y.head(n2) += C.transpose() * x.tail(m);
      y.tail(m) = C * x.head(n2);
    }
    return y;
  };
  auto precondition = [&](const Eigen::VectorXd& r) -> Eigen::VectorXd { return inv_diag.cwiseProduct(r); };

  Eigen::VectorXd b = Eigen::VectorXd::Zero(n2 + m);
  b.head(n2) = rhs_reduced;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n2 + m);
  if (cfg.initial_guess_seed) {
    std::mt19937_64 rng(*cfg.initial_guess_seed);
    std::normal_distribution<double> normal;
    for (Eigen::Index k = 0; k < x.size(); ++k) x[k] = normal(rng);
  }
  const std::size_t max_iters = cfg.max_iters ? cfg.max_iters : static_cast<std::size_t>(10 * (n2 + m));
  const KrylovResult kr = minres(apply, precondition, b, x, cfg.rtol, max_iters);
  result.iterations = kr.iterations;
  result.residual = (b - apply(x)).norm();
  if (!kr.converged)
    throw SolverError("tangent solve did not converge in " + std::to_string(kr.iterations) + " iterations", result.residual,
                      kr.iterations);

  std::vector<Vec2> w_hat(static_cast<std::size_t>(n2 / 2));
  for (std::size_t z = 0; z < w_hat.size(); ++z) w_hat[z] = x.segment<2>(static_cast<Eigen::Index>(2 * z));
  result.w = prolong(frame, mesh, w_hat);
  result.lambda = x.tail(m);
  for (std::size_t z = 0; z < u.size(); ++z)
    if (std::abs(result.w[z].dot(u[z])) > 1e-10 * std::max(1.0, result.w[z].norm()))
      throw ConstraintViolation(z, "internal error: tangential update is not tangent");
  return result;
}

inline TangentSolveResult solve_tangent_update(const Mesh& mesh, const NodalVectorField& u, const ModelParams& params,
                                               const SolverConfig& cfg = {}) {
  return solve_tangent_update(mesh, assemble_a(mesh, params), u, params, cfg);
}

}  // namespace helimin
