#include <gtest/gtest.h>

#include <future>

#include <Eigen/LU>
#include <Eigen/SVD>

#include "test_util.hpp"

using namespace helimin;
using helimin::testing::random_tangent;
using helimin::testing::random_unit;
using helimin::testing::dense_oracle;
using helimin::testing::random_unit_field;

namespace {

std::vector<Vec3> spanning_set(const NodalVectorField& u, double gamma) {
  std::vector<Vec3> b(u.values());
  if (gamma > 0) b.push_back(unit_vector(2));
  if (gamma < 0) {
    b.push_back(unit_vector(0));
    b.push_back(unit_vector(1));
  }
  return b;
}

// Rank of the spanning set from singular values, same threshold relative to the largest.
int svd_rank(const std::vector<Vec3>& b) {
  Eigen::MatrixXd M(3, static_cast<Eigen::Index>(b.size()));
  for (std::size_t k = 0; k < b.size(); ++k) M.col(static_cast<Eigen::Index>(k)) = b[k];
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
  const auto s = svd.singularValues();
  int r = 0;
  for (Eigen::Index k = 0; k < s.size(); ++k)
    if (s[k] > constraint_zero_tol * s[0]) ++r;
  return r;
}

}  // namespace

TEST(DetectConstraints, ConstantE1GammaZero) {
  const Mesh m = generate_structured_square(3);
  const auto basis = detect_constraints(NodalVectorField(m, unit_vector(0)), {0.0, 0.0});
  ASSERT_EQ(basis.m(), 2u);
  for (const auto& b : basis.vectors) {
    EXPECT_NEAR(b.norm(), 1.0, 1e-12);
    EXPECT_LE(std::abs(b.dot(unit_vector(0))), 1e-10);
  }
  EXPECT_LE(std::abs(basis.vectors[0].dot(basis.vectors[1])), 1e-12);
}

TEST(DetectConstraints, ConstantE1GammaPositive) {
  const Mesh m = generate_structured_square(3);
  const auto basis = detect_constraints(NodalVectorField(m, unit_vector(0)), {0.0, 0.7});
  ASSERT_EQ(basis.m(), 1u);
  EXPECT_NEAR(std::abs(basis.vectors[0].dot(unit_vector(1))), 1.0, 1e-12);
}

TEST(DetectConstraints, ConstantE1GammaNegative) {
  const Mesh m = generate_structured_square(3);
  const auto basis = detect_constraints(NodalVectorField(m, unit_vector(0)), {0.0, -0.7});
  ASSERT_EQ(basis.m(), 1u);
  EXPECT_NEAR(std::abs(basis.vectors[0].dot(unit_vector(2))), 1.0, 1e-12);
  EXPECT_EQ(detect_constraints(NodalVectorField(m, unit_vector(2)), {0.0, -0.7}).m(), 0u);
}

TEST(DetectConstraints, SkyrmionSpansEverything) {
  const Mesh m = generate_disk(3.0, 0.3);
  EXPECT_EQ(detect_constraints(initial_skyrmion(m, 1.5, 0.4), {0.0, 0.0}).m(), 0u);
}

TEST(DetectConstraints, KappaNonzeroIsEmpty) {
  const Mesh m = generate_structured_square(2);
  const auto basis = detect_constraints(NodalVectorField(m, unit_vector(0)), {0.5, 0.0});
  EXPECT_EQ(basis.m(), 0u);
  EXPECT_EQ(basis.provenance, "kappa-nonzero");
}

TEST(DetectConstraints, AgreesWithSvdRank) {
  std::mt19937_64 rng(31);
  const Mesh m = generate_structured_square(3);
  for (int trial = 0; trial < 300; ++trial) {
    NodalVectorField u(m);
    const int kind = trial % 3;
    const Vec3 a = random_unit(rng), b0 = random_unit(rng);
    const Vec3 b = (b0 - b0.dot(a) * a).normalized();
    std::normal_distribution<double> n;
    for (std::size_t z = 0; z < u.size(); ++z) {
      if (kind == 0) u[z] = n(rng) > 0 ? a : -a;                                   // collinear
      else if (kind == 1) u[z] = (n(rng) * a + n(rng) * b).normalized();           // planar
      else u[z] = random_unit(rng);                                                // generic
    }
    for (double gamma : {-1.0, 0.0, 1.0}) {
      const auto basis = detect_constraints(u, {0.0, gamma});
      const auto span = spanning_set(u, gamma);
      EXPECT_EQ(static_cast<int>(basis.m()), 3 - svd_rank(span)) << "kind " << kind << " gamma " << gamma;
      for (const auto& v : basis.vectors)
        for (const auto& s : span) EXPECT_LE(std::abs(v.dot(s)), 1e-10);
      for (std::size_t i = 0; i < basis.m(); ++i)
        for (std::size_t j = 0; j < basis.m(); ++j)
          EXPECT_NEAR(basis.vectors[i].dot(basis.vectors[j]), i == j ? 1.0 : 0.0, 1e-12);
    }
  }
}

TEST(TangentSolve, CriticalPointGivesZero) {
  const Mesh m = generate_structured_square(4);
  const auto r = solve_tangent_update(m, NodalVectorField(m, unit_vector(2)), {0.0, 1.0});
  EXPECT_EQ(r.basis.m(), 2u);
  EXPECT_LE(r.w.max_abs_diff(NodalVectorField(m)), 1e-14);
  EXPECT_LE(r.lambda.cwiseAbs().maxCoeff(), 1e-14);
}

TEST(TangentSolve, GalerkinIdentity) {
  std::mt19937_64 rng(32);
  std::uniform_real_distribution<double> unif(-2, 2);
  const Mesh m = generate_disk(1.5, 0.3);
  for (int trial = 0; trial < 6; ++trial) {
    const ModelParams p{trial % 2 ? unif(rng) : 0.0, unif(rng)};
    const NodalVectorField u = random_unit_field(m, rng);
    const SparseSystem a = assemble_a(m, p);
    const auto r = solve_tangent_update(m, a, u, p);
    EXPECT_EQ(classify(r.w, &u).kind, ConstraintKind::Tangent);
    const double Anorm = Eigen::MatrixXd(a.matrix).norm();
    for (int k = 0; k < 20; ++k) {
      const NodalVectorField v = random_tangent(u, m, rng);
      const double lhs = bilinear(a.matrix, r.w.flat(), v.flat());
      const double rhs = bilinear(a.matrix, u.flat(), v.flat());
      EXPECT_LE(std::abs(lhs - rhs), 1e-8 * Anorm * v.flat().norm());
    }
  }
}

TEST(TangentSolve, MatchesDenseOracle) {
  std::mt19937_64 rng(33);
  const Mesh m = generate_structured_square(1);
  const NodalVectorField u = random_unit_field(m, rng);
  const ModelParams p{0.7, 1.3};
  const auto r = solve_tangent_update(m, u, p);
  EXPECT_LE(r.w.max_abs_diff(dense_oracle(m, u, p, r.basis)), 1e-8);
}

TEST(TangentSolve, MatchesDenseOracleWithConstraints) {
  std::mt19937_64 rng(34);
  const Mesh m = generate_structured_square(2);
  // Planar nodal values with gamma = 0 leave one constraint direction.
  const Vec3 a = unit_vector(0), b = Vec3(0, 1, 1).normalized();
  NodalVectorField u(m);
  std::normal_distribution<double> n;
  for (std::size_t z = 0; z < u.size(); ++z) u[z] = (n(rng) * a + n(rng) * b).normalized();
  const ModelParams p{0.0, 0.0};
  const auto r = solve_tangent_update(m, u, p);
  ASSERT_EQ(r.basis.m(), 1u);
  EXPECT_LE(r.w.max_abs_diff(dense_oracle(m, u, p, r.basis)), 1e-8);
}

TEST(TangentSolve, UniquenessRestoredByConstraints) {
  const Mesh m = generate_structured_square(3);
  const NodalVectorField u(m, unit_vector(0));
  const ModelParams p{0.0, 0.0};
  SolverConfig free1, free2;
  free1.uniqueness_constraints = free2.uniqueness_constraints = false;
  free1.initial_guess_seed = 1;
  free2.initial_guess_seed = 2;
  const auto w1 = solve_tangent_update(m, u, p, free1).w;
  const auto w2 = solve_tangent_update(m, u, p, free2).w;
  const NodalVectorField d = w1 - w2;
  EXPECT_GT(d.max_abs_diff(NodalVectorField(m)), 1e-3);  // genuinely different
  for (std::size_t z = 0; z < d.size(); ++z) {
    EXPECT_LE((d[z] - d[0]).norm(), 1e-8);  // constant
    EXPECT_LE(std::abs(d[z].dot(unit_vector(0))), 1e-8);  // in span B_perp
  }

  SolverConfig c1 = free1, c2 = free2;
  c1.uniqueness_constraints = c2.uniqueness_constraints = true;
  const auto r1 = solve_tangent_update(m, u, p, c1);
  const auto r2 = solve_tangent_update(m, u, p, c2);
  EXPECT_EQ(r1.basis.m(), 2u);
  EXPECT_LE(r1.w.max_abs_diff(r2.w), 1e-8);
  EXPECT_LE(r1.w.max_abs_diff(NodalVectorField(m)), 1e-8);
  EXPECT_LE(r1.lambda.cwiseAbs().maxCoeff(), 1e-8);
}

TEST(TangentSolve, UniqueForNonzeroKappa) {
  std::mt19937_64 rng(35);
  const Mesh m = generate_structured_square(3);
  const NodalVectorField u = random_unit_field(m, rng);
  SolverConfig c1, c2;
  c1.initial_guess_seed = 1;
  c2.initial_guess_seed = 2;
  const auto r1 = solve_tangent_update(m, u, {0.5, 0.0}, c1);
  const auto r2 = solve_tangent_update(m, u, {0.5, 0.0}, c2);
  EXPECT_EQ(r1.basis.m(), 0u);
  EXPECT_LE(r1.w.max_abs_diff(r2.w), 1e-8);
}

TEST(TangentSolve, EnergySplit) {
  std::mt19937_64 rng(36);
  std::uniform_real_distribution<double> unif(-2, 2);
  const Mesh m = generate_disk(1.5, 0.3);
  for (int trial = 0; trial < 10; ++trial) {
    const ModelParams p{trial % 2 ? unif(rng) : 0.0, unif(rng)};
    const NodalVectorField u = random_unit_field(m, rng);
    const SparseSystem a = assemble_a(m, p);
    const auto r = solve_tangent_update(m, a, u, p);
    const double Ju = quadratic_energy(a, u), Jw = quadratic_energy(a, r.w), Jd = quadratic_energy(a, u - r.w);
    EXPECT_LE(std::abs(Jd + Jw - Ju), 1e-10 * std::max(1.0, Ju));
  }
}

TEST(TangentSolve, ReducedOperatorSemidefinite) {
  std::mt19937_64 rng(37);
  std::uniform_real_distribution<double> unif(-2, 2);
  std::normal_distribution<double> n;
  const Mesh m = generate_structured_square(4);
  for (int trial = 0; trial < 10; ++trial) {
    const ModelParams p{unif(rng), unif(rng)};
    const NodalVectorField u = random_unit_field(m, rng);
    const auto P = prolongation_matrix(householder_frame(u));
    const Eigen::SparseMatrix<double> R = Eigen::SparseMatrix<double>(P.transpose()) * assemble_a(m, p).matrix * P;
    const Eigen::SparseMatrix<double> Rt = R.transpose();
    EXPECT_LE((R - Rt).norm(), 1e-12 * R.norm());
    for (int k = 0; k < 50; ++k) {
      Eigen::VectorXd x(R.rows());
      for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = n(rng);
      EXPECT_GE(x.dot(R * x) / x.squaredNorm(), -1e-12);
    }
  }
}

TEST(TangentSolve, NonConvergenceReported) {
  std::mt19937_64 rng(38);
  const Mesh m = generate_structured_square(4);
  SolverConfig cfg;
  cfg.max_iters = 2;
  try {
    solve_tangent_update(m, random_unit_field(m, rng), {0.3, 1.0}, cfg);
    FAIL();
  } catch (const SolverError& e) {
    EXPECT_EQ(e.iterations(), 2u);
    EXPECT_GT(e.residual(), 0.0);
  }
}

TEST(TangentSolve, RejectsNonUnitInput) {
  const Mesh m = generate_structured_square(2);
  EXPECT_THROW(solve_tangent_update(m, NodalVectorField(m, Vec3(2, 0, 0)), {0.0, 1.0}), ConstraintViolation);
}

TEST(TangentSolve, ConcurrentSolvesAreIndependent) {
  std::mt19937_64 rng(39);
  const Mesh m = generate_disk(1.5, 0.3);
  std::vector<NodalVectorField> inputs;
  for (int k = 0; k < 4; ++k) inputs.push_back(random_unit_field(m, rng));
  std::vector<NodalVectorField> serial;
  for (const auto& u : inputs) serial.push_back(solve_tangent_update(m, u, {0.4, -1.0}).w);
  std::vector<std::future<NodalVectorField>> jobs;
  for (const auto& u : inputs)
    jobs.push_back(std::async(std::launch::async, [&m, &u] { return solve_tangent_update(m, u, {0.4, -1.0}).w; }));
  for (std::size_t k = 0; k < jobs.size(); ++k) EXPECT_EQ(jobs[k].get().max_abs_diff(serial[k]), 0.0);
}
