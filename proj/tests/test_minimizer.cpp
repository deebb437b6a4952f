#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "test_util.hpp"

using namespace helimin;
using helimin::testing::random_unit_field;

namespace {

MinimizeConfig config(double kappa, double gamma, double tol = 1e-8) {
  MinimizeConfig cfg;
  cfg.params = {kappa, gamma};
  cfg.tol = tol;
  return cfg;
}

}  // namespace

TEST(Minimize, CriticalE1StopsImmediately) {
  const Mesh m = generate_structured_square(8);
  const NodalVectorField u0(m, unit_vector(0));
  const auto r = minimize(m, u0, config(0.0, 1.0, 1e-10));
  EXPECT_TRUE(r.converged());
  EXPECT_EQ(r.trace.iterations, 0u);
  EXPECT_EQ(r.u.max_abs_diff(u0), 0.0);
  EXPECT_EQ(r.trace.rows.size(), 1u);
  EXPECT_LE(r.trace.rows[0].J_w, 1e-20);
}

TEST(Minimize, MetastableE3StopsImmediately) {
  const Mesh m = generate_structured_square(8);
  const auto r = minimize(m, NodalVectorField(m, unit_vector(2)), config(0.0, 1.0));
  EXPECT_TRUE(r.converged());
  EXPECT_EQ(r.trace.iterations, 0u);
  EXPECT_NEAR(r.trace.final_J, 0.5, 1e-14);
}

TEST(Minimize, RandomStartOnSquareFixture) {
  std::mt19937_64 rng(41);
  const Mesh m = generate_structured_square(4);
  const NodalVectorField u0 = random_unit_field(m, rng);
  const auto cfg = config(0.0, -1.0);
  const auto r = minimize(m, u0, cfg);
  ASSERT_TRUE(r.converged());
  EXPECT_TRUE(r.trace.angle_condition);
  EXPECT_EQ(r.trace.energy_increases, 0u);
  for (std::size_t k = 1; k < r.trace.rows.size(); ++k) EXPECT_LE(r.trace.rows[k].J_u, r.trace.rows[k - 1].J_u + 1e-12);
  EXPECT_LE(r.trace.final_J, r.trace.rows.front().J_u);
  EXPECT_LT(r.trace.final_el_residual, 100 * cfg.tol);
  EXPECT_LE(r.trace.rows.back().J_w, cfg.tol);
  EXPECT_EQ(classify(r.u).kind, ConstraintKind::InMh);
  std::cout << "square n=4, gamma=-1: " << r.trace.iterations << " iterations, J_h " << r.trace.final_J << ", EL residual "
            << r.trace.final_el_residual << '\n';
}

TEST(Minimize, ProjectionNeverIncreasesEnergyForKappaZero) {
  std::mt19937_64 rng(42);
  const Mesh m = generate_structured_square(8);
  for (double gamma : {-1.0, 0.0, 1.3}) {
    const auto r = minimize(m, random_unit_field(m, rng), config(0.0, gamma));
    ASSERT_TRUE(r.converged());
    for (std::size_t k = 0; k + 1 < r.trace.rows.size(); ++k) {
      const auto& row = r.trace.rows[k];
      EXPECT_NEAR(row.J_u_minus_w, row.J_u - row.J_w, 1e-10 * std::max(1.0, row.J_u));
      EXPECT_LE(r.trace.rows[k + 1].J_u, row.J_u_minus_w + 1e-12);
    }
  }
}

TEST(Minimize, HelicalRunsFlagIncreasesWithoutAborting) {
  std::mt19937_64 rng(43);
  const Mesh m = generate_structured_square(6);
  const auto r = minimize(m, random_unit_field(m, rng), config(1.5, 0.5));
  EXPECT_TRUE(r.converged());
  std::size_t flagged = 0;
  for (const auto& row : r.trace.rows) flagged += row.energy_increase;
  EXPECT_EQ(flagged, r.trace.energy_increases);
}

TEST(Minimize, MaxOuterReported) {
  std::mt19937_64 rng(44);
  const Mesh m = generate_structured_square(6);
  auto cfg = config(0.0, 1.0, 1e-14);
  cfg.max_outer = 2;
  const auto r = minimize(m, random_unit_field(m, rng), cfg);
  EXPECT_FALSE(r.converged());
  EXPECT_EQ(r.trace.reason, Termination::MaxOuter);
  EXPECT_EQ(r.trace.rows.size(), 2u);
  EXPECT_FALSE(std::isnan(r.trace.final_el_residual));
  EXPECT_EQ(classify(r.u).kind, ConstraintKind::InMh);
}

TEST(Minimize, ResidualCadence) {
  std::mt19937_64 rng(45);
  const Mesh m = generate_structured_square(6);
  auto cfg = config(0.0, 1.0);
  cfg.log_every = 2;
  const auto r = minimize(m, random_unit_field(m, rng), cfg);
  for (const auto& row : r.trace.rows) {
    const bool expected = row.n % 2 == 0 || row.n == r.trace.iterations;
    EXPECT_EQ(!std::isnan(row.el_residual), expected) << "n=" << row.n;
  }
}

TEST(Minimize, RecordsAngleConditionStatus) {
  std::mt19937_64 rng(46);
  Mesh bad({Vec2(0, 0), Vec2(2, 0), Vec2(3, 2), Vec2(1, 2)}, {Triangle{0, 1, 2}, Triangle{0, 2, 3}});
  const auto r = minimize(bad, random_unit_field(bad, rng), config(0.0, 0.0));
  EXPECT_FALSE(r.trace.angle_condition);
}

TEST(Minimize, InputValidation) {
  const Mesh m = generate_structured_square(2), other = generate_structured_square(2);
  EXPECT_THROW(minimize(m, NodalVectorField(m, Vec3(2, 0, 0)), config(0.0, 1.0)), Error);
  EXPECT_THROW(minimize(m, NodalVectorField(other, unit_vector(2)), config(0.0, 1.0)), Error);
  EXPECT_THROW(minimize(m, NodalVectorField(m, unit_vector(2)), config(0.0, 1.0, 0.0)), Error);
  auto cfg = config(0.0, 1.0);
  cfg.max_outer = 0;
  EXPECT_THROW(minimize(m, NodalVectorField(m, unit_vector(2)), cfg), Error);
}

TEST(Minimize, CallbackSeesEveryRow) {
  std::mt19937_64 rng(47);
  const Mesh m = generate_structured_square(4);
  std::size_t calls = 0;
  const auto r = minimize(m, random_unit_field(m, rng), config(0.0, 1.0), [&](const TraceRow& row) {
    EXPECT_EQ(row.n, calls);
    ++calls;
  });
  EXPECT_EQ(calls, r.trace.rows.size());
}

TEST(TraceCsv, HeaderAndRows) {
  std::mt19937_64 rng(48);
  const Mesh m = generate_structured_square(4);
  auto cfg = config(0.0, 1.0);
  cfg.log_every = 0;
  const auto r = minimize(m, random_unit_field(m, rng), cfg);
  std::stringstream ss;
  write_trace_csv(ss, r.trace);
  std::string line;
  std::getline(ss, line);
  EXPECT_EQ(line, "n,J_u,J_w,el_residual,energy_increase");
  std::size_t rows = 0;
  while (std::getline(ss, line)) {
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 4);
    ++rows;
  }
  EXPECT_EQ(rows, r.trace.rows.size());
}

TEST(PerturbDivergent, Examples) {
  const Mesh m({Vec2(0, 0), Vec2(1, 0), Vec2(0, 1), Vec2(3, 3)}, {Triangle{0, 1, 2}, Triangle{1, 3, 2}});
  const NodalVectorField u(m, unit_vector(2));
  auto inside = [](const Vec2& x) { return x.norm() < 2.0; };
  const auto p = perturb_divergent(u, m, 0.1, inside);
  EXPECT_EQ(p[0], -unit_vector(2));
  EXPECT_LE((p[1] - Vec3(0.1, 0, -1).normalized()).norm(), 1e-15);
  EXPECT_EQ(p[3], unit_vector(2));
  EXPECT_EQ(classify(p).kind, ConstraintKind::InMh);
  const auto tiny = perturb_divergent(u, m, 1e-12, inside);
  EXPECT_LE((tiny[1] + unit_vector(2)).norm(), 1e-11);
}
