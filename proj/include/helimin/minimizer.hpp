#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "helimin/assembly.hpp"
#include "helimin/fields.hpp"
#include "helimin/mesh.hpp"
#include "helimin/tangent_solver.hpp"

namespace helimin {

struct MinimizeConfig {
  double tol = 1e-8;                  // stop once J_h(w) <= tol
  std::size_t max_outer = 100000;
  ModelParams params;
  SolverConfig solver;
  std::size_t log_every = 25;         // cadence of the Euler-Lagrange residual diagnostic; 0 disables
  double increase_slack = 1e-12;
};

struct TraceRow {
  std::size_t n = 0;
  double J_u = 0.0;                   // J_h(u^n)
  double J_w = 0.0;                   // J_h(w^n)
  double J_u_minus_w = 0.0;           // J_h(u^n - w^n)
  double el_residual = std::numeric_limits<double>::quiet_NaN();
  bool energy_increase = false;       // J_h(u^n) > J_h(u^{n-1}) + slack
  std::size_t krylov_iterations = 0;
  double wall_seconds = 0.0;
};

enum class Termination { Tolerance, MaxOuter };

struct MinimizeTrace {
  std::vector<TraceRow> rows;
  std::size_t iterations = 0;         // index n of the returned iterate
  Termination reason = Termination::MaxOuter;
  bool angle_condition = true;        // audit status of the mesh
  std::size_t energy_increases = 0;
  double final_J = 0.0;
  double final_el_residual = std::numeric_limits<double>::quiet_NaN();
};

struct MinimizeResult {
  NodalVectorField u;
  MinimizeTrace trace;

  bool converged() const noexcept { return trace.reason == Termination::Tolerance; }
};

/// Tangent-plane energy minimization: at each step solve for the tangential update w^n, stop when
/// J_h(w^n) <= tol, otherwise continue from the nodal projection of u^n - w^n.
inline MinimizeResult minimize(const Mesh& mesh, const NodalVectorField& u0, const MinimizeConfig& cfg,
                               const std::function<void(const TraceRow&)>& on_step = {}) {
  if (!(cfg.tol > 0.0) || cfg.max_outer < 1) throw Error("minimize: needs tol > 0 and max_outer >= 1");
  if (!u0.lives_on(mesh)) throw Error("minimize: initial field does not live on the mesh");
  if (classify(u0).kind != ConstraintKind::InMh) throw Error("minimize: initial field must have unit nodal values");

  const SparseSystem a = assemble_a(mesh, cfg.params);
  MinimizeResult out{u0, {}};
  MinimizeTrace& trace = out.trace;
  trace.angle_condition = mesh.angle_report().satisfied;

  NodalVectorField u = u0;
  double J_prev = std::numeric_limits<double>::infinity();
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t n = 0;; ++n) {
    TraceRow row;
    row.n = n;
    row.J_u = quadratic_energy(a, u);
    row.energy_increase = n > 0 && row.J_u > J_prev + cfg.increase_slack;
    if (row.energy_increase) ++trace.energy_increases;
    J_prev = row.J_u;

    const TangentSolveResult step = solve_tangent_update(mesh, a, u, cfg.params, cfg.solver);
    row.J_w = quadratic_energy(a, step.w);
    const NodalVectorField shifted = u - step.w;
    row.J_u_minus_w = quadratic_energy(a, shifted);
    row.krylov_iterations = step.iterations;

    const bool done = row.J_w <= cfg.tol;
    const bool capped = !done && n + 1 >= cfg.max_outer;
    if (done || capped || (cfg.log_every > 0 && n % cfg.log_every == 0)) row.el_residual = el_residual(u, mesh, cfg.params);
    row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    trace.rows.push_back(row);
    if (on_step) on_step(row);

    if (done || capped) {
      trace.iterations = n;
      trace.reason = done ? Termination::Tolerance : Termination::MaxOuter;
      trace.final_J = row.J_u;
      trace.final_el_residual = row.el_residual;
      out.u = std::move(u);
      return out;
    }
    // |u(z) - w(z)|^2 = 1 + |w(z)|^2 since w(z) is orthogonal to u(z).
    if (!is_at_least_unit(shifted)) throw Error("minimize: internal error, u - w left M_h^+");
    u = nodal_project(shifted);
  }
}

inline const char* to_string(Termination t) { return t == Termination::Tolerance ? "tolerance" : "max_outer"; }

/// CSV with columns n,J_u,J_w,el_residual,energy_increase; residual is empty when not evaluated.
inline void write_trace_csv(std::ostream& out, const MinimizeTrace& trace) {
  out << "n,J_u,J_w,el_residual,energy_increase\n";
  out.precision(17);
  for (const auto& r : trace.rows) {
    out << r.n << ',' << r.J_u << ',' << r.J_w << ',';
    if (!std::isnan(r.el_residual)) out << r.el_residual;
    out << ',' << (r.energy_increase ? 1 : 0) << '\n';
  }
}

/// Replace nodes inside `region` by normalize(eps (x, y, 0) - e3).
template <class Region>
NodalVectorField perturb_divergent(const NodalVectorField& u, const Mesh& mesh, double eps, Region&& region) {
  if (!u.lives_on(mesh)) throw Error("perturb_divergent: field does not live on the mesh");
  NodalVectorField out = u;
  for (std::size_t z = 0; z < mesh.num_nodes(); ++z) {
    const Vec2& x = mesh.node(z);
    if (region(x)) out[z] = Vec3(eps * x.x(), eps * x.y(), -1.0).normalized();
  }
  return out;
}

}  // namespace helimin
