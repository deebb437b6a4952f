#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cstdint>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <iomanip>
#include <mutex>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "helimin/assembly.hpp"
#include "helimin/fields.hpp"
#include "helimin/mesh.hpp"
#include "helimin/minimizer.hpp"
#include "helimin/vtk.hpp"

namespace helimin {

// ---------------------------------------------------------------------------------------------
// Physical parameters and scaling

/// SI material constants of a thin ferromagnetic film.
struct MaterialParams {
  double A = 0.0;    // exchange constant [J/m]
  double K = 0.0;    // anisotropy constant [J/m^3]
  double Ms = 0.0;   // saturation magnetization [A/m]
  double mu0 = 4.0e-7 * std::numbers::pi;  // vacuum permeability [H/m]
  double D = 0.0;    // anti-symmetric exchange strength [J/m^2]

  static MaterialParams cobalt(double D = 0.0) { return {1.5e-11, 8e5, 5.8e5, 4.0e-7 * std::numbers::pi, D}; }
};

struct DimensionlessSetup {
  double ell_ex = 0.0;  // exchange length [m]
  double kappa = 0.0;
  double gamma = 0.0;
  double disk_radius = 0.0;  // in units of ell_ex

  ModelParams params() const { return {kappa, gamma}; }
};

/// Lengths are measured in exchange lengths sqrt(2A / (mu0 Ms^2)); the thin-film energy then has
/// kappa = D / (mu0 Ms^2 ell_ex) and gamma = 1 - 2K / (mu0 Ms^2) - kappa^2.
inline DimensionlessSetup nondimensionalize(const MaterialParams& mat, double disk_diameter) {
  if (!(mat.A > 0 && mat.K > 0 && mat.Ms > 0 && mat.mu0 > 0 && disk_diameter > 0))
    throw Error("nondimensionalize: A, K, Ms, mu0 and the diameter must be positive");
  const double Kd = mat.mu0 * mat.Ms * mat.Ms;
  DimensionlessSetup s;
  s.ell_ex = std::sqrt(2.0 * mat.A / Kd);
  s.kappa = mat.D / (Kd * s.ell_ex);
  s.gamma = 1.0 - 2.0 * mat.K / Kd - s.kappa * s.kappa;
  s.disk_radius = 0.5 * disk_diameter / s.ell_ex;
  return s;
}

// ---------------------------------------------------------------------------------------------
// Initial conditions

inline NodalVectorField initial_constant(const Mesh& mesh) { return NodalVectorField(mesh, unit_vector(2)); }

/// Independent uniformly distributed unit vectors per node.
inline NodalVectorField initial_random(const Mesh& mesh, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  NodalVectorField u(mesh, unit_vector(2));
  for (std::size_t z = 0; z < u.size(); ++z) {
    Vec3 v;
    do v = Vec3(normal(rng), normal(rng), normal(rng));
    while (v.norm() < 1e-6);
    u[z] = v.normalized();
  }
  return u;
}

/// -e3 for r < r0 - eps, +e3 for r > r0 + eps; in between -e3 is rotated about the radial axis by
/// theta = pi (r - (r0 - eps)) / (2 eps), which gives a Bloch-type wall.
inline Vec3 skyrmion_profile(const Vec2& x, double r0, double eps) {
  const double r = x.norm();
  if (r <= r0 - eps) return -unit_vector(2);
  if (r >= r0 + eps) return unit_vector(2);
  const double theta = std::numbers::pi * (r - (r0 - eps)) / (2.0 * eps);
  const Vec3 azimuthal(-x.y() / r, x.x() / r, 0.0);
  return -std::cos(theta) * unit_vector(2) + std::sin(theta) * azimuthal;
}

inline NodalVectorField initial_skyrmion(const Mesh& mesh, double r0, double eps) {
  double rmax = 0.0;
  for (const auto& p : mesh.nodes()) rmax = std::max(rmax, p.norm());
  if (!(eps > 0.0) || r0 - eps <= 0.0 || r0 + eps >= rmax)
    throw Error("initial_skyrmion: transition layer [r0 - eps, r0 + eps] must lie inside the domain");
  NodalVectorField u = nodal_interpolate([&](const Vec2& x) { return skyrmion_profile(x, r0, eps); }, mesh);
  return nodal_project(u);
}

// ---------------------------------------------------------------------------------------------
// Counterexamples on the unit triangle conv{(0,0), (1,0), (0,1)}

inline Mesh unit_triangle_mesh() { return Mesh({Vec2(0, 0), Vec2(1, 0), Vec2(0, 1)}, {Triangle{0, 1, 2}}); }

struct AnisotropyCounterexample {
  double eps = 0.0;
  double norm_before_sq = 0.0;  // ||v_h . e3||^2
  double norm_after_sq = 0.0;   // ||Pi_h v_h . e3||^2
  double closed_before = 0.0;   // (12 - 8 eps + 4 eps^2) / 48
  double closed_after = 0.0;    // (12 - 4 eps + eps^2) / 48
  bool in_range = true;         // 0 < eps < 4/3

  bool matches_closed_forms(double tol = 1e-13) const {
    return std::abs(norm_before_sq - closed_before) <= tol && std::abs(norm_after_sq - closed_after) <= tol;
  }
};

/// Without mass lumping the nodal projection can increase the anisotropy energy: the field
/// (delta, delta, -eps)(1 - x - y) + e3 x + e3 y with delta = sqrt(2 - eps^2 / 2) has |v(0,0)| = 2.
inline AnisotropyCounterexample counterexample_projection_aniso(double eps) {
  AnisotropyCounterexample r;
  r.eps = eps;
  r.in_range = eps > 0.0 && eps < 4.0 / 3.0;
  if (!(eps * eps <= 4.0)) throw Error("projection counterexample needs |eps| <= 2");
  const double delta = std::sqrt(2.0 - eps * eps / 2.0);
  const Mesh mesh = unit_triangle_mesh();
  const NodalVectorField v(mesh, {Vec3(delta, delta, -eps), unit_vector(2), unit_vector(2)});
  r.norm_before_sq = component_l2_norm_sq(v, mesh, 2);
  r.norm_after_sq = component_l2_norm_sq(nodal_project(v), mesh, 2);
  r.closed_before = (12.0 - 8.0 * eps + 4.0 * eps * eps) / 48.0;
  r.closed_after = (12.0 - 4.0 * eps + eps * eps) / 48.0;
  return r;
}

/// Nodal values for which nodal projection increases J_h at some kappa != 0.
inline constexpr std::array<std::array<double, 3>, 3> helical_counterexample_vectors{{
    {0.44353334, 0.86741656, 0.22558999},
    {0.46138525, 0.63580881, 0.61893662},
    {0.5304891, 0.66534908, -0.52526736},
}};

/// J_h(Pi_h v_h) - J_h(v_h) for v_h = (1 - x - y) a + x b + y c on the unit triangle.
inline double counterexample_helical(const Vec3& a, const Vec3& b, const Vec3& c, const ModelParams& params) {
  if (!(a.norm() > 1.0 && b.norm() > 1.0 && c.norm() > 1.0))
    throw Error("counterexample_helical: nodal values must have norm > 1");
  const Mesh mesh = unit_triangle_mesh();
  const NodalVectorField v(mesh, {a, b, c});
  return energy_Jh(nodal_project(v), mesh, params).total_J - energy_Jh(v, mesh, params).total_J;
}

struct HelicalScanEntry {
  double kappa = 0.0;
  double gamma = 0.0;
  double delta = 0.0;
};

inline std::vector<HelicalScanEntry> helical_scan(const Vec3& a, const Vec3& b, const Vec3& c,
                                                  const std::vector<double>& kappas, const std::vector<double>& gammas) {
  std::vector<HelicalScanEntry> out;
  for (double k : kappas)
    for (double g : gammas) out.push_back({k, g, counterexample_helical(a, b, c, {k, g})});
  return out;
}

// ---------------------------------------------------------------------------------------------
// State classification on disks

enum class StateClass { Uniform, Skyrmion, TargetSkyrmion, HorseshoeOther };

inline const char* to_string(StateClass s) {
  switch (s) {
    case StateClass::Uniform: return "uniform";
    case StateClass::Skyrmion: return "skyrmion";
    case StateClass::TargetSkyrmion: return "target-skyrmion";
    case StateClass::HorseshoeOther: return "horseshoe/other";
  }
  return "?";
}

struct StateReport {
  StateClass state = StateClass::HorseshoeOther;
  double min_u3 = 0.0;
  double max_u3 = 0.0;
  double interior_worst = 0.0;  // min of s*u3 over nodes at least `edge_band` away from the boundary
  std::vector<int> ray_sign_changes;
};

namespace detail {

/// Barycentric coordinates of x in triangle t, or nullopt when outside.
inline std::optional<Vec3> locate(const Mesh& mesh, std::size_t t, const Vec2& x) {
  const auto v = mesh.vertices(t);
  const double area = signed_area(v[0], v[1], v[2]);
  const Vec3 l(signed_area(x, v[1], v[2]) / area, signed_area(v[0], x, v[2]) / area, signed_area(v[0], v[1], x) / area);
  if (l.minCoeff() < -1e-12) return std::nullopt;
  return l;
}

inline int count_sign_changes(const std::vector<double>& samples, double threshold) {
  int changes = 0, state = 0;
  for (double s : samples) {
    const int sgn = s > threshold ? 1 : (s < -threshold ? -1 : 0);
    if (sgn == 0) continue;
    if (state != 0 && sgn != state) ++changes;
    state = sgn;
  }
  return changes;
}

}  // namespace detail

/// Classification of a relaxed disk state from the out-of-plane component u3, with s the sign of
/// the mean of u3:
///   uniform          s*u3 > 0 at every node and s*u3 > 0.8 away from a boundary band of width
///                    `edge_band` (the anti-symmetric exchange cants the boundary layer)
///   skyrmion         u3 changes sign exactly once along every ray from the centre
///   target-skyrmion  at least two sign changes along every ray
///   horseshoe/other  anything else
inline StateReport classify_state(const Mesh& mesh, const NodalVectorField& u, int rays = 64, double edge_band = 1.0) {
  StateReport rep;
  double mean = 0.0;
  rep.min_u3 = std::numeric_limits<double>::infinity();
  rep.max_u3 = -std::numeric_limits<double>::infinity();
  const auto& w = mesh.lumped_weights();
  for (std::size_t z = 0; z < u.size(); ++z) {
    rep.min_u3 = std::min(rep.min_u3, u[z].z());
    rep.max_u3 = std::max(rep.max_u3, u[z].z());
    mean += w[z] * u[z].z();
  }
  const double s = mean >= 0.0 ? 1.0 : -1.0;
  const double worst = s > 0 ? rep.min_u3 : -rep.max_u3;
  const auto mask = mesh.boundary_node_mask();
  std::vector<Vec2> boundary;
  for (std::size_t z = 0; z < mask.size(); ++z)
    if (mask[z]) boundary.push_back(mesh.node(z));
  rep.interior_worst = std::numeric_limits<double>::infinity();
  for (std::size_t z = 0; z < u.size(); ++z) {
    double dist = std::numeric_limits<double>::infinity();
    for (const auto& b : boundary) dist = std::min(dist, (mesh.node(z) - b).norm());
    if (dist >= edge_band) rep.interior_worst = std::min(rep.interior_worst, s * u[z].z());
  }

  // Sample rays from the centre through the domain (kept inside the boundary polygon).
  double radius = std::numeric_limits<double>::infinity();
  for (const auto& e : mesh.boundary_edges())
    radius = std::min(radius, (0.5 * (mesh.node(e[0]) + mesh.node(e[1]))).norm());
  const int samples = std::max(32, static_cast<int>(8.0 * radius / std::max(1e-12, mesh.max_edge_length())));
  for (int k = 0; k < rays; ++k) {
    const double phi = 2.0 * std::numbers::pi * (k + 0.5) / rays;
    const Vec2 dir(std::cos(phi), std::sin(phi));
    std::vector<double> values;
    std::size_t hint = 0;
    for (int i = 0; i <= samples; ++i) {
      const Vec2 x = (0.999 * radius * i / samples) * dir;
      std::optional<Vec3> bary;
      std::size_t found = 0;
      for (std::size_t j = 0; j < mesh.num_triangles() && !bary; ++j) {
        found = (hint + j) % mesh.num_triangles();
        bary = detail::locate(mesh, found, x);
      }
      if (!bary) continue;
      hint = found;
      values.push_back(evaluate(u, mesh, found, *bary).z());
    }
    rep.ray_sign_changes.push_back(detail::count_sign_changes(values, 0.05));
  }

  const auto& c = rep.ray_sign_changes;
  if (worst > 0.0 && rep.interior_worst > 0.8) {
    rep.state = StateClass::Uniform;
  } else if (std::all_of(c.begin(), c.end(), [](int n) { return n == 1; })) {
    rep.state = StateClass::Skyrmion;
  } else if (std::all_of(c.begin(), c.end(), [](int n) { return n >= 2; })) {
    rep.state = StateClass::TargetSkyrmion;
  } else {
    rep.state = StateClass::HorseshoeOther;
  }
  return rep;
}

// ---------------------------------------------------------------------------------------------
// Sweep over the anti-symmetric exchange strength on a disk

enum class InitialCondition { Constant, Skyrmion };

inline const char* to_string(InitialCondition ic) { return ic == InitialCondition::Constant ? "constant" : "skyrmion"; }

struct SweepConfig {
  MaterialParams material = MaterialParams::cobalt();
  std::vector<double> D_values{0, 1e-3, 2e-3, 3e-3, 4e-3, 5e-3, 6e-3, 7e-3, 8e-3};
  std::vector<InitialCondition> ics{InitialCondition::Constant, InitialCondition::Skyrmion};
  double disk_diameter = 80e-9;
  double skyrmion_radius = 15e-9;
  double transition_layer = 2e-9;
  double perturbation_eps = 0.1;  // divergent perturbation used for D = 0 with the skyrmion start
  double h = 0.25;                // dimensionless mesh width
  MinimizeConfig minimize;        // params are overwritten per run
  std::optional<std::filesystem::path> out_dir;
  unsigned jobs = 0;              // 0 selects hardware concurrency
};

struct SweepResult {
  double D = 0.0;
  InitialCondition ic = InitialCondition::Constant;
  DimensionlessSetup setup;
  StateReport report;
  NodalVectorField field;
  MinimizeTrace trace;
};

inline std::string sweep_tag(double D, InitialCondition ic) {
  std::ostringstream ss;
  const double k = D * 1e3;
  if (std::abs(k - std::round(k)) < 1e-9)
    ss << "D" << static_cast<long long>(std::llround(k));
  else
    ss << "D" << k;
  ss << '_' << to_string(ic);
  return ss.str();
}

inline SweepResult run_sweep_case(const Mesh& mesh, const SweepConfig& cfg, double D, InitialCondition ic) {
  MaterialParams mat = cfg.material;
  mat.D = D;
  SweepResult res;
  res.D = D;
  res.ic = ic;
  res.setup = nondimensionalize(mat, cfg.disk_diameter);
  const double r0 = cfg.skyrmion_radius / res.setup.ell_ex;
  const double layer = cfg.transition_layer / res.setup.ell_ex;
  NodalVectorField u0 = ic == InitialCondition::Constant ? initial_constant(mesh) : initial_skyrmion(mesh, r0, layer);
  if (ic == InitialCondition::Skyrmion && D == 0.0)
    u0 = perturb_divergent(u0, mesh, cfg.perturbation_eps, [&](const Vec2& x) { return x.norm() < r0 - layer; });
  MinimizeConfig mc = cfg.minimize;
  mc.params = res.setup.params();
  MinimizeResult mr = minimize(mesh, u0, mc);
  res.report = classify_state(mesh, mr.u);
  res.field = std::move(mr.u);
  res.trace = std::move(mr.trace);
  return res;
}

inline void write_sweep_outputs(const std::filesystem::path& dir, const Mesh& mesh, const SweepResult& r) {
  const std::string tag = sweep_tag(r.D, r.ic);
  save_field(r.field, (dir / (tag + ".field")).string());
  std::ofstream csv(dir / (tag + ".trace.csv"));
  write_trace_csv(csv, r.trace);
  export_vtk(mesh, r.field, (dir / (tag + ".vtk")).string());
}

/// Runs every (D, initial condition) pair on one disk mesh; independent runs use a job pool.
inline std::vector<SweepResult> run_dsweep(const SweepConfig& cfg) {
  const DimensionlessSetup base = nondimensionalize(cfg.material, cfg.disk_diameter);
  const Mesh mesh = generate_disk(base.disk_radius, cfg.h);
  std::vector<std::pair<double, InitialCondition>> cases;
  for (double D : cfg.D_values)
    for (auto ic : cfg.ics) cases.emplace_back(D, ic);

  std::vector<SweepResult> results(cases.size());
  if (cfg.out_dir) {
    std::filesystem::create_directories(*cfg.out_dir);
    save_mesh(mesh, (*cfg.out_dir / "disk.msh").string());
  }
  const unsigned jobs = std::max(1u, cfg.jobs ? cfg.jobs : std::thread::hardware_concurrency());
  std::atomic<std::size_t> next{0};
  std::mutex io;
  auto worker = [&] {
    for (std::size_t k = next++; k < cases.size(); k = next++) {
      results[k] = run_sweep_case(mesh, cfg, cases[k].first, cases[k].second);
      if (cfg.out_dir) {
        std::lock_guard lock(io);
        write_sweep_outputs(*cfg.out_dir, mesh, results[k]);
      }
    }
  };
  std::vector<std::future<void>> pool;
  for (unsigned j = 0; j < std::min<std::size_t>(jobs, cases.size()); ++j) pool.push_back(std::async(std::launch::async, worker));
  for (auto& f : pool) f.get();

  if (cfg.out_dir) {
    std::ofstream summary(*cfg.out_dir / "summary.csv");
    summary << "D,ic,classification,final_J,iterations\n";
    for (const auto& r : results)
      summary << std::setprecision(6) << r.D << ',' << to_string(r.ic) << ',' << to_string(r.report.state) << ','
              << std::setprecision(17) << r.trace.final_J << ',' << r.trace.iterations << '\n';
  }
  return results;
}

}  // namespace helimin
