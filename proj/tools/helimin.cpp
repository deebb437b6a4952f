#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "helimin/helimin.hpp"

namespace fs = std::filesystem;
using namespace helimin;

namespace {

enum Exit { ok = 0, input_error = 1, angle_violation = 2, not_converged = 3, assertion_failed = 4 };

struct MeshSource {
  std::string file;
  int square = 0;
  double disk_radius = 0.0;
  double h = 0.25;

  Mesh build() const {
    if (!file.empty()) return load_mesh(file);
    if (square > 0) return generate_structured_square(square);
    if (disk_radius > 0.0) return generate_disk(disk_radius, h);
    throw Error("no mesh given: use --mesh, --square or --disk");
  }
};

void add_mesh_source(CLI::App* cmd, MeshSource& src) {
  auto* file = cmd->add_option("--mesh", src.file, "Mesh file");
  auto* square = cmd->add_option("--square", src.square, "Structured unit square with n x n cells")->check(CLI::PositiveNumber);
  auto* disk = cmd->add_option("--disk", src.disk_radius, "Disk of this dimensionless radius")->check(CLI::PositiveNumber);
  cmd->add_option("--h", src.h, "Disk mesh width")->capture_default_str()->check(CLI::PositiveNumber);
  file->excludes(square)->excludes(disk);
  square->excludes(disk);
}

/// Parses "start:stop:unit" into start*unit, (start+1)*unit, ..., stop*unit.
std::vector<double> parse_range(const std::string& text) {
  std::istringstream ss(text);
  std::string a, b, c;
  if (!std::getline(ss, a, ':') || !std::getline(ss, b, ':') || !std::getline(ss, c))
    throw Error("range must look like start:stop:unit, got '" + text + "'");
  const double start = std::stod(a), stop = std::stod(b), unit = std::stod(c);
  if (stop < start || !(unit > 0.0)) throw Error("empty range '" + text + "'");
  std::vector<double> out;
  for (double k = start; k <= stop + 1e-9; k += 1.0) out.push_back(k * unit);
  return out;
}

void print_report(const AngleReport& rep) {
  std::cout << "interior edges: " << rep.edges.size() << '\n'
            << "worst cot sum:  " << rep.worst_value << '\n'
            << "violations:     " << rep.violations() << '\n'
            << "angle condition " << (rep.satisfied ? "satisfied" : "VIOLATED") << '\n';
}

struct MinimizeArgs {
  MeshSource mesh;
  std::optional<double> kappa, gamma, D;
  std::string material;
  std::string ic = "e3";
  double r0 = 0.0, layer = 0.0;
  double tol = 1e-8, rtol = 1e-10;
  std::size_t max_outer = 100000, max_iters = 0, log_every = 25;
  bool no_constraints = false, vtk = false, verbose = false;
  std::uint64_t seed = 20240607;
  std::string out = "helimin_out";
};

int cmd_minimize(const MinimizeArgs& args) {
  const Mesh mesh = args.mesh.build();
  ModelParams params;
  double ell = 0.0;
  if (!args.material.empty()) {
    if (args.material != "cobalt") throw Error("unknown material '" + args.material + "'");
    const auto setup = nondimensionalize(MaterialParams::cobalt(args.D.value_or(0.0)), 80e-9);
    params = setup.params();
    ell = setup.ell_ex;
  } else {
    params.kappa = args.kappa.value_or(0.0);
    params.gamma = args.gamma.value_or(0.0);
    ell = nondimensionalize(MaterialParams::cobalt(), 80e-9).ell_ex;
  }

  NodalVectorField u0(mesh, unit_vector(2));
  if (args.ic == "e1") u0 = NodalVectorField(mesh, unit_vector(0));
  else if (args.ic == "e2") u0 = NodalVectorField(mesh, unit_vector(1));
  else if (args.ic == "e3" || args.ic == "constant") u0 = initial_constant(mesh);
  else if (args.ic == "random") u0 = initial_random(mesh, args.seed);
  else if (args.ic == "skyrmion") {
    const double r0 = args.r0 > 0 ? args.r0 : 15e-9 / ell;
    const double layer = args.layer > 0 ? args.layer : 2e-9 / ell;
    u0 = initial_skyrmion(mesh, r0, layer);
  } else throw Error("unknown initial condition '" + args.ic + "'");

  MinimizeConfig cfg;
  cfg.tol = args.tol;
  cfg.max_outer = args.max_outer;
  cfg.params = params;
  cfg.log_every = args.log_every;
  cfg.solver.rtol = args.rtol;
  cfg.solver.max_iters = args.max_iters;
  cfg.solver.uniqueness_constraints = !args.no_constraints;

  if (!mesh.angle_report().satisfied)
    std::cerr << "warning: mesh violates the angle condition (" << mesh.angle_report().violations()
              << " edges); energy decrease is not guaranteed\n";
  auto log = [&](const TraceRow& r) {
    if (!args.verbose) return;
    std::cerr << "n=" << r.n << " J(u)=" << r.J_u << " J(w)=" << r.J_w << " krylov=" << r.krylov_iterations << '\n';
  };
  const MinimizeResult res = minimize(mesh, u0, cfg, log);

  const fs::path dir(args.out);
  fs::create_directories(dir);
  save_mesh(mesh, (dir / "mesh.msh").string());
  save_field(res.u, (dir / "final.field").string());
  std::ofstream csv(dir / "trace.csv");
  write_trace_csv(csv, res.trace);
  if (args.vtk) export_vtk(mesh, res.u, (dir / "final.vtk").string());

  std::cout << std::setprecision(10) << "kappa " << params.kappa << " gamma " << params.gamma << '\n'
            << "termination " << to_string(res.trace.reason) << '\n'
            << "iterations " << res.trace.iterations << '\n'
            << "final J_h " << res.trace.final_J << '\n'
            << "EL residual " << res.trace.final_el_residual << '\n'
            << "energy increases " << res.trace.energy_increases << '\n';
  return res.converged() ? ok : not_converged;
}

int cmd_counterexamples(double eps, bool scan) {
  bool failed = false;
  const auto r = counterexample_projection_aniso(eps);
  std::cout << std::setprecision(16) << "projection counterexample, eps = " << eps << '\n'
            << "  ||v.e3||^2       " << r.norm_before_sq << "  (closed form " << r.closed_before << ", x48 = "
            << 48 * r.closed_before << ")\n"
            << "  ||Pi(v).e3||^2   " << r.norm_after_sq << "  (closed form " << r.closed_after << ", x48 = "
            << 48 * r.closed_after << ")\n";
  if (!r.matches_closed_forms(1e-13)) {
    std::cout << "  FAIL: quadrature does not match the closed forms\n";
    failed = true;
  }
  if (!r.in_range) std::cerr << "warning: eps outside (0, 4/3); the increase need not hold\n";
  else if (!(r.norm_after_sq > r.norm_before_sq)) {
    std::cout << "  FAIL: no increase under projection\n";
    failed = true;
  }

  const auto& v = helical_counterexample_vectors;
  const Vec3 a(v[0][0], v[0][1], v[0][2]), b(v[1][0], v[1][1], v[1][2]), c(v[2][0], v[2][1], v[2][2]);
  std::vector<ModelParams> grid;
  if (scan) {
    for (double k : {-2.0, -1.0, -0.5, 0.5, 1.0, 2.0})
      for (double g : {-1.0, 0.0, 1.0}) grid.push_back({k, g});
  } else {
    for (double k : {-2.0, -1.0, -0.5, 0.5, 1.0, 2.0}) grid.push_back({k, 0.0});
  }
  std::cout << "helical counterexample: J_h(Pi v) - J_h(v)\n";
  bool any_positive = false;
  for (const auto& p : grid) {
    const double d = counterexample_helical(a, b, c, p);
    any_positive |= d > 0.0;
    std::cout << "  kappa " << std::setw(5) << p.kappa << "  gamma " << std::setw(3) << p.gamma << "  delta "
              << std::setw(24) << d << (d > 0.0 ? "  increase" : "") << '\n';
  }
  if (!any_positive) std::cout << "  no increase found on the grid\n";
  return failed ? assertion_failed : ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Energy minimization for helical micromagnetic models on triangulations"};
  app.set_help_flag("--help", "Print this help message and exit");  // -h would clash with --h
  app.set_config("--config", "", "key = value configuration file (flags override it)");
  app.require_subcommand(1);

  auto* mesh_cmd = app.add_subcommand("mesh", "Mesh generation and audit");
  mesh_cmd->require_subcommand(1);
  std::string check_file;
  auto* check = mesh_cmd->add_subcommand("check", "Audit the angle condition of a mesh file");
  check->add_option("file", check_file, "Mesh file")->required();
  MeshSource gen;
  std::string gen_out;
  auto* generate = mesh_cmd->add_subcommand("generate", "Write a structured square or disk mesh");
  add_mesh_source(generate, gen);
  generate->add_option("--out", gen_out, "Output mesh file")->required();

  MinimizeArgs margs;
  auto* minimize_cmd = app.add_subcommand("minimize", "Run the tangent-plane energy minimization");
  add_mesh_source(minimize_cmd, margs.mesh);
  auto* kappa = minimize_cmd->add_option("--kappa", margs.kappa, "Helix strength");
  auto* gamma = minimize_cmd->add_option("--gamma", margs.gamma, "Anisotropy parameter");
  auto* material = minimize_cmd->add_option("--material", margs.material, "Material preset (cobalt)");
  auto* D = minimize_cmd->add_option("--D", margs.D, "Anti-symmetric exchange constant in J/m^2 (with --material)");
  material->excludes(kappa)->excludes(gamma);
  D->needs(material);
  minimize_cmd->add_option("--ic", margs.ic, "Initial condition: e1|e2|e3|constant|random|skyrmion")->capture_default_str();
  minimize_cmd->add_option("--r0", margs.r0, "Skyrmion radius (dimensionless; default 15 nm)");
  minimize_cmd->add_option("--layer", margs.layer, "Skyrmion transition half-width (dimensionless; default 2 nm)");
  minimize_cmd->add_option("--tol", margs.tol, "Stop once J_h(w) <= tol")->capture_default_str()->check(CLI::PositiveNumber);
  minimize_cmd->add_option("--rtol", margs.rtol, "Relative MINRES tolerance")->capture_default_str()->check(CLI::PositiveNumber);
  minimize_cmd->add_option("--max-outer", margs.max_outer, "Outer iteration cap")->capture_default_str();
  minimize_cmd->add_option("--max-iters", margs.max_iters, "MINRES iteration cap (0: automatic)")->capture_default_str();
  minimize_cmd->add_option("--log-every", margs.log_every, "EL residual cadence (0: only at the end)")->capture_default_str();
  minimize_cmd->add_flag("--no-uniqueness-constraints", margs.no_constraints, "Skip the kernel constraints");
  minimize_cmd->add_option("--seed", margs.seed, "Seed for random initial conditions")->capture_default_str();
  minimize_cmd->add_option("--out", margs.out, "Output directory")->capture_default_str();
  minimize_cmd->add_flag("--vtk", margs.vtk, "Also write final.vtk");
  minimize_cmd->add_flag("-v,--verbose", margs.verbose, "Log every outer iteration");

  double eps = 1.0;
  bool scan = false;
  auto* cex = app.add_subcommand("counterexamples", "Reproduce the projection and helical counterexamples");
  cex->add_option("--eps", eps, "Perturbation of the first nodal value")->capture_default_str();
  cex->add_flag("--helical-scan", scan, "Scan kappa and gamma for the helical counterexample");

  SweepConfig scfg;
  std::string smaterial = "cobalt", srange = "0:8:1e-3", sic = "both", sout;
  double stol = scfg.minimize.tol;
  auto* sweep = app.add_subcommand("sweep", "Disk experiment over the anti-symmetric exchange strength");
  sweep->add_option("--material", smaterial, "Material preset")->capture_default_str();
  sweep->add_option("--D-range", srange, "start:stop:unit, stepping start by one")->capture_default_str();
  sweep->add_option("--ic", sic, "constant|skyrmion|both")->capture_default_str();
  sweep->add_option("--out", sout, "Output directory")->required();
  sweep->add_option("--h", scfg.h, "Dimensionless mesh width")->capture_default_str()->check(CLI::PositiveNumber);
  sweep->add_option("--jobs", scfg.jobs, "Parallel jobs (0: hardware concurrency)")->capture_default_str();
  sweep->add_option("--tol", stol, "Stop once J_h(w) <= tol")->capture_default_str()->check(CLI::PositiveNumber);

  std::string emesh, efield, eout;
  auto* exp = app.add_subcommand("export", "Convert a field to legacy VTK");
  exp->add_option("--mesh", emesh, "Mesh file")->required();
  exp->add_option("--field", efield, "Field file")->required();
  exp->add_option("--out", eout, "VTK output file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : input_error;
  }

  try {
    if (*check) {
      const Mesh mesh = load_mesh(check_file);
      std::cout << "nodes " << mesh.num_nodes() << ", triangles " << mesh.num_triangles() << '\n';
      print_report(mesh.angle_report());
      return mesh.angle_report().satisfied ? ok : angle_violation;
    }
    if (*generate) {
      const Mesh mesh = gen.build();
      save_mesh(mesh, gen_out);
      std::cout << "nodes " << mesh.num_nodes() << ", triangles " << mesh.num_triangles() << ", max edge "
                << mesh.max_edge_length() << '\n';
      print_report(mesh.angle_report());
      return ok;
    }
    if (*minimize_cmd) return cmd_minimize(margs);
    if (*cex) return cmd_counterexamples(eps, scan);
    if (*sweep) {
      if (smaterial != "cobalt") throw Error("unknown material '" + smaterial + "'");
      scfg.D_values = parse_range(srange);
      if (sic == "constant") scfg.ics = {InitialCondition::Constant};
      else if (sic == "skyrmion") scfg.ics = {InitialCondition::Skyrmion};
      else if (sic != "both") throw Error("unknown initial condition '" + sic + "'");
      scfg.minimize.tol = stol;
      scfg.minimize.log_every = 0;
      scfg.out_dir = fs::path(sout);
      const auto results = run_dsweep(scfg);
      bool all_converged = true;
      for (const auto& r : results) {
        all_converged &= r.trace.reason == Termination::Tolerance;
        std::cout << std::left << std::setw(14) << sweep_tag(r.D, r.ic) << std::setw(18) << to_string(r.report.state)
                  << " J_h " << std::setw(14) << r.trace.final_J << " iterations " << r.trace.iterations << '\n';
      }
      return all_converged ? ok : not_converged;
    }
    if (*exp) {
      const Mesh mesh = load_mesh(emesh);
      export_vtk(mesh, load_field(efield, mesh), eout);
      return ok;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return input_error;
  }
  return ok;
}
