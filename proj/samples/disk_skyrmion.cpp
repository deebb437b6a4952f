// Cobalt disk with D = 4e-3 J/m^2 started from a skyrmion; writes disk_skyrmion.vtk.
#include <iostream>

#include "helimin/helimin.hpp"

int main() {
  using namespace helimin;
  const auto setup = nondimensionalize(MaterialParams::cobalt(4e-3), 80e-9);
  const Mesh mesh = generate_disk(setup.disk_radius, 0.25);
  std::cout << "kappa " << setup.kappa << ", gamma " << setup.gamma << ", " << mesh.num_nodes() << " nodes\n";

  MinimizeConfig cfg;
  cfg.params = setup.params();
  const auto u0 = initial_skyrmion(mesh, 15e-9 / setup.ell_ex, 2e-9 / setup.ell_ex);
  const auto result = minimize(mesh, u0, cfg);

  const auto report = classify_state(mesh, result.u);
  std::cout << to_string(report.state) << ", J_h = " << result.trace.final_J << " after " << result.trace.iterations
            << " steps\n";
  export_vtk(mesh, result.u, "disk_skyrmion.vtk");
}
