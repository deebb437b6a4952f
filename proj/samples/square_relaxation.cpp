// Relax a random unit field on the unit square and print the energy trace.
#include <iostream>

#include "helimin/helimin.hpp"

int main() {
  using namespace helimin;
  const Mesh mesh = generate_structured_square(16);
  MinimizeConfig cfg;
  cfg.params = {0.0, 1.3};
  cfg.log_every = 0;

  const auto result = minimize(mesh, initial_random(mesh, 7), cfg, [](const TraceRow& r) {
    std::cout << "n=" << r.n << "  J(u)=" << r.J_u << "  J(w)=" << r.J_w << '\n';
  });
  std::cout << to_string(result.trace.reason) << " after " << result.trace.iterations << " steps, EL residual "
            << result.trace.final_el_residual << '\n';
}
