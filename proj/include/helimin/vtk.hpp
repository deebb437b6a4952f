#pragma once

#include <fstream>
#include <string>

#include "helimin/fields.hpp"
#include "helimin/mesh.hpp"

namespace helimin {

/// Legacy ASCII VTK unstructured grid with point vectors `m` and the scalar `m3` = m . e3.
inline void write_vtk(std::ostream& out, const Mesh& mesh, const NodalVectorField& m) {
  if (!m.lives_on(mesh)) throw Error("export: field does not live on the mesh");
  out << "# vtk DataFile Version 3.0\nhelimin magnetization\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out.precision(17);
  out << "POINTS " << mesh.num_nodes() << " double\n";
  for (const auto& p : mesh.nodes()) out << p.x() << ' ' << p.y() << " 0\n";
  out << "CELLS " << mesh.num_triangles() << ' ' << 4 * mesh.num_triangles() << '\n';
  for (const auto& t : mesh.triangles()) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  out << "CELL_TYPES " << mesh.num_triangles() << '\n';
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) out << "5\n";
  out << "POINT_DATA " << mesh.num_nodes() << '\n';
  out << "VECTORS m double\n";
  for (const auto& v : m.values()) out << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  out << "SCALARS m3 double 1\nLOOKUP_TABLE default\n";
  for (const auto& v : m.values()) out << v.z() << '\n';
}

inline void export_vtk(const Mesh& mesh, const NodalVectorField& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write VTK file '" + path + "'");
  write_vtk(out, mesh, m);
  if (!out) throw Error("failed writing VTK file '" + path + "'");
}

}  // namespace helimin
