#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "helimin/core.hpp"

namespace helimin {

/// Node indices of a triangle, stored counterclockwise.
using Triangle = std::array<int, 3>;

/// Edge shared by exactly two triangles.
struct InteriorEdge {
  int a = -1;  // a < b
  int b = -1;
  std::array<int, 2> triangles{-1, -1};
  std::array<int, 2> opposite{-1, -1};  // node of each triangle not on the edge
};

struct EdgeAngleRecord {
  std::size_t edge = 0;  // index into Mesh::interior_edges()
  double cot_sum = 0.0;  // cot(alpha_1) + cot(alpha_2)
};

/// Audit of the weakly-acute angle condition on every interior edge.
struct AngleReport {
  std::vector<EdgeAngleRecord> edges;
  double worst_value = std::numeric_limits<double>::infinity();
  bool satisfied = true;

  std::size_t violations() const {
    return static_cast<std::size_t>(std::count_if(edges.begin(), edges.end(), [](const EdgeAngleRecord& r) {
      return r.cot_sum < -tolerance_angle;
    }));
  }
};

/// Cotangent of the interior angle at `apex` in the triangle (apex, p, q).
inline double cot_at(const Vec2& apex, const Vec2& p, const Vec2& q) {
  const Vec2 d1 = p - apex;
  const Vec2 d2 = q - apex;
  const double cross = d1.x() * d2.y() - d1.y() * d2.x();
  return d1.dot(d2) / std::abs(cross);
}

inline double signed_area(const Vec2& a, const Vec2& b, const Vec2& c) {
  return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x()));
}

namespace detail {
inline std::uint64_t next_mesh_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1);
}
}  // namespace detail

class Mesh;
AngleReport check_angle_condition(const Mesh& mesh);

/// Conforming 2D triangulation. Immutable after construction.
///
/// Construction validates indices, normalizes every triangle to counterclockwise order,
/// rejects degenerate triangles, edges shared by more than two triangles, overlapping
/// neighbours, hanging nodes and nodes that belong to no triangle.
class Mesh {
 public:
  Mesh(std::vector<Vec2> nodes, std::vector<Triangle> triangles)
      : id_(detail::next_mesh_id()), nodes_(std::move(nodes)), triangles_(std::move(triangles)) {
    if (nodes_.empty() || triangles_.empty()) throw MeshError("mesh must contain nodes and triangles");
    validate_and_orient();
    build_edges();
    check_hanging_nodes();
    areas_.resize(triangles_.size());
    weights_.assign(nodes_.size(), 0.0);
    for (std::size_t t = 0; t < triangles_.size(); ++t) {
      const auto& tri = triangles_[t];
      areas_[t] = signed_area(nodes_[tri[0]], nodes_[tri[1]], nodes_[tri[2]]);
      for (int v : tri) weights_[v] += areas_[t] / 3.0;
    }
    report_ = check_angle_condition(*this);
  }

  std::uint64_t id() const noexcept { return id_; }
  std::size_t num_nodes() const noexcept { return nodes_.size(); }
  std::size_t num_triangles() const noexcept { return triangles_.size(); }
  const std::vector<Vec2>& nodes() const noexcept { return nodes_; }
  const Vec2& node(std::size_t i) const { return nodes_[i]; }
  const std::vector<Triangle>& triangles() const noexcept { return triangles_; }
  const Triangle& triangle(std::size_t t) const { return triangles_[t]; }
  std::array<Vec2, 3> vertices(std::size_t t) const {
    const auto& tri = triangles_[t];
    return {nodes_[tri[0]], nodes_[tri[1]], nodes_[tri[2]]};
  }
  const std::vector<InteriorEdge>& interior_edges() const noexcept { return interior_; }
  const std::vector<std::array<int, 2>>& boundary_edges() const noexcept { return boundary_; }
  double area(std::size_t t) const { return areas_[t]; }
  double total_area() const {
    double s = 0.0;
    for (double a : areas_) s += a;
    return s;
  }
  /// Integral of each nodal hat function, (1/3) * sum of adjacent triangle areas.
  const std::vector<double>& lumped_weights() const noexcept { return weights_; }
  /// Angle-condition audit computed at construction.
  const AngleReport& angle_report() const noexcept { return report_; }

  double max_edge_length() const {
    double h = 0.0;
    for (const auto& tri : triangles_)
      for (int k = 0; k < 3; ++k) h = std::max(h, (nodes_[tri[k]] - nodes_[tri[(k + 1) % 3]]).norm());
    return h;
  }

  std::vector<bool> boundary_node_mask() const {
    std::vector<bool> mask(nodes_.size(), false);
    for (const auto& e : boundary_) mask[e[0]] = mask[e[1]] = true;
    return mask;
  }

 private:
  void validate_and_orient() {
    const int n = static_cast<int>(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i)
      if (!nodes_[i].allFinite()) throw MeshError("node " + std::to_string(i) + " has non-finite coordinates");
    std::vector<bool> used(nodes_.size(), false);
    double scale = 0.0;
    for (const auto& p : nodes_) scale = std::max(scale, p.cwiseAbs().maxCoeff());
    scale = std::max(scale, 1.0);
    for (std::size_t t = 0; t < triangles_.size(); ++t) {
      auto& tri = triangles_[t];
      for (int v : tri)
        if (v < 0 || v >= n) throw MeshError("triangle " + std::to_string(t) + " references invalid node " + std::to_string(v));
      if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2])
        throw MeshError("triangle " + std::to_string(t) + " repeats a node index");
      double a = signed_area(nodes_[tri[0]], nodes_[tri[1]], nodes_[tri[2]]);
      if (a < 0) {
        std::swap(tri[1], tri[2]);
        a = -a;
      }
      if (!(a > 1e-14 * scale * scale)) throw MeshError("triangle " + std::to_string(t) + " is degenerate");
      for (int v : tri) used[v] = true;
    }
    for (std::size_t i = 0; i < used.size(); ++i)
      if (!used[i]) throw MeshError("node " + std::to_string(i) + " belongs to no triangle");
  }

  void build_edges() {
    // Directed edges of counterclockwise triangles: a shared edge must appear once in each direction.
    struct Slot {
      int tri = -1;
      int opposite = -1;
    };
    std::map<std::pair<int, int>, Slot> directed;
    for (std::size_t t = 0; t < triangles_.size(); ++t) {
      const auto& tri = triangles_[t];
      for (int k = 0; k < 3; ++k) {
        const std::pair<int, int> key{tri[k], tri[(k + 1) % 3]};
        auto [it, inserted] = directed.emplace(key, Slot{static_cast<int>(t), tri[(k + 2) % 3]});
        if (!inserted)
          throw MeshError("non-conforming connectivity: triangles " + std::to_string(it->second.tri) + " and " +
                          std::to_string(t) + " overlap along edge " + std::to_string(key.first) + "-" +
                          std::to_string(key.second));
      }
    }
    for (const auto& [key, slot] : directed) {
      const auto [i, j] = key;
      auto twin = directed.find({j, i});
      if (twin == directed.end()) {
        boundary_.push_back({i, j});
      } else if (i < j) {
        InteriorEdge e;
        e.a = i;
        e.b = j;
        e.triangles = {slot.tri, twin->second.tri};
        e.opposite = {slot.opposite, twin->second.opposite};
        interior_.push_back(e);
      }
    }
  }

  void check_hanging_nodes() const {
    for (const auto& e : boundary_) {
      const Vec2& a = nodes_[e[0]];
      const Vec2& b = nodes_[e[1]];
      const Vec2 d = b - a;
      const double len2 = d.squaredNorm();
      const Vec2 lo = a.cwiseMin(b), hi = a.cwiseMax(b);
      for (std::size_t p = 0; p < nodes_.size(); ++p) {
        if (static_cast<int>(p) == e[0] || static_cast<int>(p) == e[1]) continue;
        const Vec2& x = nodes_[p];
        if ((x.array() < lo.array() - 1e-12).any() || (x.array() > hi.array() + 1e-12).any()) continue;
        const Vec2 r = x - a;
        const double cross = d.x() * r.y() - d.y() * r.x();
        const double t = d.dot(r) / len2;
        if (std::abs(cross) <= 1e-12 * len2 && t > 1e-12 && t < 1.0 - 1e-12)
          throw MeshError("non-conforming connectivity: node " + std::to_string(p) + " hangs on edge " +
                          std::to_string(e[0]) + "-" + std::to_string(e[1]));
      }
    }
  }

  std::uint64_t id_;
  std::vector<Vec2> nodes_;
  std::vector<Triangle> triangles_;
  std::vector<InteriorEdge> interior_;
  std::vector<std::array<int, 2>> boundary_;
  std::vector<double> areas_;
  std::vector<double> weights_;
  AngleReport report_;
};

/// For every interior edge, cot of the two angles opposite the edge; boundary edges are skipped.
inline AngleReport check_angle_condition(const Mesh& mesh) {
  AngleReport report;
  const auto& edges = mesh.interior_edges();
  report.edges.reserve(edges.size());
  for (std::size_t k = 0; k < edges.size(); ++k) {
    const auto& e = edges[k];
    const Vec2& a = mesh.node(e.a);
    const Vec2& b = mesh.node(e.b);
    const double s = cot_at(mesh.node(e.opposite[0]), a, b) + cot_at(mesh.node(e.opposite[1]), a, b);
    report.edges.push_back({k, s});
    report.worst_value = std::min(report.worst_value, s);
  }
  report.satisfied = report.worst_value >= -tolerance_angle;
  return report;
}

/// Unit square split into n x n cells, each cut along the (0,0)-(1,1) diagonal direction.
inline Mesh generate_structured_square(int n) {
  if (n < 1) throw MeshError("structured square needs n >= 1");
  std::vector<Vec2> nodes;
  nodes.reserve(static_cast<std::size_t>((n + 1) * (n + 1)));
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i) nodes.emplace_back(static_cast<double>(i) / n, static_cast<double>(j) / n);
  std::vector<Triangle> tris;
  tris.reserve(static_cast<std::size_t>(2 * n * n));
  auto id = [n](int i, int j) { return j * (n + 1) + i; };
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      tris.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      tris.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  return Mesh(std::move(nodes), std::move(tris));
}

namespace detail {

// Lawson edge flips until every interior edge satisfies alpha_1 + alpha_2 <= pi,
// which is the same statement as cot(alpha_1) + cot(alpha_2) >= 0.
inline void delaunay_flip(const std::vector<Vec2>& nodes, std::vector<Triangle>& tris) {
  for (int pass = 0; pass < 1000; ++pass) {
    std::map<std::pair<int, int>, std::vector<std::pair<int, int>>> edge_map;  // edge -> (tri, opposite)
    for (std::size_t t = 0; t < tris.size(); ++t)
      for (int k = 0; k < 3; ++k) {
        int a = tris[t][k], b = tris[t][(k + 1) % 3];
        if (a > b) std::swap(a, b);
        edge_map[{a, b}].emplace_back(static_cast<int>(t), tris[t][(k + 2) % 3]);
      }
    std::vector<bool> touched(tris.size(), false);
    bool flipped = false;
    for (const auto& [edge, adj] : edge_map) {
      if (adj.size() != 2) continue;
      const auto [t1, o1] = adj[0];
      const auto [t2, o2] = adj[1];
      if (touched[t1] || touched[t2]) continue;
      const Vec2& a = nodes[edge.first];
      const Vec2& b = nodes[edge.second];
      if (cot_at(nodes[o1], a, b) + cot_at(nodes[o2], a, b) >= -1e-14) continue;
      Triangle n1{o1, edge.first, o2};
      Triangle n2{o2, edge.second, o1};
      const double a1 = signed_area(nodes[n1[0]], nodes[n1[1]], nodes[n1[2]]);
      const double a2 = signed_area(nodes[n2[0]], nodes[n2[1]], nodes[n2[2]]);
      // Same orientation for both halves <=> the quad is convex.
      if (a1 * a2 <= 0 || std::abs(a1) < 1e-14 || std::abs(a2) < 1e-14) continue;
      if (a1 < 0) std::swap(n1[1], n1[2]);
      if (a2 < 0) std::swap(n2[1], n2[2]);
      tris[t1] = n1;
      tris[t2] = n2;
      touched[t1] = touched[t2] = true;
      flipped = true;
    }
    if (!flipped) return;
  }
}

inline std::pair<std::vector<Vec2>, std::vector<Triangle>> polar_disk(double radius, int rings) {
  // Ring k sits at radius (k - 1/2) / (rings - 1/2) * radius with 3(2k - 1) nodes, so the
  // origin lies inside the first triangle and is never a node.
  std::vector<Vec2> nodes;
  std::vector<int> offset{0};
  std::vector<int> counts{0};
  for (int k = 1; k <= rings; ++k) {
    offset.push_back(static_cast<int>(nodes.size()));
    const int count = 3 * (2 * k - 1);
    counts.push_back(count);
    const double r = (k == rings) ? radius : radius * (k - 0.5) / (rings - 0.5);
    const double shift = (k % 2 == 0) ? 0.5 : 0.0;
    for (int j = 0; j < count; ++j) {
      const double phi = 2.0 * std::numbers::pi * (j + shift) / count;
      nodes.emplace_back(r * std::cos(phi), r * std::sin(phi));
    }
  }
  std::vector<Triangle> tris;
  tris.push_back({0, 1, 2});
  for (int k = 1; k < rings; ++k) {
    const int n_in = counts[k], n_out = counts[k + 1];
    auto in = [&](int i) { return offset[k] + i % n_in; };
    auto out = [&](int j) { return offset[k + 1] + j % n_out; };
    int i = 0, j = 0;
    while (i < n_in || j < n_out) {
      bool advance_inner;
      if (i == n_in) {
        advance_inner = false;
      } else if (j == n_out) {
        advance_inner = true;
      } else {
        const double d_inner = (nodes[in(i + 1)] - nodes[out(j)]).norm();
        const double d_outer = (nodes[in(i)] - nodes[out(j + 1)]).norm();
        advance_inner = d_inner < d_outer;
      }
      if (advance_inner) {
        tris.push_back({in(i), in(i + 1), out(j)});
        ++i;
      } else {
        tris.push_back({in(i), out(j + 1), out(j)});
        ++j;
      }
    }
  }
  for (auto& t : tris)
    if (signed_area(nodes[t[0]], nodes[t[1]], nodes[t[2]]) < 0) std::swap(t[1], t[2]);
  return {std::move(nodes), std::move(tris)};
}

}  // namespace detail

/// Disk of the given radius centred at the origin: concentric rings around a central triangle,
/// boundary nodes on the circle, followed by Delaunay edge flips. No node sits at the origin.
/// The ring count is the smallest one whose maximal edge length is <= h_target.
/// Any residual angle-condition violations are left in Mesh::angle_report().
inline Mesh generate_disk(double radius, double h_target) {
  if (!(radius > 0.0) || !std::isfinite(radius)) throw MeshError("disk radius must be positive");
  if (!(h_target > 0.0) || !(h_target < radius))
    throw MeshError("disk mesh width must satisfy 0 < h_target < radius");
  for (int rings = std::max(1, static_cast<int>(std::ceil(radius / h_target + 0.5))); rings < 100000; ++rings) {
    auto [nodes, tris] = detail::polar_disk(radius, rings);
    detail::delaunay_flip(nodes, tris);
    Mesh mesh(std::move(nodes), std::move(tris));
    if (mesh.max_edge_length() <= h_target * (1.0 + 1e-12)) return mesh;
  }
  throw MeshError("failed to mesh disk within the ring limit");
}

// ---------------------------------------------------------------------------------------------
// Text format:
//   nodes <N>
//   x y            (N lines)
//   triangles <M>
//   i j k          (M lines, 0-based)

inline Mesh read_mesh(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  auto next = [&]() -> std::string {
    while (std::getline(in, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r") != std::string::npos) return line;
    }
    throw ParseError(lineno + 1, "unexpected end of file");
  };
  auto header = [&](const std::string& keyword) -> std::size_t {
    std::istringstream ss(next());
    std::string word;
    long long count = -1;
    if (!(ss >> word >> count) || word != keyword || count < 0)
      throw ParseError(lineno, "expected '" + keyword + " <count>'");
    std::string rest;
    if (ss >> rest) throw ParseError(lineno, "trailing characters after header");
    return static_cast<std::size_t>(count);
  };

  const std::size_t n = header("nodes");
  std::vector<Vec2> nodes;
  nodes.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::istringstream ss(next());
    double x, y;
    std::string rest;
    if (!(ss >> x >> y) || (ss >> rest)) throw ParseError(lineno, "expected two coordinates 'x y'");
    if (!std::isfinite(x) || !std::isfinite(y)) throw ParseError(lineno, "non-finite coordinate");
    nodes.emplace_back(x, y);
  }
  const std::size_t m = header("triangles");
  std::vector<Triangle> tris;
  tris.reserve(m);
  for (std::size_t t = 0; t < m; ++t) {
    std::istringstream ss(next());
    long long i, j, k;
    std::string rest;
    if (!(ss >> i >> j >> k) || (ss >> rest)) throw ParseError(lineno, "expected three node indices 'i j k'");
    for (long long v : {i, j, k})
      if (v < 0 || v >= static_cast<long long>(n))
        throw ParseError(lineno, "node index " + std::to_string(v) + " out of range [0, " + std::to_string(n) + ")");
    if (i == j || j == k || i == k) throw ParseError(lineno, "repeated node index in triangle");
    tris.push_back({static_cast<int>(i), static_cast<int>(j), static_cast<int>(k)});
  }
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") != std::string::npos) throw ParseError(lineno, "unexpected trailing content");
  }
  return Mesh(std::move(nodes), std::move(tris));
}

inline void write_mesh(std::ostream& out, const Mesh& mesh) {
  out << "nodes " << mesh.num_nodes() << '\n' << std::setprecision(17);
  for (const auto& p : mesh.nodes()) out << p.x() << ' ' << p.y() << '\n';
  out << "triangles " << mesh.num_triangles() << '\n';
  for (const auto& t : mesh.triangles()) out << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

inline Mesh load_mesh(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open mesh file '" + path + "'");
  return read_mesh(in);
}

inline void save_mesh(const Mesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write mesh file '" + path + "'");
  write_mesh(out, mesh);
  if (!out) throw Error("failed writing mesh file '" + path + "'");
}

}  // namespace helimin
