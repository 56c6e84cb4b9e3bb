// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "maglab/errors.hpp"
#include "maglab/types.hpp"

namespace maglab {

/// Conforming triangulation with globally oriented edges.
///
/// Local edge k of a triangle joins local vertices k and (k+1) % 3; its
/// orientation sign is +1 when that traversal goes from the lower to the
/// higher global vertex index.
struct Mesh2D {
  std::vector<Vec2> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<int> tags;

  // Populated by build_edges().
  std::vector<std::array<int, 2>> edges;  // (lo, hi), sorted lexicographically
  std::vector<std::array<int, 3>> tri_edges;
  std::vector<std::array<int, 3>> tri_signs;
  std::vector<char> boundary_edge;
  std::vector<char> boundary_vertex;

  int num_vertices() const { return static_cast<int>(vertices.size()); }
  int num_triangles() const { return static_cast<int>(triangles.size()); }
  int num_edges() const { return static_cast<int>(edges.size()); }

  double signed_area(int t) const {
    const auto& tri = triangles[t];
    const Vec2 a = vertices[tri[1]] - vertices[tri[0]];
    const Vec2 b = vertices[tri[2]] - vertices[tri[0]];
    return 0.5 * (a.x() * b.y() - a.y() * b.x());
  }

  Vec2 centroid(int t) const {
    const auto& tri = triangles[t];
    return (vertices[tri[0]] + vertices[tri[1]] + vertices[tri[2]]) / 3.0;
  }

  /// Lowest-index boundary vertex; used to pin the nodal constant mode.
  int first_boundary_vertex() const {
    for (int v = 0; v < num_vertices(); ++v)
      if (boundary_vertex[v]) return v;
    throw TopologyError("mesh has no boundary vertex");
  }
};

/// Rebuild edge numbering, incidence signs and boundary flags.
inline Mesh2D build_edges(Mesh2D mesh) {
  const int nv = mesh.num_vertices();
  const int nt = mesh.num_triangles();
  if (static_cast<int>(mesh.tags.size()) != nt)
    throw TopologyError("tag count does not match triangle count");

  std::vector<std::array<int, 2>> all;
  all.reserve(3 * static_cast<std::size_t>(nt));
  for (int t = 0; t < nt; ++t) {
    const auto& tri = mesh.triangles[t];
    for (int k = 0; k < 3; ++k) {
      if (tri[k] < 0 || tri[k] >= nv)
        throw TopologyError("triangle " + std::to_string(t) + " references vertex out of range");
    }
    if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2])
      throw TopologyError("triangle " + std::to_string(t) + " repeats a vertex");
    if (!(mesh.signed_area(t) > 0.0))
      throw TopologyError("triangle " + std::to_string(t) + " has non-positive area");
    for (int k = 0; k < 3; ++k) {
      const int a = tri[k], b = tri[(k + 1) % 3];
      all.push_back({std::min(a, b), std::max(a, b)});
    }
  }
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  mesh.edges = std::move(all);

  const int ne = mesh.num_edges();
  mesh.tri_edges.assign(nt, {});
  mesh.tri_signs.assign(nt, {});
  std::vector<int> count(ne, 0);
  std::vector<int> sign_sum(ne, 0);
  for (int t = 0; t < nt; ++t) {
    const auto& tri = mesh.triangles[t];
    for (int k = 0; k < 3; ++k) {
      const int a = tri[k], b = tri[(k + 1) % 3];
      const std::array<int, 2> key{std::min(a, b), std::max(a, b)};
      const auto it = std::lower_bound(mesh.edges.begin(), mesh.edges.end(), key);
      const int e = static_cast<int>(it - mesh.edges.begin());
      mesh.tri_edges[t][k] = e;
      mesh.tri_signs[t][k] = a < b ? 1 : -1;
      ++count[e];
      sign_sum[e] += mesh.tri_signs[t][k];
    }
  }

  mesh.boundary_edge.assign(ne, 0);
  mesh.boundary_vertex.assign(nv, 0);
  for (int e = 0; e < ne; ++e) {
    if (count[e] > 2)
      throw TopologyError("edge " + std::to_string(e) + " shared by " + std::to_string(count[e]) +
                          " triangles");
    if (count[e] == 2 && sign_sum[e] != 0)
      throw TopologyError("edge " + std::to_string(e) +
                          " traversed in the same direction by both neighbours (overlap)");
    if (count[e] == 1) {
      mesh.boundary_edge[e] = 1;
      mesh.boundary_vertex[mesh.edges[e][0]] = 1;
      mesh.boundary_vertex[mesh.edges[e][1]] = 1;
    }
  }
  return mesh;
}

struct Rect {
  double x0 = 0, x1 = 0, y0 = 0, y1 = 0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double area() const { return width() * height(); }
  bool contains(const Vec2& p) const { return p.x() > x0 && p.x() < x1 && p.y() > y0 && p.y() < y1; }

  friend bool operator==(const Rect&, const Rect&) = default;
};

struct RegionSpec {
  int tag = 0;
  Rect box;
  double mesh_size = 0.0;  // 0: use the global size

  friend bool operator==(const RegionSpec&, const RegionSpec&) = default;
};

/// Axis-aligned block geometry. Regions are disjoint rectangles; uncovered
/// area takes the background tag when one is set, otherwise the regions must
/// tile the bounding box.
struct GeometrySpec {
  Rect bbox;
  double mesh_size = 0.0;
  std::vector<RegionSpec> regions;
  std::optional<int> background_tag;
  std::vector<std::string> tag_names;

  friend bool operator==(const GeometrySpec&, const GeometrySpec&) = default;
};

namespace detail {

inline std::vector<double> grid_lines(double lo, double hi, const std::vector<std::array<double, 3>>& cuts,
                                      double global_size) {
  // cuts: (a, b, size) intervals that constrain spacing and add breakpoints.
  const double tol = 1e-12 * (hi - lo);
  std::vector<double> breaks{lo, hi};
  for (const auto& c : cuts) {
    breaks.push_back(c[0]);
    breaks.push_back(c[1]);
  }
  std::sort(breaks.begin(), breaks.end());
  std::vector<double> uniq;
  for (double b : breaks) {
    if (uniq.empty() || b - uniq.back() > tol) uniq.push_back(b);
  }
  std::vector<double> lines{uniq.front()};
  for (std::size_t i = 0; i + 1 < uniq.size(); ++i) {
    const double a = uniq[i], b = uniq[i + 1];
    double size = global_size;
    for (const auto& c : cuts) {
      if (c[2] > 0.0 && c[0] < b - tol && c[1] > a + tol) size = std::min(size, c[2]);
    }
    const int n = std::max(1, static_cast<int>(std::ceil((b - a) / size - 1e-9)));
    for (int k = 1; k < n; ++k) lines.push_back(a + (b - a) * k / n);
    lines.push_back(b);
  }
  return lines;
}

}  // namespace detail

/// Structured triangulation: grid lines through every region boundary, each
/// band subdivided to the finest requested size, cells split along the
/// lower-left to upper-right diagonal.
inline Mesh2D generate(const GeometrySpec& spec) {
  const Rect& bb = spec.bbox;
  if (!(bb.width() > 0.0) || !(bb.height() > 0.0)) throw GeometryError("empty bounding box");
  if (!(spec.mesh_size > 0.0)) throw GeometryError("mesh size must be positive");
  const double tol = 1e-12 * std::max(bb.width(), bb.height());

  double covered = 0.0;
  for (std::size_t i = 0; i < spec.regions.size(); ++i) {
    const Rect& r = spec.regions[i].box;
    if (!(r.width() > 0.0) || !(r.height() > 0.0))
      throw GeometryError("region " + std::to_string(i) + " is empty");
    if (r.x0 < bb.x0 - tol || r.x1 > bb.x1 + tol || r.y0 < bb.y0 - tol || r.y1 > bb.y1 + tol)
      throw GeometryError("region " + std::to_string(i) + " extends outside the bounding box");
    if (spec.regions[i].mesh_size < 0.0)
      throw GeometryError("region " + std::to_string(i) + " has negative mesh size");
    for (std::size_t j = 0; j < i; ++j) {
      const Rect& q = spec.regions[j].box;
      const double ox = std::min(r.x1, q.x1) - std::max(r.x0, q.x0);
      const double oy = std::min(r.y1, q.y1) - std::max(r.y0, q.y0);
      if (ox > tol && oy > tol)
        throw GeometryError("regions " + std::to_string(j) + " and " + std::to_string(i) + " overlap");
    }
    covered += r.area();
  }
  if (!spec.background_tag && std::abs(covered - bb.area()) > 1e-12 * bb.area())
    throw GeometryError("regions do not tile the bounding box and no background is set");

  std::vector<std::array<double, 3>> xcuts, ycuts;
  for (const auto& reg : spec.regions) {
    xcuts.push_back({reg.box.x0, reg.box.x1, reg.mesh_size});
    ycuts.push_back({reg.box.y0, reg.box.y1, reg.mesh_size});
  }
  const auto xs = detail::grid_lines(bb.x0, bb.x1, xcuts, spec.mesh_size);
  const auto ys = detail::grid_lines(bb.y0, bb.y1, ycuts, spec.mesh_size);
  const int nx = static_cast<int>(xs.size()) - 1;
  const int ny = static_cast<int>(ys.size()) - 1;

  Mesh2D mesh;
  mesh.vertices.reserve(static_cast<std::size_t>(nx + 1) * (ny + 1));
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i) mesh.vertices.emplace_back(xs[i], ys[j]);

  auto vid = [nx](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int ll = vid(i, j), lr = vid(i + 1, j), ur = vid(i + 1, j + 1), ul = vid(i, j + 1);
      mesh.triangles.push_back({ll, lr, ur});
      mesh.triangles.push_back({ll, ur, ul});
    }
  }

  mesh.tags.resize(mesh.triangles.size());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const Vec2 c = mesh.centroid(t);
    int tag = -1;
    for (const auto& reg : spec.regions) {
      if (reg.box.contains(c)) {
        tag = reg.tag;
        break;
      }
    }
    if (tag < 0) {
      if (!spec.background_tag) throw GeometryError("triangle centroid outside every region");
      tag = *spec.background_tag;
    }
    mesh.tags[t] = tag;
  }
  return build_edges(std::move(mesh));
}

// ---------------------------------------------------------------------------
// Text format
//
//   maglab-mesh v1
//   V E T
//   x y            (V lines)
//   v0 v1 v2 tag   (T lines)
//
// Edges are rebuilt on load; E is checked against the rebuilt count.

inline constexpr std::string_view mesh_magic = "maglab-mesh v1";

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

template <class T>
bool parse_number(std::string_view s, T& out) {
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

inline std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string(), 0, "cannot open file");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

}  // namespace detail

inline void save_mesh(const Mesh2D& mesh, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write mesh file " + path.string());
  out << mesh_magic << '\n';
  out << mesh.num_vertices() << ' ' << mesh.num_edges() << ' ' << mesh.num_triangles() << '\n';
  for (const auto& v : mesh.vertices)
    out << detail::format_double(v.x()) << ' ' << detail::format_double(v.y()) << '\n';
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    out << tri[0] << ' ' << tri[1] << ' ' << tri[2] << ' ' << mesh.tags[t] << '\n';
  }
  if (!out) throw Error("error while writing mesh file " + path.string());
}

inline Mesh2D load_mesh(const std::filesystem::path& path) {
  const std::string p = path.string();
  auto lines = detail::read_lines(path);
  while (!lines.empty() && detail::split_ws(lines.back()).empty()) lines.pop_back();

  if (lines.empty() || lines[0] != mesh_magic)
    throw ParseError(p, 1, "expected header '" + std::string(mesh_magic) + "'");
  if (lines.size() < 2) throw ParseError(p, 2, "missing count line 'V E T'");
  const auto counts = detail::split_ws(lines[1]);
  long long nv = 0, ne = 0, nt = 0;
  if (counts.size() != 3 || !detail::parse_number(counts[0], nv) ||
      !detail::parse_number(counts[1], ne) || !detail::parse_number(counts[2], nt) || nv < 0 ||
      ne < 0 || nt < 0)
    throw ParseError(p, 2, "count line must hold three non-negative integers 'V E T'");
  const auto available = static_cast<long long>(lines.size());
  if (nv > available || nt > available || available != 2 + nv + nt)
    throw ParseError(p, static_cast<int>(lines.size()),
                     "expected " + std::to_string(2 + nv + nt) + " lines, found " +
                         std::to_string(lines.size()));

  Mesh2D mesh;
  mesh.vertices.reserve(nv);
  for (long long i = 0; i < nv; ++i) {
    const int ln = static_cast<int>(3 + i);
    const auto tok = detail::split_ws(lines[2 + i]);
    double x = 0, y = 0;
    if (tok.size() != 2 || !detail::parse_number(tok[0], x) || !detail::parse_number(tok[1], y) ||
        !std::isfinite(x) || !std::isfinite(y))
      throw ParseError(p, ln, "vertex line must hold two finite numbers 'x y'");
    mesh.vertices.emplace_back(x, y);
  }
  for (long long t = 0; t < nt; ++t) {
    const int ln = static_cast<int>(3 + nv + t);
    const auto tok = detail::split_ws(lines[2 + nv + t]);
    std::array<int, 3> tri{};
    int tag = 0;
    if (tok.size() != 4 || !detail::parse_number(tok[0], tri[0]) ||
        !detail::parse_number(tok[1], tri[1]) || !detail::parse_number(tok[2], tri[2]) ||
        !detail::parse_number(tok[3], tag))
      throw ParseError(p, ln, "triangle line must hold four integers 'v0 v1 v2 tag'");
    for (int v : tri) {
      if (v < 0 || v >= nv)
        throw ParseError(p, ln, "triangle " + std::to_string(t) + " references vertex " +
                                    std::to_string(v) + " out of range");
    }
    if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2])
      throw ParseError(p, ln, "triangle " + std::to_string(t) + " has duplicate vertex indices");
    if (tag < 0) throw ParseError(p, ln, "triangle " + std::to_string(t) + " has negative tag");
    mesh.triangles.push_back(tri);
    mesh.tags.push_back(tag);
    if (!(mesh.signed_area(static_cast<int>(t)) > 0.0))
      throw ParseError(p, ln, "triangle " + std::to_string(t) +
                                  " has non-positive signed area (clockwise or degenerate)");
  }
  try {
    mesh = build_edges(std::move(mesh));
  } catch (const TopologyError& e) {
    throw ParseError(p, 0, std::string("topology: ") + e.what());
  }
  if (mesh.num_edges() != ne)
    throw ParseError(p, 2, "edge count " + std::to_string(ne) + " does not match rebuilt count " +
                               std::to_string(mesh.num_edges()));
  return mesh;
}

}  // namespace maglab
