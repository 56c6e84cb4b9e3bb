// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "maglab/errors.hpp"
#include "maglab/material.hpp"
#include "maglab/mesh.hpp"
#include "maglab/types.hpp"

namespace maglab {

using Barycentric = std::array<double, 3>;

/// Triangle quadrature on the reference element; weights sum to 1/2.
struct QuadratureRule {
  std::vector<Barycentric> points;
  std::vector<double> weights;
  int degree = 0;

  int size() const { return static_cast<int>(points.size()); }

  /// 3 interior points, exact to degree 2.
  static QuadratureRule degree2() {
    const double a = 2.0 / 3.0, b = 1.0 / 6.0;
    return {{{a, b, b}, {b, a, b}, {b, b, a}}, {1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0}, 2};
  }

  /// 7 points, exact to degree 5.
  static QuadratureRule degree5() {
    const double r = std::sqrt(15.0);
    const double a = (6.0 - r) / 21.0, b = (6.0 + r) / 21.0;
    const double wa = (155.0 - r) / 2400.0, wb = (155.0 + r) / 2400.0;
    return {{{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0},
             {a, a, 1.0 - 2.0 * a},
             {a, 1.0 - 2.0 * a, a},
             {1.0 - 2.0 * a, a, a},
             {b, b, 1.0 - 2.0 * b},
             {b, 1.0 - 2.0 * b, b},
             {1.0 - 2.0 * b, b, b}},
            {9.0 / 80.0, wa, wa, wa, wb, wb, wb},
            5};
  }

  static QuadratureRule with_points(int n) {
    if (n == 3) return degree2();
    if (n == 7) return degree5();
    throw ParameterError("quadrature: supported point counts are 3 and 7");
  }
};

inline double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

/// Affine triangle data: area and the constant barycentric gradients.
struct ElementGeometry {
  std::array<Vec2, 3> corners;
  std::array<Vec2, 3> grad;  // grad lambda_k, 1/m
  double area = 0.0;

  static ElementGeometry of(const Mesh2D& mesh, int t) {
    const auto& tri = mesh.triangles[t];
    return from_corners(mesh.vertices[tri[0]], mesh.vertices[tri[1]], mesh.vertices[tri[2]]);
  }

  static ElementGeometry from_corners(const Vec2& p0, const Vec2& p1, const Vec2& p2) {
    ElementGeometry g;
    g.corners = {p0, p1, p2};
    const double twice = cross(p1 - p0, p2 - p0);
    if (!(twice > 0.0) || !std::isfinite(twice))
      throw GeometryError("degenerate or clockwise element");
    g.area = 0.5 * twice;
    g.grad[0] = Vec2(p1.y() - p2.y(), p2.x() - p1.x()) / twice;
    g.grad[1] = Vec2(p2.y() - p0.y(), p0.x() - p2.x()) / twice;
    g.grad[2] = Vec2(p0.y() - p1.y(), p1.x() - p0.x()) / twice;
    return g;
  }

  Vec2 point(const Barycentric& l) const {
    return l[0] * corners[0] + l[1] * corners[1] + l[2] * corners[2];
  }
};

/// Lowest-order edge (Whitney) functions W_k = l_i grad l_j - l_j grad l_i for
/// local edge k = (i, j) = (k, k+1 mod 3), in local orientation.
struct EdgeBasis {
  std::array<Vec2, 3> values;  // 1/m
  std::array<double, 3> curls;  // 1/m^2, constant per element
};

inline EdgeBasis edge_basis(const ElementGeometry& g, const Barycentric& l) {
  EdgeBasis out;
  for (int k = 0; k < 3; ++k) {
    const int i = k, j = (k + 1) % 3;
    out.values[k] = l[i] * g.grad[j] - l[j] * g.grad[i];
    out.curls[k] = 2.0 * cross(g.grad[i], g.grad[j]);
  }
  return out;
}

struct P1Basis {
  std::array<double, 3> values;
  std::array<Vec2, 3> grads;  // 1/m
};

inline P1Basis p1_basis(const ElementGeometry& g, const Barycentric& l) { return {l, g.grad}; }

enum class SpaceKind { edge, nodal, nodal_pinned };

/// Element-to-global DOF tables. Unused slots (pinned vertex) hold -1.
struct DofMap {
  SpaceKind kind = SpaceKind::edge;
  int count = 0;
  std::vector<std::array<int, 3>> index;
  std::vector<std::array<int, 3>> sign;
  int pinned_vertex = -1;

  static DofMap edge(const Mesh2D& mesh) {
    DofMap m;
    m.kind = SpaceKind::edge;
    m.count = mesh.num_edges();
    m.index = mesh.tri_edges;
    m.sign = mesh.tri_signs;
    return m;
  }

  static DofMap nodal(const Mesh2D& mesh) {
    DofMap m;
    m.kind = SpaceKind::nodal;
    m.count = mesh.num_vertices();
    m.index = mesh.triangles;
    m.sign.assign(mesh.triangles.size(), {1, 1, 1});
    return m;
  }

  /// Nodal space with the lowest-index boundary vertex removed.
  static DofMap nodal_pinned(const Mesh2D& mesh) {
    DofMap m = nodal(mesh);
    m.kind = SpaceKind::nodal_pinned;
    m.pinned_vertex = mesh.first_boundary_vertex();
    m.count = mesh.num_vertices() - 1;
    for (auto& tri : m.index)
      for (int& v : tri) v = pinned_index(v, m.pinned_vertex);
    return m;
  }

  static int pinned_index(int v, int pinned) { return v == pinned ? -1 : (v < pinned ? v : v - 1); }
};

/// Piecewise-constant current density j3 per region tag (A/m^2) together
/// with the block geometry needed to integrate it along x.
struct SourceSpec {
  GeometrySpec geometry;
  std::vector<double> current_by_tag;

  double current(int tag) const {
    return tag >= 0 && tag < static_cast<int>(current_by_tag.size()) ? current_by_tag[tag] : 0.0;
  }

  bool is_zero() const {
    for (double j : current_by_tag)
      if (j != 0.0) return false;
    return true;
  }

  /// Net current through the cross-section, A.
  double net_current() const {
    const double bg = geometry.background_tag ? current(*geometry.background_tag) : 0.0;
    double total = bg * geometry.bbox.area();
    for (const auto& r : geometry.regions) total += (current(r.tag) - bg) * r.box.area();
    return total;
  }
};

/// h_s = (0, H(x, y)), H = integral of j3(t, y) dt from the left edge of the
/// box to x, so that d/dx h_s,y = j3 pointwise.
inline Vec2 source_field(const SourceSpec& src, double x, double y) {
  const Rect& bb = src.geometry.bbox;
  const double tol = 1e-12 * std::max(bb.width(), bb.height());
  if (x < bb.x0 - tol || x > bb.x1 + tol || y < bb.y0 - tol || y > bb.y1 + tol)
    throw DomainError("source_field: point outside the domain");
  const double bg = src.geometry.background_tag ? src.current(*src.geometry.background_tag) : 0.0;
  double H = bg * (x - bb.x0);
  for (const auto& r : src.geometry.regions) {
    if (!(y > r.box.y0 && y < r.box.y1)) continue;
    const double len = std::min(x, r.box.x1) - r.box.x0;
    if (len > 0.0) H += (src.current(r.tag) - bg) * len;
  }
  return Vec2(0.0, H);
}

/// Everything a discrete formulation needs that does not change during a
/// solve: mesh, per-element geometry, laws, currents and quadrature data.
class Model {
 public:
  Model(Mesh2D mesh, std::vector<MaterialLaw> laws_by_tag, SourceSpec source,
        QuadratureRule rule = QuadratureRule::degree2())
      : mesh_(std::move(mesh)),
        laws_(std::move(laws_by_tag)),
        source_(std::move(source)),
        rule_(std::move(rule)) {
    if (mesh_.edges.empty() && mesh_.num_triangles() > 0) mesh_ = build_edges(std::move(mesh_));
    const int nt = mesh_.num_triangles();
    geometry_.reserve(nt);
    element_current_.resize(nt);
    for (int t = 0; t < nt; ++t) {
      geometry_.push_back(ElementGeometry::of(mesh_, t));
      const int tag = mesh_.tags[t];
      if (tag < 0 || tag >= static_cast<int>(laws_.size()))
        throw ParameterError("no material law for region tag " + std::to_string(tag));
      element_current_[t] = source_.current(tag);
    }
    const int nq = rule_.size();
    source_at_qp_.resize(static_cast<std::size_t>(nt) * nq);
    for (int t = 0; t < nt; ++t) {
      for (int q = 0; q < nq; ++q) {
        const Vec2 x = geometry_[t].point(rule_.points[q]);
        source_at_qp_[static_cast<std::size_t>(t) * nq + q] = source_field(source_, x.x(), x.y());
      }
    }
  }

  const Mesh2D& mesh() const { return mesh_; }
  const ElementGeometry& geometry(int t) const { return geometry_[t]; }
  const MaterialLaw& law(int t) const { return laws_[mesh_.tags[t]]; }
  const std::vector<MaterialLaw>& laws() const { return laws_; }
  double current(int t) const { return element_current_[t]; }
  const SourceSpec& source() const { return source_; }
  const QuadratureRule& rule() const { return rule_; }
  const Vec2& source_at_qp(int t, int q) const {
    return source_at_qp_[static_cast<std::size_t>(t) * rule_.size() + q];
  }

  /// ||j||_{L2}.
  double current_norm() const {
    double s = 0.0;
    for (int t = 0; t < mesh_.num_triangles(); ++t)
      s += geometry_[t].area * element_current_[t] * element_current_[t];
    return std::sqrt(s);
  }

 private:
  Mesh2D mesh_;
  std::vector<MaterialLaw> laws_;
  SourceSpec source_;
  QuadratureRule rule_;
  std::vector<ElementGeometry> geometry_;
  std::vector<double> element_current_;
  std::vector<Vec2> source_at_qp_;
};

enum class Formulation { penalty, scalar_potential, limit, vector_potential };

inline std::string to_string(Formulation f) {
  switch (f) {
    case Formulation::penalty: return "penalty";
    case Formulation::scalar_potential: return "scalar";
    case Formulation::limit: return "limit";
    case Formulation::vector_potential: return "vector";
  }
  return "unknown";
}

inline std::optional<Formulation> parse_formulation(std::string_view s) {
  if (s == "penalty") return Formulation::penalty;
  if (s == "scalar" || s == "scalar_potential") return Formulation::scalar_potential;
  if (s == "limit") return Formulation::limit;
  if (s == "vector" || s == "vector_potential") return Formulation::vector_potential;
  return std::nullopt;
}

/// Discrete field in one of the four formulations.
///
/// Coefficient layout: penalty and limit hold edge DOFs of h (A); the scalar
/// potential holds psi on the pinned nodal space (A); the vector potential
/// holds a3 on all vertices (Wb/m), zero on the boundary.
struct FieldSolution {
  Formulation formulation = Formulation::penalty;
  std::shared_ptr<const Model> model;
  Vector coefficients;
  double epsilon0 = 0.0;
  double epsilon = 0.0;

  SpaceKind space() const {
    switch (formulation) {
      case Formulation::penalty:
      case Formulation::limit: return SpaceKind::edge;
      case Formulation::scalar_potential: return SpaceKind::nodal_pinned;
      case Formulation::vector_potential: return SpaceKind::nodal;
    }
    return SpaceKind::edge;
  }

  int expected_size() const {
    const Mesh2D& m = model->mesh();
    switch (space()) {
      case SpaceKind::edge: return m.num_edges();
      case SpaceKind::nodal: return m.num_vertices();
      case SpaceKind::nodal_pinned: return m.num_vertices() - 1;
    }
    return 0;
  }
};

/// Edge coefficients of grad(phi) for nodal values phi: the tangential
/// integral along (lo -> hi) is phi(hi) - phi(lo).
inline Vector discrete_gradient(const Mesh2D& mesh, const Vector& nodal) {
  Vector out(mesh.num_edges());
  for (int e = 0; e < mesh.num_edges(); ++e)
    out[e] = nodal[mesh.edges[e][1]] - nodal[mesh.edges[e][0]];
  return out;
}

/// Expand a pinned-space vector to all vertices (pinned value zero).
inline Vector unpin(const Vector& pinned, int pinned_vertex) {
  Vector full(pinned.size() + 1);
  for (int v = 0; v < full.size(); ++v) {
    const int i = DofMap::pinned_index(v, pinned_vertex);
    full[v] = i < 0 ? 0.0 : pinned[i];
  }
  return full;
}

}  // namespace maglab
