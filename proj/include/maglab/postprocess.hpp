// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "maglab/assembly.hpp"
#include "maglab/errors.hpp"
#include "maglab/fem.hpp"
#include "maglab/material.hpp"

namespace maglab {

struct FieldSample {
  Vec2 h = Vec2::Zero();
  Vec2 b = Vec2::Zero();
  double curl_h = 0.0;
};

/// Reconstruct h, b and curl h at a point of element t.
///
/// For the two nodal formulations curl h is reported as the element current:
/// exact for the scalar potential (curl grad = 0 and curl h_s = j), and the
/// weakly imposed value for the vector potential.
inline FieldSample eval_field(const FieldSolution& sol, int t, const Barycentric& l) {
  const Model& model = *sol.model;
  const Mesh2D& mesh = model.mesh();
  const ElementGeometry& g = model.geometry(t);
  const MaterialLaw& law = model.law(t);
  FieldSample s;
  switch (sol.formulation) {
    case Formulation::penalty:
    case Formulation::limit: {
      const auto c = detail::local_edge_coeffs(mesh, t, sol.coefficients);
      const EdgeBasis W = edge_basis(g, l);
      s.h = c[0] * W.values[0] + c[1] * W.values[1] + c[2] * W.values[2];
      s.curl_h = c[0] * W.curls[0] + c[1] * W.curls[1] + c[2] * W.curls[2];
      s.b = flux_from_field(law, s.h);
      break;
    }
    case Formulation::scalar_potential: {
      const int pinned = mesh.first_boundary_vertex();
      Vec2 grad = Vec2::Zero();
      for (int k = 0; k < 3; ++k) {
        const int i = DofMap::pinned_index(mesh.triangles[t][k], pinned);
        if (i >= 0) grad += sol.coefficients[i] * g.grad[k];
      }
      const Vec2 x = g.point(l);
      s.h = source_field(model.source(), x.x(), x.y()) - grad;
      s.b = flux_from_field(law, s.h);
      s.curl_h = model.current(t);
      break;
    }
    case Formulation::vector_potential: {
      s.b = element_flux(g, mesh.triangles[t], sol.coefficients);
      s.h = field_from_flux(law, s.b);
      s.curl_h = model.current(t);
      break;
    }
  }
  return s;
}

enum class Quantity { h, b, curl_residual };

namespace detail {

inline double component(const FieldSample& s, Quantity q, double j, Vec2* out) {
  switch (q) {
    case Quantity::h: *out = s.h; return 0.0;
    case Quantity::b: *out = s.b; return 0.0;
    case Quantity::curl_residual: return s.curl_h - j;
  }
  return 0.0;
}

inline void require_valid(const FieldSolution& sol) {
  if (!sol.model) throw ParameterError("field solution has no model");
  if (sol.coefficients.size() != sol.expected_size())
    throw ParameterError("field solution size does not match its DOF map");
}

}  // namespace detail

/// Quadrature L2 norm over the domain.
inline double l2_norm(const FieldSolution& sol, Quantity quantity) {
  detail::require_valid(sol);
  const Model& model = *sol.model;
  const QuadratureRule& rule = model.rule();
  double acc = 0.0;
  for (int t = 0; t < model.mesh().num_triangles(); ++t) {
    const double area = model.geometry(t).area;
    for (int q = 0; q < rule.size(); ++q) {
      const FieldSample s = eval_field(sol, t, rule.points[q]);
      Vec2 v;
      const double c = detail::component(s, quantity, model.current(t), &v);
      acc += 2.0 * area * rule.weights[q] * (quantity == Quantity::curl_residual ? c * c : v.squaredNorm());
    }
  }
  return std::sqrt(acc);
}

inline bool same_mesh(const Mesh2D& a, const Mesh2D& b) {
  return a.vertices == b.vertices && a.triangles == b.triangles;
}

/// ||a - b|| / ||b|| for h or b, evaluated at the quadrature points of a's
/// model. Falls back to the absolute difference when ||b|| = 0.
inline double l2_error(const FieldSolution& a, const FieldSolution& b, Quantity quantity) {
  detail::require_valid(a);
  detail::require_valid(b);
  if (quantity == Quantity::curl_residual)
    throw ParameterError("l2_error compares h or b only");
  if (a.model != b.model && !same_mesh(a.model->mesh(), b.model->mesh()))
    throw ComparisonError("l2_error: solutions live on different meshes");
  const Model& model = *a.model;
  const QuadratureRule& rule = model.rule();
  double diff = 0.0, ref = 0.0;
  for (int t = 0; t < model.mesh().num_triangles(); ++t) {
    const double area = model.geometry(t).area;
    for (int q = 0; q < rule.size(); ++q) {
      const FieldSample sa = eval_field(a, t, rule.points[q]);
      const FieldSample sb = eval_field(b, t, rule.points[q]);
      const Vec2 va = quantity == Quantity::h ? sa.h : sa.b;
      const Vec2 vb = quantity == Quantity::h ? sb.h : sb.b;
      const double w = 2.0 * area * rule.weights[q];
      diff += w * (va - vb).squaredNorm();
      ref += w * vb.squaredNorm();
    }
  }
  return ref > 0.0 ? std::sqrt(diff / ref) : std::sqrt(diff);
}

/// max_v |<b, grad phi_v>| / (||b|| ||grad phi_v||) over the pinned nodal
/// space, for a flux given at the model's quadrature points.
template <class FluxAt>
double weak_divergence(const Model& model, FluxAt&& flux_at) {
  const Mesh2D& mesh = model.mesh();
  const QuadratureRule& rule = model.rule();
  const int nv = mesh.num_vertices();
  std::vector<double> moment(nv, 0.0), grad_sq(nv, 0.0);
  double b_sq = 0.0;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const ElementGeometry& g = model.geometry(t);
    const auto& tri = mesh.triangles[t];
    for (int q = 0; q < rule.size(); ++q) {
      const Vec2 b = flux_at(t, q);
      const double w = 2.0 * g.area * rule.weights[q];
      b_sq += w * b.squaredNorm();
      for (int k = 0; k < 3; ++k) moment[tri[k]] += w * b.dot(g.grad[k]);
    }
    for (int k = 0; k < 3; ++k) grad_sq[tri[k]] += g.area * g.grad[k].squaredNorm();
  }
  if (b_sq == 0.0) return 0.0;
  const int pinned = mesh.first_boundary_vertex();
  const double b_norm = std::sqrt(b_sq);
  double worst = 0.0;
  for (int v = 0; v < nv; ++v) {
    if (v == pinned || grad_sq[v] == 0.0) continue;
    worst = std::max(worst, std::abs(moment[v]) / (b_norm * std::sqrt(grad_sq[v])));
  }
  return worst;
}

/// Weak divergence of b(base - grad psi) for a potential formulation.
inline double weak_divergence_of_potential(const Model& model, const QpField& base, const DofMap& dofs,
                                           const Vector& psi) {
  const int nq = model.rule().size();
  int cached = -1;
  Vec2 grad = Vec2::Zero();
  return weak_divergence(model, [&](int t, int q) {
    if (t != cached) {
      grad = detail::local_gradient(model.geometry(t), dofs, t, psi);
      cached = t;
    }
    return flux_from_field(model.law(t), base[static_cast<std::size_t>(t) * nq + q] - grad);
  });
}

/// Weak Ampere residual of a vector-potential state (all vertices, zero on
/// the boundary): max over interior v of |<h, curl phi_v> - <j, phi_v>|
/// normalized by ||h|| ||curl phi_v||.
inline double weak_ampere_residual(const Model& model, const Vector& a) {
  const Mesh2D& mesh = model.mesh();
  const int nv = mesh.num_vertices();
  std::vector<double> r(nv, 0.0), grad_sq(nv, 0.0);
  double h_sq = 0.0;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const ElementGeometry& g = model.geometry(t);
    const auto& tri = mesh.triangles[t];
    const Vec2 h = field_from_flux(model.law(t), element_flux(g, tri, a));
    h_sq += g.area * h.squaredNorm();
    for (int k = 0; k < 3; ++k) {
      r[tri[k]] += g.area * h.dot(rotated_gradient(g.grad[k])) - model.current(t) * g.area / 3.0;
      grad_sq[tri[k]] += g.area * g.grad[k].squaredNorm();
    }
  }
  if (h_sq == 0.0) {
    double worst = 0.0;
    for (int v = 0; v < nv; ++v)
      if (!mesh.boundary_vertex[v]) worst = std::max(worst, std::abs(r[v]));
    return worst == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  }
  const double h_norm = std::sqrt(h_sq);
  double worst = 0.0;
  for (int v = 0; v < nv; ++v) {
    if (mesh.boundary_vertex[v] || grad_sq[v] == 0.0) continue;
    worst = std::max(worst, std::abs(r[v]) / (h_norm * std::sqrt(grad_sq[v])));
  }
  return worst;
}

/// Weak divergence of b = b(h) for an edge-space field h.
inline double weak_divergence_of_edge_field(const Model& model, const Vector& h) {
  const QpField hq = edge_field_at_quadrature(model, h);
  const int nq = model.rule().size();
  return weak_divergence(model, [&](int t, int q) {
    return flux_from_field(model.law(t), hq[static_cast<std::size_t>(t) * nq + q]);
  });
}

inline double weak_divergence_residual(const FieldSolution& sol) {
  detail::require_valid(sol);
  const Model& model = *sol.model;
  const QuadratureRule& rule = model.rule();
  return weak_divergence(model, [&](int t, int q) { return eval_field(sol, t, rule.points[q]).b; });
}

/// Per-element multiplier a3 = (j - curl h) / eps of a penalty solution.
inline Vector reconstruct_multiplier(const FieldSolution& sol, double eps) {
  detail::require_valid(sol);
  if (!(eps > 0.0)) throw ParameterError("reconstruct_multiplier: epsilon must be positive");
  if (sol.space() != SpaceKind::edge)
    throw ParameterError("reconstruct_multiplier: needs an edge-space solution");
  const Model& model = *sol.model;
  const Mesh2D& mesh = model.mesh();
  Vector a(mesh.num_triangles());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto c = detail::local_edge_coeffs(mesh, t, sol.coefficients);
    const auto curls = detail::edge_curls(model.geometry(t));
    const double curl_h = c[0] * curls[0] + c[1] * curls[1] + c[2] * curls[2];
    a[t] = (model.current(t) - curl_h) / eps;
  }
  return a;
}

/// L2 norm of a piecewise-constant element field.
inline double element_l2_norm(const Model& model, const Vector& per_element) {
  double acc = 0.0;
  for (int t = 0; t < model.mesh().num_triangles(); ++t)
    acc += model.geometry(t).area * per_element[t] * per_element[t];
  return std::sqrt(acc);
}

}  // namespace maglab
