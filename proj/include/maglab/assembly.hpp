// SPDX-License-Identifier: Apache-2.0

#pragma once

// Residuals, Jacobians and energies of the discrete formulations. Every
// residual is the exact gradient of the matching energy under the model's
// quadrature rule, and every Jacobian is assembled from symmetric element
// matrices in element order, so it is bitwise symmetric.

#include <array>
#include <vector>

#include "maglab/errors.hpp"
#include "maglab/fem.hpp"
#include "maglab/material.hpp"
#include "maglab/types.hpp"

namespace maglab {

struct Assembly {
  Vector residual;
  SparseMatrix jacobian;
};

namespace detail {

inline std::array<double, 3> edge_curls(const ElementGeometry& g) {
  std::array<double, 3> c{};
  for (int k = 0; k < 3; ++k) c[k] = 2.0 * cross(g.grad[k], g.grad[(k + 1) % 3]);
  return c;
}

inline std::array<double, 3> local_edge_coeffs(const Mesh2D& mesh, int t, const Vector& x) {
  std::array<double, 3> c{};
  for (int k = 0; k < 3; ++k) c[k] = mesh.tri_signs[t][k] * x[mesh.tri_edges[t][k]];
  return c;
}

inline void scatter_symmetric(std::vector<Triplet>& trips, const std::array<int, 3>& idx,
                              const std::array<int, 3>& sgn, const double (&local)[3][3]) {
  for (int k = 0; k < 3; ++k) {
    if (idx[k] < 0) continue;
    for (int l = 0; l < 3; ++l) {
      if (idx[l] < 0) continue;
      trips.emplace_back(idx[k], idx[l], sgn[k] * sgn[l] * local[k][l]);
    }
  }
}

inline SparseMatrix from_triplets(int n, std::vector<Triplet>& trips) {
  SparseMatrix m(n, n);
  m.setFromTriplets(trips.begin(), trips.end());
  m.makeCompressed();
  return m;
}

inline void require_positive_epsilon(double eps) {
  if (!(eps > 0.0) || !std::isfinite(eps))
    throw ParameterError("penalty parameter epsilon must be positive and finite");
}

/// Neumaier-compensated summation.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    carry_ += std::abs(sum_) >= std::abs(x) ? (sum_ - t) + x : (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + carry_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Penalty formulation, rescaled by epsilon:
//   E(h) = eps * int w*(h) + 1/2 int |curl h - j|^2

inline double penalty_energy(const Model& model, const Vector& h, double eps) {
  detail::require_positive_epsilon(eps);
  const Mesh2D& mesh = model.mesh();
  const QuadratureRule& rule = model.rule();
  detail::CompensatedSum material, constraint;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const ElementGeometry& g = model.geometry(t);
    const auto c = detail::local_edge_coeffs(mesh, t, h);
    const auto curls = detail::edge_curls(g);
    const double res = c[0] * curls[0] + c[1] * curls[1] + c[2] * curls[2] - model.current(t);
    constraint.add(0.5 * g.area * res * res);
    for (int q = 0; q < rule.size(); ++q) {
      const EdgeBasis W = edge_basis(g, rule.points[q]);
      const Vec2 hq = c[0] * W.values[0] + c[1] * W.values[1] + c[2] * W.values[2];
      material.add(2.0 * g.area * rule.weights[q] * model.law(t).profile(hq.norm()));
    }
  }
  return eps * material.value() + constraint.value();
}

inline Assembly assemble_penalty(const Model& model, const Vector& h, double eps,
                                 bool with_jacobian = true) {
  detail::require_positive_epsilon(eps);
  const Mesh2D& mesh = model.mesh();
  const QuadratureRule& rule = model.rule();
  const int ne = mesh.num_edges();
  if (h.size() != ne) throw ParameterError("assemble_penalty: state size does not match edge count");

  Assembly out;
  out.residual = Vector::Zero(ne);
  std::vector<Triplet> trips;
  if (with_jacobian) trips.reserve(9 * static_cast<std::size_t>(mesh.num_triangles()));

  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const ElementGeometry& g = model.geometry(t);
    const MaterialLaw& law = model.law(t);
    const auto c = detail::local_edge_coeffs(mesh, t, h);
    const auto curls = detail::edge_curls(g);
    const double res = c[0] * curls[0] + c[1] * curls[1] + c[2] * curls[2] - model.current(t);

    double r[3];
    double J[3][3];
    for (int k = 0; k < 3; ++k) {
      r[k] = g.area * res * curls[k];
      for (int l = 0; l < 3; ++l) J[k][l] = g.area * curls[k] * curls[l];
    }
    for (int q = 0; q < rule.size(); ++q) {
      const EdgeBasis W = edge_basis(g, rule.points[q]);
      const Vec2 hq = c[0] * W.values[0] + c[1] * W.values[1] + c[2] * W.values[2];
      const double w = eps * 2.0 * g.area * rule.weights[q];
      const Vec2 b = flux_from_field(law, hq);
      for (int k = 0; k < 3; ++k) r[k] += w * b.dot(W.values[k]);
      if (with_jacobian) {
        const Mat2 mu = differential_permeability(law, hq);
        for (int k = 0; k < 3; ++k) {
          const Vec2 muW = mu * W.values[k];
          for (int l = k; l < 3; ++l) J[k][l] += w * W.values[l].dot(muW);
        }
      }
    }
    for (int k = 0; k < 3; ++k) out.residual[mesh.tri_edges[t][k]] += mesh.tri_signs[t][k] * r[k];
    if (with_jacobian) {
      for (int k = 0; k < 3; ++k)
        for (int l = 0; l < k; ++l) J[k][l] = J[l][k];
      detail::scatter_symmetric(trips, mesh.tri_edges[t], mesh.tri_signs[t], J);
    }
  }
  if (with_jacobian) out.jacobian = detail::from_triplets(ne, trips);
  return out;
}

// ---------------------------------------------------------------------------
// Curl-curl blocks shared by the limit solver.

/// K_ef = <curl W_e, curl W_f>.
inline SparseMatrix curl_curl_matrix(const Model& model) {
  const Mesh2D& mesh = model.mesh();
  std::vector<Triplet> trips;
  trips.reserve(9 * static_cast<std::size_t>(mesh.num_triangles()));
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const ElementGeometry& g = model.geometry(t);
    const auto curls = detail::edge_curls(g);
    double J[3][3];
    for (int k = 0; k < 3; ++k)
      for (int l = 0; l < 3; ++l) J[k][l] = g.area * curls[k] * curls[l];
    detail::scatter_symmetric(trips, mesh.tri_edges[t], mesh.tri_signs[t], J);
  }
  return detail::from_triplets(mesh.num_edges(), trips);
}

/// f_e = <j, curl W_e>.
inline Vector curl_load(const Model& model) {
  const Mesh2D& mesh = model.mesh();
  Vector f = Vector::Zero(mesh.num_edges());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const ElementGeometry& g = model.geometry(t);
    const auto curls = detail::edge_curls(g);
    for (int k = 0; k < 3; ++k)
      f[mesh.tri_edges[t][k]] += mesh.tri_signs[t][k] * g.area * model.current(t) * curls[k];
  }
  return f;
}

/// G_ve = <W_e, grad phi_v> over the pinned nodal space, (V-1) x E.
inline SparseMatrix gradient_constraint_matrix(const Model& model, const DofMap& pinned) {
  const Mesh2D& mesh = model.mesh();
  const QuadratureRule& rule = model.rule();
  std::vector<Triplet> trips;
  trips.reserve(9 * static_cast<std::size_t>(mesh.num_triangles()));
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const ElementGeometry& g = model.geometry(t);
    double local[3][3] = {};  // [vertex][edge]
    for (int q = 0; q < rule.size(); ++q) {
      const EdgeBasis W = edge_basis(g, rule.points[q]);
      const double w = 2.0 * g.area * rule.weights[q];
      for (int v = 0; v < 3; ++v)
        for (int e = 0; e < 3; ++e) local[v][e] += w * W.values[e].dot(g.grad[v]);
    }
    for (int v = 0; v < 3; ++v) {
      const int row = pinned.index[t][v];
      if (row < 0) continue;
      for (int e = 0; e < 3; ++e)
        trips.emplace_back(row, mesh.tri_edges[t][e], mesh.tri_signs[t][e] * local[v][e]);
    }
  }
  SparseMatrix G(pinned.count, mesh.num_edges());
  G.setFromTriplets(trips.begin(), trips.end());
  G.makeCompressed();
  return G;
}

// ---------------------------------------------------------------------------
// Potential formulations: h = base - grad psi, minimize int w*(h).
// The base field is h_s for the reduced scalar potential and z_h for the
// limit system. psi lives on the pinned nodal space.

/// Base field sampled at quadrature points, index t * nq + q.
using QpField = std::vector<Vec2>;

inline QpField source_at_quadrature(const Model& model) {
  QpField out;
  const int nq = model.rule().size();
  out.reserve(static_cast<std::size_t>(model.mesh().num_triangles()) * nq);
  for (int t = 0; t < model.mesh().num_triangles(); ++t)
    for (int q = 0; q < nq; ++q) out.push_back(model.source_at_qp(t, q));
  return out;
}

inline QpField edge_field_at_quadrature(const Model& model, const Vector& coeffs) {
  const Mesh2D& mesh = model.mesh();
  const QuadratureRule& rule = model.rule();
  QpField out;
  out.reserve(static_cast<std::size_t>(mesh.num_triangles()) * rule.size());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto c = detail::local_edge_coeffs(mesh, t, coeffs);
    for (int q = 0; q < rule.size(); ++q) {
      const EdgeBasis W = edge_basis(model.geometry(t), rule.points[q]);
      out.push_back(c[0] * W.values[0] + c[1] * W.values[1] + c[2] * W.values[2]);
    }
  }
  return out;
}

namespace detail {

inline Vec2 local_gradient(const ElementGeometry& g, const DofMap& dofs, int t, const Vector& psi) {
  Vec2 grad = Vec2::Zero();
  for (int k = 0; k < 3; ++k) {
    const int i = dofs.index[t][k];
    if (i >= 0) grad += psi[i] * g.grad[k];
  }
  return grad;
}

}  // namespace detail

inline double potential_energy(const Model& model, const QpField& base, const DofMap& dofs,
                               const Vector& psi) {
  const Mesh2D& mesh = model.mesh();
  const QuadratureRule& rule = model.rule();
  const int nq = rule.size();
  detail::CompensatedSum e;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const ElementGeometry& g = model.geometry(t);
    const Vec2 grad = detail::local_gradient(g, dofs, t, psi);
    for (int q = 0; q < nq; ++q) {
      const Vec2 hq = base[static_cast<std::size_t>(t) * nq + q] - grad;
      e.add(2.0 * g.area * rule.weights[q] * model.law(t).profile(hq.norm()));
    }
  }
  return e.value();
}

/// residual_v = -<b(base - grad psi), grad phi_v>.
inline Assembly assemble_potential(const Model& model, const QpField& base, const DofMap& dofs,
                                   const Vector& psi, bool with_jacobian = true) {
  const Mesh2D& mesh = model.mesh();
  const QuadratureRule& rule = model.rule();
  const int nq = rule.size();
  if (psi.size() != dofs.count) throw ParameterError("assemble_potential: state size mismatch");
  if (base.size() != static_cast<std::size_t>(mesh.num_triangles()) * nq)
    throw ParameterError("assemble_potential: base field size mismatch");

  Assembly out;
  out.residual = Vector::Zero(dofs.count);
  std::vector<Triplet> trips;
  if (with_jacobian) trips.reserve(9 * static_cast<std::size_t>(mesh.num_triangles()));
  const std::array<int, 3> plus{1, 1, 1};

  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const ElementGeometry& g = model.geometry(t);
    const MaterialLaw& law = model.law(t);
    const Vec2 grad = detail::local_gradient(g, dofs, t, psi);
    double r[3] = {0, 0, 0};
    double J[3][3] = {};
    for (int q = 0; q < nq; ++q) {
      const Vec2 hq = base[static_cast<std::size_t>(t) * nq + q] - grad;
      const double w = 2.0 * g.area * rule.weights[q];
      const Vec2 b = flux_from_field(law, hq);
      for (int k = 0; k < 3; ++k) r[k] -= w * b.dot(g.grad[k]);
      if (with_jacobian) {
        const Mat2 mu = differential_permeability(law, hq);
        for (int k = 0; k < 3; ++k) {
          const Vec2 muG = mu * g.grad[k];
          for (int l = k; l < 3; ++l) J[k][l] += w * g.grad[l].dot(muG);
        }
      }
    }
    for (int k = 0; k < 3; ++k) {
      const int i = dofs.index[t][k];
      if (i >= 0) out.residual[i] += r[k];
    }
    if (with_jacobian) {
      for (int k = 0; k < 3; ++k)
        for (int l = 0; l < k; ++l) J[k][l] = J[l][k];
      detail::scatter_symmetric(trips, dofs.index[t], plus, J);
    }
  }
  if (with_jacobian) out.jacobian = detail::from_triplets(dofs.count, trips);
  return out;
}

inline Assembly assemble_scalar_potential(const Model& model, const Vector& psi,
                                          bool with_jacobian = true) {
  const DofMap dofs = DofMap::nodal_pinned(model.mesh());
  return assemble_potential(model, source_at_quadrature(model), dofs, psi, with_jacobian);
}

// ---------------------------------------------------------------------------
// Vector potential: b = curl a3 = (d_y a, -d_x a), a3 = 0 on the boundary.
//   E(a) = int w(curl a) - int j a
// Assembled on all vertices; callers restrict to interior vertices.

inline Vec2 rotated_gradient(const Vec2& g) { return Vec2(g.y(), -g.x()); }

inline Vec2 element_flux(const ElementGeometry& g, const std::array<int, 3>& tri, const Vector& a) {
  return a[tri[0]] * rotated_gradient(g.grad[0]) + a[tri[1]] * rotated_gradient(g.grad[1]) +
         a[tri[2]] * rotated_gradient(g.grad[2]);
}

inline double vector_potential_energy(const Model& model, const Vector& a) {
  const Mesh2D& mesh = model.mesh();
  detail::CompensatedSum e;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const ElementGeometry& g = model.geometry(t);
    const auto& tri = mesh.triangles[t];
    const Vec2 b = element_flux(g, tri, a);
    e.add(g.area * energy_density(model.law(t), b));
    e.add(-model.current(t) * g.area / 3.0 * (a[tri[0]] + a[tri[1]] + a[tri[2]]));
  }
  return e.value();
}

inline Assembly assemble_vector_potential(const Model& model, const Vector& a,
                                          bool with_jacobian = true) {
  const Mesh2D& mesh = model.mesh();
  const int nv = mesh.num_vertices();
  if (a.size() != nv) throw ParameterError("assemble_vector_potential: state size mismatch");
  Assembly out;
  out.residual = Vector::Zero(nv);
  std::vector<Triplet> trips;
  if (with_jacobian) trips.reserve(9 * static_cast<std::size_t>(mesh.num_triangles()));
  const std::array<int, 3> plus{1, 1, 1};

  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const ElementGeometry& g = model.geometry(t);
    const MaterialLaw& law = model.law(t);
    const auto& tri = mesh.triangles[t];
    const Vec2 b = element_flux(g, tri, a);
    const Vec2 h = field_from_flux(law, b);
    std::array<Vec2, 3> rg;
    for (int k = 0; k < 3; ++k) rg[k] = rotated_gradient(g.grad[k]);
    for (int k = 0; k < 3; ++k)
      out.residual[tri[k]] += g.area * h.dot(rg[k]) - model.current(t) * g.area / 3.0;
    if (with_jacobian) {
      const Mat2 nu = differential_reluctivity(law, h);
      double J[3][3];
      for (int k = 0; k < 3; ++k) {
        const Vec2 nuG = nu * rg[k];
        for (int l = k; l < 3; ++l) J[k][l] = g.area * rg[l].dot(nuG);
      }
      for (int k = 0; k < 3; ++k)
        for (int l = 0; l < k; ++l) J[k][l] = J[l][k];
      detail::scatter_symmetric(trips, tri, plus, J);
    }
  }
  if (with_jacobian) out.jacobian = detail::from_triplets(nv, trips);
  return out;
}

}  // namespace maglab
