// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "maglab/assembly.hpp"
#include "maglab/errors.hpp"
#include "maglab/fem.hpp"
#include "maglab/limit.hpp"
#include "maglab/material.hpp"
#include "maglab/postprocess.hpp"
#include "maglab/solve.hpp"

namespace maglab {

/// Physical penalty parameter for a dimensionless eps0 and length scale l.
inline double physical_epsilon(double eps0, double length_scale) {
  if (!(eps0 > 0.0)) throw ParameterError("epsilon0 must be positive");
  if (!(length_scale > 0.0)) throw ParameterError("length scale must be positive");
  return eps0 / (mu0 * length_scale * length_scale);
}

struct Solved {
  FieldSolution field;
  SolveTrace trace;
};

inline Solved solve_penalty(std::shared_ptr<const Model> model, double eps0, double length_scale,
                            const NewtonConfig& cfg = {}, const Vector* initial = nullptr) {
  const double eps = physical_epsilon(eps0, length_scale);
  const Model& m = *model;
  Vector x0 = Vector::Zero(m.mesh().num_edges());
  if (initial) {
    if (initial->size() != x0.size()) throw ParameterError("solve_penalty: initial guess has wrong size");
    x0 = *initial;
  }
  NewtonProblem problem;
  problem.energy = [&](const Vector& h) { return penalty_energy(m, h, eps); };
  problem.assemble = [&](const Vector& h) { return assemble_penalty(m, h, eps); };
  problem.stationarity = [&](const Vector& h) { return weak_divergence_of_edge_field(m, h); };
  NewtonResult r = newton(problem, std::move(x0), cfg);
  Solved out;
  out.field.formulation = Formulation::penalty;
  out.field.model = std::move(model);
  out.field.coefficients = std::move(r.x);
  out.field.epsilon0 = eps0;
  out.field.epsilon = eps;
  out.trace = std::move(r.trace);
  return out;
}

inline Solved solve_scalar_potential(std::shared_ptr<const Model> model, const NewtonConfig& cfg = {}) {
  const Model& m = *model;
  const DofMap dofs = DofMap::nodal_pinned(m.mesh());
  const QpField base = source_at_quadrature(m);
  NewtonProblem problem;
  problem.energy = [&](const Vector& psi) { return potential_energy(m, base, dofs, psi); };
  problem.assemble = [&](const Vector& psi) { return assemble_potential(m, base, dofs, psi); };
  problem.stationarity = [&](const Vector& psi) { return weak_divergence_of_potential(m, base, dofs, psi); };
  NewtonResult r = newton(problem, Vector::Zero(dofs.count), cfg);
  Solved out;
  out.field.formulation = Formulation::scalar_potential;
  out.field.model = std::move(model);
  out.field.coefficients = std::move(r.x);
  out.trace = std::move(r.trace);
  return out;
}

/// Vertices carrying vector-potential unknowns (all non-boundary vertices).
inline std::vector<int> interior_vertices(const Mesh2D& mesh) {
  std::vector<int> out;
  for (int v = 0; v < mesh.num_vertices(); ++v)
    if (!mesh.boundary_vertex[v]) out.push_back(v);
  return out;
}

/// Throws UnsupportedLawError unless every law used by the mesh has a
/// certified inverse.
inline void require_invertible_laws(const Model& model) {
  std::vector<bool> used(model.laws().size(), false);
  for (int tag : model.mesh().tags) used[tag] = true;
  for (std::size_t i = 0; i < used.size(); ++i) {
    if (!used[i]) continue;
    try {
      certify(model.laws()[i]);
    } catch (const CertificationError& e) {
      throw UnsupportedLawError("vector potential needs an invertible law for region tag " +
                                std::to_string(i) + ": " + e.what());
    }
  }
}

inline Solved solve_vector_potential(std::shared_ptr<const Model> model, const NewtonConfig& cfg = {}) {
  const Model& m = *model;
  require_invertible_laws(m);
  const int nv = m.mesh().num_vertices();
  const std::vector<int> interior = interior_vertices(m.mesh());
  const int n = static_cast<int>(interior.size());
  std::vector<int> reduced(nv, -1);
  for (int i = 0; i < n; ++i) reduced[interior[i]] = i;

  auto expand = [&](const Vector& x) {
    Vector a = Vector::Zero(nv);
    for (int i = 0; i < n; ++i) a[interior[i]] = x[i];
    return a;
  };
  NewtonProblem problem;
  problem.energy = [&](const Vector& x) { return vector_potential_energy(m, expand(x)); };
  problem.assemble = [&](const Vector& x) {
    Assembly full = assemble_vector_potential(m, expand(x));
    Assembly out;
    out.residual.resize(n);
    for (int i = 0; i < n; ++i) out.residual[i] = full.residual[interior[i]];
    std::vector<Triplet> trips;
    trips.reserve(full.jacobian.nonZeros());
    for (int k = 0; k < full.jacobian.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(full.jacobian, k); it; ++it) {
        const int r = reduced[it.row()], c = reduced[it.col()];
        if (r >= 0 && c >= 0) trips.emplace_back(r, c, it.value());
      }
    }
    out.jacobian.resize(n, n);
    out.jacobian.setFromTriplets(trips.begin(), trips.end());
    out.jacobian.makeCompressed();
    return out;
  };
  problem.stationarity = [&](const Vector& x) { return weak_ampere_residual(m, expand(x)); };
  Solved out;
  if (n == 0) {
    out.trace.rows.push_back({0, 0.0, 0.0, 0.0, 0});
    out.field.coefficients = Vector::Zero(nv);
  } else {
    NewtonResult r = newton(problem, Vector::Zero(n), cfg);
    out.field.coefficients = expand(r.x);
    out.trace = std::move(r.trace);
  }
  out.field.formulation = Formulation::vector_potential;
  out.field.model = std::move(model);
  return out;
}

inline Solved solve_limit_field(std::shared_ptr<const Model> model, const NewtonConfig& cfg = {}) {
  LimitSolution s = solve_limit(std::move(model), cfg);
  Solved out;
  out.field = limit_field(s);
  out.trace = std::move(s.trace);
  return out;
}

}  // namespace maglab
