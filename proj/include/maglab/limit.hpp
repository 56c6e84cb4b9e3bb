// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <utility>
#include <vector>

#include "maglab/assembly.hpp"
#include "maglab/errors.hpp"
#include "maglab/fem.hpp"
#include "maglab/postprocess.hpp"
#include "maglab/solve.hpp"

namespace maglab {

struct LimitSolution {
  std::shared_ptr<const Model> model;
  Vector z;    // edge space
  Vector psi;  // pinned nodal space
  Vector p;    // multiplier of z orthogonal to discrete gradients
  SolveTrace trace;
};

/// KKT matrix [K G^T; G 0] of the z-subproblem.
inline SparseMatrix limit_kkt_matrix(const Model& model) {
  const SparseMatrix K = curl_curl_matrix(model);
  const SparseMatrix G = gradient_constraint_matrix(model, DofMap::nodal_pinned(model.mesh()));
  const int ne = static_cast<int>(K.rows());
  const int nc = static_cast<int>(G.rows());
  std::vector<Triplet> trips;
  trips.reserve(K.nonZeros() + 2 * G.nonZeros());
  for (int k = 0; k < K.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(K, k); it; ++it) trips.emplace_back(it.row(), it.col(), it.value());
  for (int k = 0; k < G.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(G, k); it; ++it) {
      trips.emplace_back(ne + it.row(), it.col(), it.value());
      trips.emplace_back(it.col(), ne + it.row(), it.value());
    }
  }
  SparseMatrix A(ne + nc, ne + nc);
  A.setFromTriplets(trips.begin(), trips.end());
  A.makeCompressed();
  return A;
}

/// Solve <curl z, curl z'> = <j, curl z'> with z orthogonal to the
/// gradients of the pinned nodal space. Returns (z, p).
inline std::pair<Vector, Vector> solve_z(const Model& model) {
  const int ne = model.mesh().num_edges();
  const int nc = model.mesh().num_vertices() - 1;
  const Mesh2D& mesh = model.mesh();
  const int euler = mesh.num_vertices() - mesh.num_edges() + mesh.num_triangles();
  if (euler != 1)
    throw TopologyError("limit system needs a connected, simply connected mesh (V - E + T = " +
                        std::to_string(euler) + ")");
  if (model.source().is_zero()) return {Vector::Zero(ne), Vector::Zero(nc)};
  const SparseMatrix A = limit_kkt_matrix(model);
  Vector rhs = Vector::Zero(ne + nc);
  rhs.head(ne) = curl_load(model);
  Vector x;
  try {
    x = direct_solve(A, rhs);
  } catch (const RankError& e) {
    throw TopologyError(std::string("limit system is singular; is the domain simply connected? (") +
                        e.what() + ")");
  }
  return {x.head(ne), x.tail(nc)};
}

/// Newton solve of min int w*(z - grad psi) over the pinned nodal space.
inline std::pair<Vector, SolveTrace> solve_psi(const Model& model, const Vector& z,
                                               const NewtonConfig& cfg = {}) {
  if (z.size() != model.mesh().num_edges()) throw ParameterError("solve_psi: z has wrong size");
  const DofMap dofs = DofMap::nodal_pinned(model.mesh());
  const QpField base = edge_field_at_quadrature(model, z);
  NewtonProblem problem;
  problem.energy = [&](const Vector& psi) { return potential_energy(model, base, dofs, psi); };
  problem.assemble = [&](const Vector& psi) { return assemble_potential(model, base, dofs, psi); };
  problem.stationarity = [&](const Vector& psi) {
    return weak_divergence_of_potential(model, base, dofs, psi);
  };
  NewtonResult r = newton(problem, Vector::Zero(dofs.count), cfg);
  return {std::move(r.x), std::move(r.trace)};
}

inline LimitSolution solve_limit(std::shared_ptr<const Model> model, const NewtonConfig& cfg = {}) {
  LimitSolution out;
  out.model = std::move(model);
  auto [z, p] = solve_z(*out.model);
  out.z = std::move(z);
  out.p = std::move(p);
  auto [psi, trace] = solve_psi(*out.model, out.z, cfg);
  out.psi = std::move(psi);
  out.trace = std::move(trace);
  return out;
}

/// h = z - grad psi in the edge space.
inline FieldSolution limit_field(const LimitSolution& s) {
  const Mesh2D& mesh = s.model->mesh();
  FieldSolution out;
  out.formulation = Formulation::limit;
  out.model = s.model;
  out.coefficients = s.z - discrete_gradient(mesh, unpin(s.psi, mesh.first_boundary_vertex()));
  return out;
}

}  // namespace maglab
