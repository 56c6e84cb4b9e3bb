// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include <set>

#include "oracles.hpp"

using namespace maglab;
using Catch::Approx;

namespace {

const ElementGeometry reference = ElementGeometry::from_corners({0, 0}, {1, 0}, {0, 1});

double factorial(int n) { return n <= 1 ? 1.0 : n * factorial(n - 1); }

/// Edge interpolant of a constant field: tangential integral along lo -> hi.
Vector interpolate_constant(const Mesh2D& m, const Vec2& f) {
  Vector c(m.num_edges());
  for (int e = 0; e < m.num_edges(); ++e) c[e] = f.dot(m.vertices[m.edges[e][1]] - m.vertices[m.edges[e][0]]);
  return c;
}

FieldSolution edge_solution(std::shared_ptr<const Model> model, Vector c) {
  FieldSolution s;
  s.formulation = Formulation::penalty;
  s.model = std::move(model);
  s.coefficients = std::move(c);
  s.epsilon0 = 1.0;
  s.epsilon = 1.0;
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// Quadrature

TEST_CASE("quadrature rules integrate monomials to their declared degree", "[fem]") {
  for (const auto& rule : {QuadratureRule::degree2(), QuadratureRule::degree5()}) {
    double wsum = 0.0;
    for (double w : rule.weights) wsum += w;
    CHECK(wsum == Approx(0.5).epsilon(1e-15));
    bool next_degree_exact = true;
    for (int a = 0; a <= rule.degree + 1; ++a) {
      for (int b = 0; a + b <= rule.degree + 1; ++b) {
        // Reference triangle: integral of x^a y^b = a! b! / (a + b + 2)!.
        const double exact = factorial(a) * factorial(b) / factorial(a + b + 2);
        double q = 0.0;
        for (int k = 0; k < rule.size(); ++k)
          q += rule.weights[k] * std::pow(rule.points[k][1], a) * std::pow(rule.points[k][2], b);
        if (a + b <= rule.degree) CHECK(q == Approx(exact).epsilon(1e-14));
        else if (std::abs(q - exact) > 1e-14 * exact) next_degree_exact = false;
      }
    }
    CHECK_FALSE(next_degree_exact);
  }
  CHECK(QuadratureRule::with_points(3).size() == 3);
  CHECK(QuadratureRule::with_points(7).size() == 7);
  CHECK_THROWS_AS(QuadratureRule::with_points(4), ParameterError);
}

// ---------------------------------------------------------------------------
// Bases

TEST_CASE("edge basis curl on the reference triangle", "[fem]") {
  const EdgeBasis W = edge_basis(reference, {1.0 / 3, 1.0 / 3, 1.0 / 3});
  // 2 (grad l0 x grad l1) = 2 ((-1)(0) - (-1)(1)).
  CHECK(W.curls[0] == Approx(2.0));
  CHECK(W.curls[1] == Approx(2.0));
  CHECK(W.curls[2] == Approx(2.0));
}

TEST_CASE("edge basis curl is constant per element", "[fem]") {
  oracle::Rng rng(31);
  for (int i = 0; i < 20; ++i) {
    const auto g = ElementGeometry::from_corners({0, 0}, {rng.uniform(0.5, 2), rng.uniform(-0.3, 0.3)},
                                                 {rng.uniform(-0.5, 0.5), rng.uniform(0.5, 2)});
    const EdgeBasis a = edge_basis(g, {0.7, 0.2, 0.1});
    const EdgeBasis b = edge_basis(g, {0.1, 0.1, 0.8});
    for (int k = 0; k < 3; ++k) CHECK(a.curls[k] == Approx(b.curls[k]).epsilon(1e-14));
    // Curl from central differences of the field values.
    const double d = 1e-6;
    const Vec2 x = g.point({0.3, 0.3, 0.4});
    auto at = [&](const Vec2& p, int k) {
      // Barycentric coordinates of p.
      Barycentric l{};
      for (int m = 0; m < 3; ++m) l[m] = (m == 0 ? 1.0 : 0.0) + g.grad[m].dot(p - g.corners[0]);
      return edge_basis(g, l).values[k];
    };
    for (int k = 0; k < 3; ++k) {
      const double curl = (at(x + Vec2(d, 0), k).y() - at(x - Vec2(d, 0), k).y()) / (2 * d) -
                          (at(x + Vec2(0, d), k).x() - at(x - Vec2(0, d), k).x()) / (2 * d);
      CHECK(curl == Approx(a.curls[k]).epsilon(1e-6));
    }
  }
}

TEST_CASE("edge basis tangential moments are Kronecker deltas", "[fem]") {
  static const double gx[5] = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                               0.9061798459386640};
  static const double gw[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                               0.4786286704993665, 0.2369268850561891};
  oracle::Rng rng(32);
  for (int trial = 0; trial < 10; ++trial) {
    const auto g = trial == 0 ? reference
                              : ElementGeometry::from_corners({rng.uniform(-1, 0), rng.uniform(-1, 0)},
                                                              {rng.uniform(1, 2), rng.uniform(-1, 0)},
                                                              {rng.uniform(-1, 1), rng.uniform(1, 2)});
    for (int f = 0; f < 3; ++f) {
      const int i = f, j = (f + 1) % 3;
      const Vec2 tangent = g.corners[j] - g.corners[i];
      for (int k = 0; k < 3; ++k) {
        double moment = 0.0;
        for (int q = 0; q < 5; ++q) {
          const double s = 0.5 * (gx[q] + 1.0);
          Barycentric l{0, 0, 0};
          l[i] = 1.0 - s;
          l[j] = s;
          moment += 0.5 * gw[q] * edge_basis(g, l).values[k].dot(tangent);
        }
        CHECK(moment == Approx(k == f ? 1.0 : 0.0).margin(1e-14));
      }
    }
  }
}

TEST_CASE("P1 basis", "[fem]") {
  for (int v = 0; v < 3; ++v) {
    Barycentric l{0, 0, 0};
    l[v] = 1.0;
    const P1Basis p = p1_basis(reference, l);
    for (int k = 0; k < 3; ++k) CHECK(p.values[k] == (k == v ? 1.0 : 0.0));
  }
  for (const auto& l : QuadratureRule::degree5().points) {
    const P1Basis p = p1_basis(reference, l);
    CHECK(p.values[0] + p.values[1] + p.values[2] == Approx(1.0).epsilon(1e-15));
    CHECK((p.grads[0] + p.grads[1] + p.grads[2]).norm() == 0.0);
  }
  CHECK(reference.grad[0] == Vec2(-1.0, -1.0));
  CHECK(reference.grad[1] == Vec2(1.0, 0.0));
  CHECK(reference.grad[2] == Vec2(0.0, 1.0));
  CHECK(reference.area == 0.5);
}

TEST_CASE("degenerate and clockwise elements are rejected", "[fem]") {
  CHECK_THROWS_AS(ElementGeometry::from_corners({0, 0}, {1, 0}, {2, 0}), GeometryError);
  CHECK_THROWS_AS(ElementGeometry::from_corners({0, 0}, {0, 1}, {1, 0}), GeometryError);
}

TEST_CASE("gradients of hat functions lie in the edge space", "[fem][property]") {
  const auto model = oracle::grid(2, MaterialLaw::linear(mu0), MaterialLaw::linear(mu0), 0.0);
  const Mesh2D& m = model->mesh();
  for (int v = 0; v < m.num_vertices(); ++v) {
    Vector hat = Vector::Zero(m.num_vertices());
    hat[v] = 1.0;
    const Vector c = discrete_gradient(m, hat);
    // Coefficients are +1 / -1 on incident edges only.
    for (int e = 0; e < m.num_edges(); ++e) {
      const auto& ed = m.edges[e];
      const double expected = ed[1] == v ? 1.0 : ed[0] == v ? -1.0 : 0.0;
      CHECK(c[e] == expected);
    }
    const FieldSolution s = edge_solution(model, c);
    for (int t = 0; t < m.num_triangles(); ++t) {
      Vec2 grad = Vec2::Zero();
      for (int k = 0; k < 3; ++k)
        if (m.triangles[t][k] == v) grad = model->geometry(t).grad[k];
      for (const auto& l : QuadratureRule::degree5().points) {
        const FieldSample f = eval_field(s, t, l);
        CHECK((f.h - grad).norm() <= 1e-13 * std::max(1.0, grad.norm()));
        CHECK(std::abs(f.curl_h) <= 1e-12);
      }
    }
  }
}

// ---------------------------------------------------------------------------
// DOF maps

TEST_CASE("DOF map sizes and injectivity", "[fem]") {
  const Mesh2D m = generate(oracle::halves(0.25));
  const DofMap edge = DofMap::edge(m), nodal = DofMap::nodal(m), pinned = DofMap::nodal_pinned(m);
  CHECK(edge.count == m.num_edges());
  CHECK(nodal.count == m.num_vertices());
  CHECK(pinned.count == m.num_vertices() - 1);
  CHECK(pinned.pinned_vertex == m.first_boundary_vertex());
  for (const DofMap* d : {&edge, &nodal, &pinned}) {
    for (const auto& idx : d->index) {
      std::set<int> seen;
      for (int i : idx) {
        CHECK(i < d->count);
        if (i >= 0) CHECK(seen.insert(i).second);
      }
    }
  }
  std::set<int> used;
  for (const auto& idx : pinned.index)
    for (int i : idx)
      if (i >= 0) used.insert(i);
  CHECK(static_cast<int>(used.size()) == pinned.count);
}

// ---------------------------------------------------------------------------
// Source field

TEST_CASE("source field of a uniform current", "[fem]") {
  const double J = 3.5e6;
  const auto src = oracle::source(oracle::square(1.0), {J});
  oracle::Rng rng(33);
  for (int i = 0; i < 50; ++i) {
    const double x = rng.uniform(0, 1), y = rng.uniform(0, 1);
    const Vec2 h = source_field(src, x, y);
    CHECK(h.x() == 0.0);
    CHECK(h.y() == Approx(J * x).epsilon(1e-14));
  }
  CHECK(src.net_current() == Approx(J));
  CHECK_THROWS_AS(source_field(src, 1.5, 0.5), DomainError);
  CHECK_THROWS_AS(source_field(src, 0.5, -0.1), DomainError);

  const auto zero = oracle::source(oracle::square(1.0), {0.0});
  CHECK(zero.is_zero());
  CHECK(source_field(zero, 0.3, 0.4) == Vec2::Zero());
}

TEST_CASE("source field of balanced coils", "[fem]") {
  GeometrySpec g;
  g.bbox = {0, 1, 0, 1};
  g.mesh_size = 0.1;
  g.background_tag = 0;
  g.regions.push_back({1, {0.2, 0.3, 0.4, 0.6}, 0.0});
  g.regions.push_back({2, {0.7, 0.8, 0.4, 0.6}, 0.0});
  const double J = 1e7;
  const SourceSpec src{g, {0.0, J, -J}};
  CHECK(src.net_current() == Approx(0.0).margin(1e-6));
  // Piecewise integration along x in the coil band.
  auto oracle_H = [&](double x) {
    double H = 0.0;
    H += J * std::clamp(x - 0.2, 0.0, 0.1);
    H -= J * std::clamp(x - 0.7, 0.0, 0.1);
    return H;
  };
  for (double x : {0.0, 0.1, 0.25, 0.3, 0.5, 0.75, 0.8, 0.85, 1.0}) {
    CHECK(source_field(src, x, 0.5).y() == Approx(oracle_H(x)).margin(1e-6));
    CHECK(source_field(src, x, 0.9).y() == 0.0);
  }
  CHECK(source_field(src, 0.9, 0.5).y() == Approx(0.0).margin(1e-6));
  // d/dx H = j3 away from region boundaries.
  oracle::Rng rng(34);
  for (int i = 0; i < 200; ++i) {
    const double x = rng.uniform(0.01, 0.99), y = rng.uniform(0.01, 0.99), d = 1e-4;
    const bool near = std::abs(x - 0.2) < 2 * d || std::abs(x - 0.3) < 2 * d ||
                      std::abs(x - 0.7) < 2 * d || std::abs(x - 0.8) < 2 * d;
    if (near || std::abs(y - 0.4) < 2 * d || std::abs(y - 0.6) < 2 * d) continue;
    const double j = (y > 0.4 && y < 0.6) ? (x > 0.2 && x < 0.3 ? J : (x > 0.7 && x < 0.8 ? -J : 0.0)) : 0.0;
    const double curl = (source_field(src, x + d, y).y() - source_field(src, x - d, y).y()) / (2 * d) -
                        (source_field(src, x, y + d).x() - source_field(src, x, y - d).x()) / (2 * d);
    CHECK(curl == Approx(j).margin(1e-3 * J));
  }
}

TEST_CASE("benchmark coils carry balanced current", "[fem]") {
  const auto c = load_config(oracle::source_path("configs/benchmark.json"));
  const SourceSpec s = c.source();
  double plus = 0.0;
  for (const auto& r : c.regions)
    if (r.name == "coil_plus") plus = r.box.area() * 1e7;
  CHECK(plus > 0.0);
  CHECK(std::abs(s.net_current()) <= 1e-9 * plus);
}

// ---------------------------------------------------------------------------
// Evaluation and norms

TEST_CASE("zero solution evaluates to zero", "[fem]") {
  const auto model = oracle::two_triangles(MaterialLaw::default_iron(), 0.0);
  for (Formulation f : {Formulation::penalty, Formulation::limit, Formulation::scalar_potential,
                        Formulation::vector_potential}) {
    FieldSolution s;
    s.formulation = f;
    s.model = model;
    s.coefficients = Vector::Zero(s.expected_size());
    const FieldSample v = eval_field(s, 0, {0.2, 0.3, 0.5});
    CHECK(v.h == Vec2::Zero());
    CHECK(v.b == Vec2::Zero());
    CHECK(v.curl_h == 0.0);
    CHECK(l2_norm(s, Quantity::h) == 0.0);
    CHECK(l2_norm(s, Quantity::b) == 0.0);
    CHECK(l2_norm(s, Quantity::curl_residual) == 0.0);
    CHECK(weak_divergence_residual(s) == 0.0);
  }
}

TEST_CASE("edge interpolant of a constant field", "[fem]") {
  const auto model = oracle::grid(4, MaterialLaw::linear(mu0), MaterialLaw::linear(2 * mu0), 0.0);
  const FieldSolution s = edge_solution(model, interpolate_constant(model->mesh(), Vec2(1.0, 0.0)));
  for (int t = 0; t < model->mesh().num_triangles(); ++t) {
    for (const auto& l : QuadratureRule::degree5().points) {
      const FieldSample f = eval_field(s, t, l);
      CHECK((f.h - Vec2(1.0, 0.0)).norm() <= 1e-14);
      CHECK(std::abs(f.curl_h) <= 1e-13);
    }
  }
  CHECK(l2_norm(s, Quantity::h) == Approx(1.0).epsilon(1e-14));
  // b = mu0 on the left half, 2 mu0 on the right.
  CHECK(l2_norm(s, Quantity::b) == Approx(mu0 * std::sqrt(0.5 + 0.5 * 4.0)).epsilon(1e-14));
}

TEST_CASE("scalar potential with psi = 0 reproduces the source field", "[fem]") {
  const auto model = oracle::grid(2, MaterialLaw::default_iron(), MaterialLaw::linear(mu0), 2e3);
  FieldSolution s;
  s.formulation = Formulation::scalar_potential;
  s.model = model;
  s.coefficients = Vector::Zero(s.expected_size());
  for (int t = 0; t < model->mesh().num_triangles(); ++t)
    for (int q = 0; q < model->rule().size(); ++q)
      CHECK(eval_field(s, t, model->rule().points[q]).h == model->source_at_qp(t, q));
  // Any psi leaves curl h = j.
  oracle::Rng rng(35);
  s.coefficients = rng.vector(s.expected_size(), 100.0);
  CHECK(l2_norm(s, Quantity::curl_residual) <= 1e-12 * model->current_norm());
}

TEST_CASE("relative L2 error of a single-DOF bump", "[fem]") {
  const auto model = oracle::two_triangles(MaterialLaw::linear(mu0), 0.0);
  const Mesh2D& m = model->mesh();
  const FieldSolution ref = edge_solution(model, interpolate_constant(m, Vec2(1.0, 0.0)));
  int diagonal = -1;
  for (int e = 0; e < m.num_edges(); ++e)
    if (!m.boundary_edge[e]) diagonal = e;
  const double delta = 0.25;
  FieldSolution bumped = ref;
  bumped.coefficients[diagonal] += delta;
  // ||W_diag||^2 = 1/6 + 1/6 by hand (area/6 (|grad li|^2 + |grad lj|^2 - grad li . grad lj)).
  CHECK(l2_error(bumped, ref, Quantity::h) == Approx(delta / std::sqrt(3.0)).epsilon(1e-14));
  CHECK(l2_error(bumped, ref, Quantity::b) == Approx(delta / std::sqrt(3.0)).epsilon(1e-14));
  CHECK(l2_error(ref, ref, Quantity::h) == 0.0);
}

TEST_CASE("comparison across meshes is rejected", "[fem]") {
  const auto a = oracle::two_triangles(MaterialLaw::linear(mu0), 0.0);
  const auto b = oracle::grid(2, MaterialLaw::linear(mu0), MaterialLaw::linear(mu0), 0.0);
  const FieldSolution sa = edge_solution(a, Vector::Ones(a->mesh().num_edges()));
  const FieldSolution sb = edge_solution(b, Vector::Ones(b->mesh().num_edges()));
  CHECK_THROWS_AS(l2_error(sa, sb, Quantity::h), ComparisonError);
}

TEST_CASE("multiplier of an exact-constraint field is zero", "[fem]") {
  const auto model = oracle::grid(2, MaterialLaw::linear(mu0), MaterialLaw::linear(mu0), 0.0);
  const FieldSolution s = edge_solution(model, interpolate_constant(model->mesh(), Vec2(0.3, -2.0)));
  const Vector a = reconstruct_multiplier(s, 1e-3);
  CHECK(a.cwiseAbs().maxCoeff() <= 1e-9);
  CHECK_THROWS_AS(reconstruct_multiplier(s, 0.0), ParameterError);
}

TEST_CASE("multiplier identity holds by construction", "[fem][property]") {
  const auto model = oracle::grid(4, MaterialLaw::default_iron(), MaterialLaw::linear(mu0), 1e4, -3e3);
  oracle::Rng rng(36);
  for (int i = 0; i < 20; ++i) {
    const FieldSolution s = edge_solution(model, rng.vector(model->mesh().num_edges(), 1e3));
    const double eps = std::pow(10.0, rng.uniform(-6, 2));
    const double lhs = l2_norm(s, Quantity::curl_residual);
    const double rhs = eps * element_l2_norm(*model, reconstruct_multiplier(s, eps));
    CHECK(lhs == Approx(rhs).epsilon(1e-12));
  }
}
