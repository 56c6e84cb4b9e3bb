// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "oracles.hpp"

using namespace maglab;
using Catch::Approx;

namespace {

MaterialLaw synthetic_table() {
  // Samples of the default atan law, as in data/bh_synthetic.csv.
  return MaterialLaw::tabulated(load_bh(oracle::source_path("data/bh_synthetic.csv")));
}

std::vector<MaterialLaw> shipped_laws() {
  return {MaterialLaw::linear(mu0), MaterialLaw::linear(1000.0 * mu0), MaterialLaw::default_iron(),
          synthetic_table()};
}

}  // namespace

// ---------------------------------------------------------------------------
// coenergy

TEST_CASE("coenergy of the linear law is mu0/2 s^2", "[material]") {
  const auto law = MaterialLaw::linear(mu0);
  CHECK(coenergy(law, 1000.0) == Approx(0.5 * mu0 * 1e6).epsilon(1e-15));
  CHECK(coenergy(law, 1000.0) == Approx(0.6283).epsilon(1e-4));
}

TEST_CASE("coenergy vanishes at zero field", "[material]") {
  for (const auto& law : shipped_laws()) CHECK(coenergy(law, 0.0) == 0.0);
}

TEST_CASE("tabulated coenergy integrates the piecewise-linear curve", "[material]") {
  const auto law = MaterialLaw::tabulated(BHTable({0.0, 1000.0, 2000.0}, {0.0, 1.0, 1.5}));
  // Trapezoid sums per segment.
  double expected = 0.0;
  const std::vector<double> h{0, 1000, 2000}, b{0, 1.0, 1.5};
  for (int i = 0; i < 2; ++i) expected += 0.5 * (h[i + 1] - h[i]) * (b[i] + b[i + 1]);
  CHECK(expected == 1750.0);
  CHECK(coenergy(law, 2000.0) == Approx(expected).epsilon(1e-14));
  // Past the last sample the slope is mu_ext.
  CHECK(coenergy(law, 3000.0) == Approx(1750.0 + 1000.0 * 1.5 + 0.5 * mu0 * 1e6).epsilon(1e-14));
}

TEST_CASE("coenergy rejects negative magnitudes", "[material]") {
  for (const auto& law : shipped_laws()) CHECK_THROWS_AS(coenergy(law, -1.0), DomainError);
}

TEST_CASE("coenergy equals the integral of |b|", "[material][property]") {
  for (const auto& law : shipped_laws()) {
    for (double s : {1e-3, 0.7, 250.0, 500.0, 1234.5, 2e4, 1e5}) {
      // Panels aligned with table knots keep the quadrature exact per piece.
      double integral = 0.0;
      if (law.kind() == MaterialLaw::Kind::tabulated) {
        const auto& t = std::get<TabulatedLaw>(law.variant()).table;
        double a = 0.0;
        for (std::size_t k = 1; k <= t.size() && a < s; ++k) {
          const double b = k < t.size() ? std::min(s, t.h()[k]) : s;
          integral += oracle::integrate([&](double x) { return law.profile_d1(x); }, a, b, 4);
          a = b;
        }
      } else {
        integral = oracle::integrate([&](double x) { return law.profile_d1(x); }, 0.0, s, 400);
      }
      CHECK(coenergy(law, s) == Approx(integral).epsilon(1e-8));
    }
  }
}

// ---------------------------------------------------------------------------
// flux_from_field

TEST_CASE("flux of the linear law", "[material]") {
  const Vec2 b = flux_from_field(MaterialLaw::linear(mu0), Vec2(1000.0, 0.0));
  CHECK(b.x() == Approx(mu0 * 1000.0).epsilon(1e-15));
  CHECK(b.x() == Approx(1.2566e-3).epsilon(1e-4));
  CHECK(b.y() == 0.0);
}

TEST_CASE("flux vanishes at zero field", "[material]") {
  for (const auto& law : shipped_laws()) CHECK(flux_from_field(law, Vec2::Zero()) == Vec2::Zero());
}

TEST_CASE("atan flux at the knee", "[material]") {
  const double b_s = 1.8, h0 = 500.0;
  const auto law = MaterialLaw::atan_saturation(mu0, b_s, h0);
  const Vec2 b = flux_from_field(law, Vec2(h0, 0.0));
  CHECK(b.x() == Approx(mu0 * h0 + b_s / 2.0).epsilon(1e-14));
  CHECK(b.y() == 0.0);
}

TEST_CASE("flux is continuous across the small-field cutoff", "[material][property]") {
  for (const auto& law : shipped_laws()) {
    const double s = law.s_min();
    const Vec2 dir = Vec2(3.0, 4.0).normalized();
    const Vec2 below = flux_from_field(law, (1.0 - 1e-6) * s * dir);
    const Vec2 above = flux_from_field(law, (1.0 + 1e-6) * s * dir);
    CHECK((above - below).norm() <= 1e-4 * above.norm());
  }
}

// ---------------------------------------------------------------------------
// differential_permeability

TEST_CASE("differential permeability of the linear law is mu I", "[material]") {
  const auto law = MaterialLaw::linear(mu0);
  oracle::Rng rng(11);
  for (int i = 0; i < 20; ++i)
    CHECK((differential_permeability(law, rng.vec(1e5)) - mu0 * Mat2::Identity()).norm() <= 1e-20);
}

TEST_CASE("differential permeability at zero is isotropic", "[material]") {
  for (const auto& law : shipped_laws()) {
    const Mat2 D = differential_permeability(law, Vec2::Zero());
    CHECK((D - law.profile_d2(0.0) * Mat2::Identity()).norm() == 0.0);
  }
}

TEST_CASE("atan differential permeability at the knee", "[material]") {
  const double b_s = 1.8, h0 = 500.0, pi = std::numbers::pi;
  const auto law = MaterialLaw::atan_saturation(mu0, b_s, h0);
  const Mat2 D = differential_permeability(law, Vec2(h0, 0.0));
  CHECK(D(0, 0) == Approx(mu0 + b_s / (pi * h0)).epsilon(1e-14));
  CHECK(D(1, 1) == Approx(mu0 + b_s / (2.0 * h0)).epsilon(1e-14));
  CHECK(D(0, 1) == 0.0);
  CHECK(D(1, 0) == 0.0);
  const double step = 1e-4 * h0;
  for (int axis = 0; axis < 2; ++axis) {
    const Vec2 fd = oracle::fd_flux_column(law, Vec2(h0, 0.0), axis, step);
    CHECK((fd - D.col(axis)).norm() <= 1e-6 * D.col(axis).norm());
  }
}

TEST_CASE("differential permeability matches finite differences of the flux", "[material][property]") {
  oracle::Rng rng(12);
  for (const auto& law : {MaterialLaw::default_iron(), MaterialLaw::linear(mu0),
                          MaterialLaw::atan_saturation(2.0 * mu0, 1.2, 80.0)}) {
    const double h0 = law.s_min() / 1e-10;
    for (int i = 0; i < 500; ++i) {
      const Vec2 h = rng.vec(1e5);
      if (h.norm() < 2.0 * law.s_min()) continue;
      const double step = 1e-4 * std::max(h.norm(), h0);
      const Mat2 D = differential_permeability(law, h);
      for (int axis = 0; axis < 2; ++axis) {
        const Vec2 fd = oracle::fd_flux_column(law, h, axis, step);
        CHECK((fd - D.col(axis)).norm() <= 1e-6 * D.norm());
      }
    }
  }
}

TEST_CASE("tabulated differential permeability uses the right slope", "[material]") {
  const auto law = MaterialLaw::tabulated(BHTable({0.0, 1000.0, 2000.0}, {0.0, 1.0, 1.5}));
  // Along h the tensor carries w''; inside a segment it is that segment's slope.
  CHECK(differential_permeability(law, Vec2(1500.0, 0.0))(0, 0) == Approx(5e-4));
  CHECK(differential_permeability(law, Vec2(1000.0, 0.0))(0, 0) == Approx(5e-4));
  CHECK(differential_permeability(law, Vec2(2500.0, 0.0))(0, 0) == Approx(mu0));
}

TEST_CASE("differential reluctivity inverts the permeability", "[material]") {
  oracle::Rng rng(13);
  for (const auto& law : shipped_laws()) {
    for (int i = 0; i < 50; ++i) {
      const Vec2 h = rng.vec(1e5);
      const Mat2 P = differential_permeability(law, h) * differential_reluctivity(law, h);
      CHECK((P - Mat2::Identity()).norm() <= 1e-12);
    }
  }
}

// ---------------------------------------------------------------------------
// chord_permeability

TEST_CASE("chord permeability", "[material]") {
  CHECK(chord_permeability(MaterialLaw::linear(3.0 * mu0), 0.0) == 3.0 * mu0);
  CHECK(chord_permeability(MaterialLaw::linear(3.0 * mu0), 1234.0) == Approx(3.0 * mu0));

  const double b_s = 1.8, h0 = 500.0;
  const auto iron = MaterialLaw::atan_saturation(mu0, b_s, h0);
  const double limit = mu0 + 2.0 * b_s / (std::numbers::pi * h0);
  CHECK(chord_permeability(iron, 0.0) == Approx(limit).epsilon(1e-14));
  CHECK(chord_permeability(iron, 1e-6) == Approx(limit).epsilon(1e-12));

  const auto table = MaterialLaw::tabulated(BHTable({0.0, 1000.0}, {0.0, 1.0}));
  CHECK(chord_permeability(table, 500.0) == Approx(1e-3).epsilon(1e-14));
  CHECK_THROWS_AS(chord_permeability(table, -1.0), DomainError);
}

// ---------------------------------------------------------------------------
// field_from_flux

TEST_CASE("linear inverse law", "[material]") {
  const Vec2 h = field_from_flux(MaterialLaw::linear(mu0), Vec2(mu0 * 1000.0, 0.0));
  CHECK(h.x() == Approx(1000.0).epsilon(1e-15));
  CHECK(h.y() == 0.0);
  for (const auto& law : shipped_laws()) CHECK(field_from_flux(law, Vec2::Zero()) == Vec2::Zero());
}

TEST_CASE("inverse law rejects non-finite flux", "[material]") {
  const auto law = MaterialLaw::default_iron();
  CHECK_THROWS_AS(field_from_flux(law, Vec2(NAN, 0.0)), DomainError);
  CHECK_THROWS_AS(field_from_flux(law, Vec2(0.0, INFINITY)), DomainError);
}

TEST_CASE("Legendre roundtrip", "[material][property]") {
  oracle::Rng rng(14);
  for (const auto& law : shipped_laws()) {
    for (int i = 0; i < 100; ++i) {
      const Vec2 h = rng.vec(1e5);
      const Vec2 back = field_from_flux(law, flux_from_field(law, h));
      CHECK((back - h).norm() <= 1e-10 * std::max(h.norm(), 1e-300));
    }
  }
}

TEST_CASE("energy density is the Legendre dual of the coenergy", "[material][property]") {
  oracle::Rng rng(15);
  for (const auto& law : shipped_laws()) {
    for (int i = 0; i < 100; ++i) {
      const Vec2 h = rng.vec(1e5);
      const Vec2 b = flux_from_field(law, h);
      const double w = energy_density(law, b);
      // Fenchel equality at the matching pair, inequality elsewhere.
      CHECK(w == Approx(b.dot(h) - coenergy(law, h)).epsilon(1e-9).margin(1e-12));
      const Vec2 other = rng.vec(1e5);
      CHECK(w >= b.dot(other) - coenergy(law, other) - 1e-9 * std::abs(w));
    }
  }
}

// ---------------------------------------------------------------------------
// certify

TEST_CASE("certificates of the analytic laws", "[material]") {
  const auto lin = certify(MaterialLaw::linear(mu0));
  CHECK(lin.gamma == mu0);
  CHECK(lin.lipschitz == mu0);

  const double b_s = 1.8, h0 = 500.0;
  const auto at = certify(MaterialLaw::atan_saturation(mu0, b_s, h0));
  CHECK(at.gamma == mu0);
  CHECK(at.lipschitz == mu0 + 2.0 * b_s / (std::numbers::pi * h0));
}

TEST_CASE("certificate of tabulated data scans all slopes", "[material]") {
  const auto c = certify(MaterialLaw::tabulated(BHTable({0.0, 1000.0, 2000.0}, {0.0, 1.0, 1.2}), mu0));
  CHECK(c.gamma == Approx(std::min({1e-3, 2e-4, mu0})));
  CHECK(c.lipschitz == Approx(std::max({1e-3, 2e-4, mu0})));
  CHECK(c.gamma == Approx(mu0));
  CHECK(c.lipschitz == Approx(1e-3));
}

TEST_CASE("non-monotone data names the offending interval", "[material]") {
  const auto law = MaterialLaw::tabulated(BHTable({0.0, 1000.0, 2000.0}, {0.0, 1.0, 0.9}));
  try {
    certify(law);
    FAIL("expected CertificationError");
  } catch (const CertificationError& e) {
    CHECK_THAT(e.what(), Catch::Matchers::ContainsSubstring("[1000, 2000]"));
  }
  CHECK_THROWS_AS(certify(MaterialLaw::tabulated(BHTable({0.0, 1.0}, {0.0, 1.0}), 0.0)),
                  CertificationError);
  CHECK_THROWS_AS(certify(MaterialLaw::linear(0.0)), CertificationError);
}

TEST_CASE("structural table invariants", "[material]") {
  CHECK_THROWS_AS(BHTable({0.0}, {0.0}), ParameterError);
  CHECK_THROWS_AS(BHTable({1.0, 2.0}, {0.0, 1.0}), ParameterError);
  CHECK_THROWS_AS(BHTable({0.0, 2.0, 2.0}, {0.0, 1.0, 1.5}), ParameterError);
  CHECK_THROWS_AS(BHTable({0.0, NAN}, {0.0, 1.0}), ParameterError);
  CHECK_THROWS_AS(MaterialLaw::tabulated(BHTable({0.0, 1.0}, {0.0, 1.0}), -mu0), ParameterError);
  CHECK_THROWS_AS(MaterialLaw::atan_saturation(mu0, 1.0, 0.0), ParameterError);
}

TEST_CASE("certified laws satisfy strong monotonicity and Lipschitz bounds", "[material][property]") {
  oracle::Rng rng(16);
  for (const auto& law : shipped_laws()) {
    const Certificate c = certify(law);
    for (int i = 0; i < 10000; ++i) {
      const Vec2 u = rng.vec(1e5), v = rng.vec(1e5);
      const Vec2 du = u - v;
      const Vec2 db = flux_from_field(law, u) - flux_from_field(law, v);
      const double slack = 1e-12 * (c.lipschitz * du.squaredNorm() + 1e-300);
      CHECK(db.dot(du) >= c.gamma * du.squaredNorm() - slack);
      CHECK(db.norm() <= c.lipschitz * du.norm() * (1.0 + 1e-12));
    }
  }
}
