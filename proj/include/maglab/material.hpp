// SPDX-License-Identifier: Apache-2.0

#pragma once

// Isotropic anhysteretic material laws described by the scalar coenergy
// profile w(s), s = |h|, with b = w'(|h|) h/|h|.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "maglab/errors.hpp"
#include "maglab/types.hpp"

namespace maglab {

/// Sampled B-H curve, interpolated piecewise linearly.
///
/// Construction enforces the structural invariants (at least two samples,
/// first sample at the origin, finite values, strictly increasing h).
/// Monotonicity of b is a material property and is checked by certify() and
/// by the CSV loader, so that a non-monotone table can still be represented
/// and reported precisely.
class BHTable {
 public:
  BHTable() = default;

  BHTable(std::vector<double> h, std::vector<double> b)
      : h_(std::move(h)), b_(std::move(b)) {
    if (h_.size() != b_.size()) throw ParameterError("BHTable: h and b sizes differ");
    if (h_.size() < 2) throw ParameterError("BHTable: at least two samples required");
    for (std::size_t i = 0; i < h_.size(); ++i) {
      if (!std::isfinite(h_[i]) || !std::isfinite(b_[i]))
        throw ParameterError("BHTable: non-finite sample " + std::to_string(i));
    }
    if (h_[0] != 0.0 || b_[0] != 0.0)
      throw ParameterError("BHTable: first sample must be (0, 0)");
    for (std::size_t i = 1; i < h_.size(); ++i) {
      if (!(h_[i] > h_[i - 1]))
        throw ParameterError("BHTable: h not strictly increasing at sample " +
                             std::to_string(i));
    }
  }

  std::size_t size() const { return h_.size(); }
  const std::vector<double>& h() const { return h_; }
  const std::vector<double>& b() const { return b_; }

  /// Slope of segment i (between samples i and i+1), H/m.
  double slope(std::size_t i) const { return (b_[i + 1] - b_[i]) / (h_[i + 1] - h_[i]); }

  friend bool operator==(const BHTable&, const BHTable&) = default;

 private:
  std::vector<double> h_;
  std::vector<double> b_;
};

/// b = mu h.
struct LinearLaw {
  double mu = mu0;
};

/// |b| = mu0 s + (2 b_s / pi) atan(s / h0): linear background plus a smooth
/// saturating part of amplitude b_s with knee at h0.
struct AtanSaturationLaw {
  double mu0 = maglab::mu0;
  double b_s = 1.8;
  double h0 = 500.0;
};

/// Piecewise-linear B-H data with constant slope mu_ext past the last sample.
struct TabulatedLaw {
  BHTable table;
  double mu_ext = mu0;
};

/// Strong monotonicity (gamma) and Lipschitz (L) constants of b(h), H/m.
struct Certificate {
  double gamma = 0.0;
  double lipschitz = 0.0;
};

class MaterialLaw {
 public:
  enum class Kind { linear, atan_saturation, tabulated };

  static MaterialLaw linear(double mu) {
    if (!std::isfinite(mu)) throw ParameterError("linear law: non-finite permeability");
    return MaterialLaw(LinearLaw{mu}, 1.0);
  }

  static MaterialLaw atan_saturation(double mu_background, double b_s, double h0) {
    if (!std::isfinite(mu_background) || !std::isfinite(b_s) || !std::isfinite(h0))
      throw ParameterError("atan law: non-finite parameter");
    if (!(h0 > 0.0)) throw ParameterError("atan law: knee field h0 must be positive");
    if (b_s < 0.0) throw ParameterError("atan law: saturation flux b_s must be non-negative");
    return MaterialLaw(AtanSaturationLaw{mu_background, b_s, h0}, h0);
  }

  /// Default nonlinear law shipped with the benchmark.
  static MaterialLaw default_iron() { return atan_saturation(maglab::mu0, 1.8, 500.0); }

  static MaterialLaw tabulated(BHTable table, double mu_ext = maglab::mu0) {
    if (!std::isfinite(mu_ext) || mu_ext < 0.0)
      throw ParameterError("tabulated law: extrapolation slope must be finite and >= 0");
    const double scale = table.h()[1];
    return MaterialLaw(TabulatedLaw{std::move(table), mu_ext}, scale);
  }

  Kind kind() const { return static_cast<Kind>(law_.index()); }
  const auto& variant() const { return law_; }

  /// Below this field magnitude h/|h| is replaced by its linearization.
  double s_min() const { return s_min_; }

  /// w(s): coenergy profile, J/m^3.
  double profile(double s) const {
    return std::visit([s](const auto& law) { return value(law, s); }, law_);
  }
  /// w'(s) = |b| at |h| = s, T.
  double profile_d1(double s) const {
    return std::visit([s](const auto& law) { return d1(law, s); }, law_);
  }
  /// w''(s), H/m. Right derivative at table knots.
  double profile_d2(double s) const {
    return std::visit([s](const auto& law) { return d2(law, s); }, law_);
  }

 private:
  template <class Law>
  MaterialLaw(Law law, double h_scale) : law_(std::move(law)), s_min_(1e-10 * h_scale) {}

  static double value(const LinearLaw& l, double s) { return 0.5 * l.mu * s * s; }
  static double d1(const LinearLaw& l, double s) { return l.mu * s; }
  static double d2(const LinearLaw& l, double) { return l.mu; }

  static double value(const AtanSaturationLaw& l, double s) {
    const double x = s / l.h0;
    return 0.5 * l.mu0 * s * s +
           (2.0 * l.b_s / std::numbers::pi) * (s * std::atan(x) - 0.5 * l.h0 * std::log1p(x * x));
  }
  static double d1(const AtanSaturationLaw& l, double s) {
    return l.mu0 * s + (2.0 * l.b_s / std::numbers::pi) * std::atan(s / l.h0);
  }
  static double d2(const AtanSaturationLaw& l, double s) {
    const double x = s / l.h0;
    return l.mu0 + (2.0 * l.b_s / (std::numbers::pi * l.h0)) / (1.0 + x * x);
  }

  // Segment index for s: the last i with h_i <= s (last sample => extrapolation).
  static std::size_t segment(const TabulatedLaw& l, double s) {
    const auto& h = l.table.h();
    const auto it = std::upper_bound(h.begin(), h.end(), s);
    return static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - h.begin() - 1, 0));
  }
  static double seg_slope(const TabulatedLaw& l, std::size_t i) {
    return i + 1 < l.table.size() ? l.table.slope(i) : l.mu_ext;
  }
  static double value(const TabulatedLaw& l, double s) {
    const auto& h = l.table.h();
    const auto& b = l.table.b();
    const std::size_t k = segment(l, s);
    double acc = 0.0;
    for (std::size_t i = 0; i < k; ++i) acc += 0.5 * (b[i] + b[i + 1]) * (h[i + 1] - h[i]);
    const double ds = s - h[k];
    return acc + b[k] * ds + 0.5 * seg_slope(l, k) * ds * ds;
  }
  static double d1(const TabulatedLaw& l, double s) {
    const std::size_t k = segment(l, s);
    return l.table.b()[k] + seg_slope(l, k) * (s - l.table.h()[k]);
  }
  static double d2(const TabulatedLaw& l, double s) { return seg_slope(l, segment(l, s)); }

  std::variant<LinearLaw, AtanSaturationLaw, TabulatedLaw> law_;
  double s_min_ = 0.0;
};

inline void require_nonnegative(double s, const char* what) {
  if (!(s >= 0.0)) throw DomainError(std::string(what) + ": field magnitude must be >= 0");
}

/// w(s), energy density in J/m^3.
inline double coenergy(const MaterialLaw& law, double s) {
  require_nonnegative(s, "coenergy");
  return law.profile(s);
}

/// Coenergy of a field vector, w(|h|).
inline double coenergy(const MaterialLaw& law, const Vec2& h) { return law.profile(h.norm()); }

/// Secant slope w'(s)/s, with the limit w''(0+) below s_min.
inline double chord_permeability(const MaterialLaw& law, double s) {
  require_nonnegative(s, "chord_permeability");
  if (s < law.s_min()) return law.profile_d2(0.0);
  return law.profile_d1(s) / s;
}

inline Vec2 flux_from_field(const MaterialLaw& law, const Vec2& h) {
  const double s = h.norm();
  if (s < law.s_min()) return law.profile_d2(0.0) * h;
  return (law.profile_d1(s) / s) * h;
}

/// db/dh = w''(s) P + (w'(s)/s)(I - P), P = h h^T / s^2.
inline Mat2 differential_permeability(const MaterialLaw& law, const Vec2& h) {
  const double s = h.norm();
  if (s < law.s_min()) return law.profile_d2(0.0) * Mat2::Identity();
  const Vec2 e = h / s;
  const Mat2 P = e * e.transpose();
  return law.profile_d2(s) * P + (law.profile_d1(s) / s) * (Mat2::Identity() - P);
}

/// Inverse of differential_permeability, in closed form.
inline Mat2 differential_reluctivity(const MaterialLaw& law, const Vec2& h) {
  const double s = h.norm();
  if (s < law.s_min()) return (1.0 / law.profile_d2(0.0)) * Mat2::Identity();
  const Vec2 e = h / s;
  const Mat2 P = e * e.transpose();
  return (1.0 / law.profile_d2(s)) * P + (s / law.profile_d1(s)) * (Mat2::Identity() - P);
}

/// Tightest (gamma, L) for the scalar profile; the isotropic vector law
/// inherits them because the chord slope lies between the extreme values of w''.
inline Certificate certify(const MaterialLaw& law) {
  Certificate c;
  switch (law.kind()) {
    case MaterialLaw::Kind::linear: {
      const double mu = std::get<LinearLaw>(law.variant()).mu;
      c = {mu, mu};
      break;
    }
    case MaterialLaw::Kind::atan_saturation: {
      const auto& l = std::get<AtanSaturationLaw>(law.variant());
      c = {l.mu0, l.mu0 + 2.0 * l.b_s / (std::numbers::pi * l.h0)};
      break;
    }
    case MaterialLaw::Kind::tabulated: {
      const auto& l = std::get<TabulatedLaw>(law.variant());
      const auto& h = l.table.h();
      c = {l.mu_ext, l.mu_ext};
      for (std::size_t i = 0; i + 1 < l.table.size(); ++i) {
        const double m = l.table.slope(i);
        if (!(m > 0.0)) {
          std::ostringstream os;
          os << "non-monotone B-H data on interval [" << h[i] << ", " << h[i + 1]
             << "] A/m (segment " << i << ", slope " << m << " H/m)";
          throw CertificationError(os.str());
        }
        c.gamma = std::min(c.gamma, m);
        c.lipschitz = std::max(c.lipschitz, m);
      }
      if (!(l.mu_ext > 0.0))
        throw CertificationError("extrapolation slope beyond h = " + std::to_string(h.back()) +
                                 " A/m is not positive");
      break;
    }
  }
  if (!(c.gamma > 0.0) || !std::isfinite(c.lipschitz))
    throw CertificationError("material law is not strongly monotone (gamma <= 0)");
  return c;
}

namespace detail {

/// Solve w'(s) = beta for s >= 0 on a certified law.
inline double invert_profile(const MaterialLaw& law, double beta) {
  if (beta == 0.0) return 0.0;
  switch (law.kind()) {
    case MaterialLaw::Kind::linear:
      return beta / std::get<LinearLaw>(law.variant()).mu;
    case MaterialLaw::Kind::tabulated: {
      const auto& l = std::get<TabulatedLaw>(law.variant());
      const auto& h = l.table.h();
      const auto& b = l.table.b();
      const auto it = std::upper_bound(b.begin(), b.end(), beta);
      const std::size_t k =
          static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - b.begin() - 1, 0));
      const double m = k + 1 < l.table.size() ? l.table.slope(k) : l.mu_ext;
      return h[k] + (beta - b[k]) / m;
    }
    case MaterialLaw::Kind::atan_saturation:
      break;
  }
  const double d2_0 = law.profile_d2(0.0);
  if (beta < law.profile_d1(law.s_min())) return beta / d2_0;

  const Certificate c = certify(law);
  double lo = beta / c.lipschitz;
  double hi = beta / c.gamma;
  double s = lo;
  for (int it = 0; it < 200; ++it) {
    const double g = law.profile_d1(s) - beta;
    if (std::abs(g) <= 4.0 * std::numeric_limits<double>::epsilon() * beta) break;
    if (g < 0.0) lo = s; else hi = s;
    double next = s - g / law.profile_d2(s);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == s || hi - lo <= 2.0 * std::numeric_limits<double>::epsilon() * hi) break;
    s = next;
  }
  return s;
}

}  // namespace detail

/// Inverse law h(b) = d w_dual / db, by scalar root finding along b/|b|.
inline Vec2 field_from_flux(const MaterialLaw& law, const Vec2& b) {
  if (!std::isfinite(b.x()) || !std::isfinite(b.y()))
    throw DomainError("field_from_flux: non-finite flux density");
  const double beta = b.norm();
  if (beta == 0.0) return Vec2::Zero();
  const double s = detail::invert_profile(law, beta);
  if (s < law.s_min()) return b / law.profile_d2(0.0);
  return (s / beta) * b;
}

/// Magnetic energy density w(|b|) = |b| s - w*(s), the Legendre dual of the
/// coenergy, with s solving w*'(s) = |b|.
inline double energy_density(const MaterialLaw& law, const Vec2& b) {
  const double beta = b.norm();
  if (beta == 0.0) return 0.0;
  if (law.kind() == MaterialLaw::Kind::linear)
    return 0.5 * beta * beta / std::get<LinearLaw>(law.variant()).mu;
  const double s = detail::invert_profile(law, beta);
  return beta * s - law.profile(s);
}

}  // namespace maglab
