#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <vector>

#include "bandwig/kernel.hpp"
#include "bandwig/lattice.hpp"
#include "bandwig/quadrature.hpp"

namespace bandwig {

// Bulk energy window for the saddle analysis: eta < |E| <= 1.8.
inline constexpr double kDefaultEnergyWindowEta = 0.1;
inline constexpr double kEnergyWindowMax = 1.8;

// rho_SC(E) = sqrt(1 - E^2/4) / pi on [-2, 2], zero outside.
inline double semicircle(double E) {
  if (std::abs(E) >= 2.0) return 0.0;
  return std::sqrt(1.0 - E * E / 4.0) / M_PI;
}

// Dominant saddle Escr = E/2 - i sqrt(1 - E^2/4); |Escr| = 1, Escr * conj(Escr) = 1.
inline cdouble saddle_point(double E) {
  if (!(std::abs(E) < 2.0)) throw ConfigError("saddle_point: |E| must be < 2");
  return cdouble(E / 2.0, -std::sqrt(1.0 - E * E / 4.0));
}

// Single-site action wells: f1 governs the a-variables, f2 the b-variables.
inline cdouble f1_action(cdouble a, double E) { return a * a / 2.0 + std::log(cdouble(E) - a); }
inline cdouble f2_action(cdouble b, double E) { return b * b / 2.0 - std::log(cdouble(E) - cdouble(0, 1) * b); }
inline cdouble f1_prime(cdouble a, double E) { return a - 1.0 / (cdouble(E) - a); }
inline cdouble f2_prime(cdouble b, double E) {
  return b + cdouble(0, 1) / (cdouble(E) - cdouble(0, 1) * b);
}

struct SaddleData {
  double E = 0;
  double eta = kDefaultEnergyWindowEta;
  cdouble escr;                      // E/2 - i sqrt(1 - E^2/4)
  cdouble estar;                     // E - escr = conj(escr) = 1/escr
  double rho_sc = 0;                 // semicircle density = Im(estar)/pi
  double mr2 = 0;                    // Re(1 - escr^2) = 2 - E^2/2
  double mi2 = 0;                    // Im(1 - escr^2) = E sqrt(1 - E^2/4) (signed)
  cdouble hessian;                   // f1''(escr) = f2''(-i escr) = 1 - escr^2
  std::array<cdouble, 2> saddle_a;   // critical points of f1: {escr, estar}
  std::array<cdouble, 2> saddle_b;   // critical points of f2: {-i escr, -i estar}
  double second_well_offset = 0;     // distance between the two b-wells on the real axis
};

// Saddle-point data at energy E inside the window eta < |E| <= 1.8.
inline SaddleData saddle_data(double E, double eta = kDefaultEnergyWindowEta) {
  if (!(eta > 0) || !(eta < kEnergyWindowMax))
    throw ConfigError("saddle_data: eta must lie in (0, 1.8)");
  if (!(std::abs(E) > eta) || !(std::abs(E) <= kEnergyWindowMax))
    throw ConfigError("saddle_data: E outside the energy window eta < |E| <= 1.8");
  SaddleData s;
  s.E = E;
  s.eta = eta;
  s.escr = saddle_point(E);
  s.estar = cdouble(E) - s.escr;
  s.rho_sc = semicircle(E);
  s.hessian = 1.0 - s.escr * s.escr;
  s.mr2 = s.hessian.real();
  s.mi2 = s.hessian.imag();
  s.saddle_a = {s.escr, s.estar};
  s.saddle_b = {cdouble(0, -1) * s.escr, cdouble(0, -1) * s.estar};
  // The two wells of F2 on the real b-axis sit at 0 and 2*Im(estar).
  s.second_well_offset = 2.0 * s.estar.imag();
  return s;
}

// Normalized well profiles along the real axes:
//   F1(a) = |exp(-(f1(a) - f1(escr)))|, F2(b) = |exp(-(f2(b) - f2(-i escr)))|.
// F2 has two peaks of height exactly 1, at b = 0 and b = 2 Im(estar).
struct WellProfiles {
  std::vector<double> a_grid, b_grid;
  std::vector<double> F1, F2;
  bool E_in_window = true;
  double f2_peak_locations[2] = {0, 0};
  double f2_peak_heights[2] = {0, 0};
};

inline WellProfiles well_profiles(double E, const std::vector<double>& a_grid,
                                  const std::vector<double>& b_grid,
                                  double eta = kDefaultEnergyWindowEta) {
  if (!(std::abs(E) < 2.0)) throw ConfigError("well_profiles: |E| must be < 2");
  WellProfiles w;
  w.a_grid = a_grid;
  w.b_grid = b_grid;
  w.E_in_window = std::abs(E) > eta && std::abs(E) <= kEnergyWindowMax;
  const cdouble escr = saddle_point(E);
  const cdouble b0 = cdouble(0, -1) * escr; // dominant b-saddle
  const cdouble f1_0 = f1_action(escr, E);
  const cdouble f2_0 = f2_action(b0, E);
  w.F1.reserve(a_grid.size());
  for (double a : a_grid) {
    // Evaluate along the shifted contour a + escr through the dominant saddle.
    w.F1.push_back(std::abs(std::exp(-(f1_action(cdouble(a) + escr, E) - f1_0))));
  }
  w.F2.reserve(b_grid.size());
  for (double b : b_grid)
    w.F2.push_back(std::abs(std::exp(-(f2_action(cdouble(b) + b0, E) - f2_0))));
  w.f2_peak_locations[0] = 0.0;
  w.f2_peak_locations[1] = 2.0 * (cdouble(E) - escr).imag();
  for (int k = 0; k < 2; ++k)
    w.f2_peak_heights[k] =
        std::abs(std::exp(-(f2_action(cdouble(w.f2_peak_locations[k]) + b0, E) - f2_0)));
  return w;
}

// ---------------------------------------------------------------------------
// Effective vertices of the dual representation.
//
// With Etilde = E + i*eps - escr(E) (the observable-shifted saddle distance),
// the scalar a-vertex admits the closed form
//   V_a(a) = -escr*a - escr^2 a^2/2 - ln(Etilde - a) + ln(Etilde)
// and equals the Taylor-remainder integral
//   V_a(a) = integral_0^1 (1-t)^2 a^3 / (Etilde - t a)^3 dt.
// The b-vertex is V_b(b) = -V_a(i b) for both forms.

inline cdouble etilde(double E, double eps) {
  if (eps < 0) throw ConfigError("etilde: eps must be >= 0");
  return cdouble(E, eps) - saddle_point(E);
}

namespace detail {

inline cdouble va_closed(cdouble w, double E, double eps) {
  const cdouble es = saddle_point(E);
  const cdouble Et = etilde(E, eps);
  return -es * w - es * es * w * w / 2.0 - std::log(Et - w) + std::log(Et);
}

inline cdouble va_tintegral(cdouble w, double E, double eps, double tol) {
  const cdouble Et = etilde(E, eps);
  return adaptive_integrate<cdouble>(
      [&](double t) {
        const cdouble den = Et - t * w;
        return (1.0 - t) * (1.0 - t) * w * w * w / (den * den * den);
      },
      0.0, 1.0, tol);
}

} // namespace detail

enum class VertexBranch { a, b };

// Effective vertex via adaptive quadrature of the Taylor-remainder integral.
inline cdouble vertex_V(double x, double E, VertexBranch branch, double eps = 0.0,
                        double tol = 1e-12) {
  if (branch == VertexBranch::a) return detail::va_tintegral(cdouble(x), E, eps, tol);
  return -detail::va_tintegral(cdouble(0, 1) * x, E, eps, tol);
}

// Same vertex in closed form (logarithm + quadratic counterterms).
inline cdouble vertex_V_closed(double x, double E, VertexBranch branch, double eps = 0.0) {
  if (branch == VertexBranch::a) return detail::va_closed(cdouble(x), E, eps);
  return -detail::va_closed(cdouble(0, 1) * x, E, eps);
}

// Fermion-boson coupling vertex, closed form:
//   D(a, b) = escr^2 - 1 / ((Etilde - a)(Etilde - i b)).
inline cdouble vertex_D(double a, double b, double E, double eps = 0.0) {
  const cdouble es = saddle_point(E);
  const cdouble Et = etilde(E, eps);
  return es * es - 1.0 / ((Et - a) * (Et - cdouble(0, 1) * b));
}

// Coupling vertex as a t-integral (derivative form). Coincides with the closed
// form at eps = 0, where 1/Etilde^2 = escr^2.
inline cdouble vertex_D_tintegral(double a, double b, double E, double eps = 0.0,
                                  double tol = 1e-12) {
  const cdouble Et = etilde(E, eps);
  const cdouble ib(0, b);
  return -adaptive_integrate<cdouble>(
      [&](double t) {
        const cdouble da = Et - t * a;
        const cdouble db = Et - t * ib;
        return a / (da * da * db) + ib / (da * db * db);
      },
      0.0, 1.0, tol);
}

// Observable vertices attached to the distinguished site:
//   exp(V0'(a0)) = 1/(Etilde - a0);  D0'(a0, b0) = -1/((Etilde - a0)(Etilde - i b0)).
inline cdouble vertex_V0p(double a0, double E, double eps) {
  return -std::log(etilde(E, eps) - a0);
}
inline cdouble vertex_D0p(double a0, double b0, double E, double eps) {
  const cdouble Et = etilde(E, eps);
  return -1.0 / ((Et - a0) * (Et - cdouble(0, 1) * b0));
}

// ---------------------------------------------------------------------------
// Deterministic decay check for the dressed propagator G = (1 + i m_i^2 C)^{-1} C
// ... whose unit-normalized part g = (1 + i m_i^2 C)^{-1} has symbol
// 1 / (1 + i m_i^2 c(k)), c(k) = 1/(W^2 sigma(k) + m_r^2).

struct GDecayResult {
  DecayProfile profile;
  double rate = 0;
  double rate_bound = 0;
  bool rate_ok = false;
  double diag_dev = 0;    // max_i |g_ii - 1|
  double diag_bound = 0;  // 10 * |m_i^2| * C(0,0)
  bool diag_ok = false;
  bool envelope_monotone = false; // integer-binned envelope, bins [W, side/2]
};

inline GDecayResult G_decay_check(double E, int W, const LatticeTorus& torus,
                                  double eta = kDefaultEnergyWindowEta) {
  if (!(std::abs(E) > eta) || !(std::abs(E) > 0) || !(std::abs(E) <= kEnergyWindowMax))
    throw ConfigError("G_decay_check: E outside the energy window");
  int min_side = torus.sides[0];
  for (int s : torus.sides) min_side = std::min(min_side, s);
  if (min_side < 4 * W)
    throw ConfigError("G_decay_check: smallest side must be >= 4W for a clean decay window");
  const double mr2 = saddle_mr2(E);
  const double mi2 = saddle_mi2(E);
  const double W2 = static_cast<double>(W) * static_cast<double>(W);
  std::vector<cdouble> table(static_cast<std::size_t>(torus.volume));
  std::vector<int> mode(static_cast<std::size_t>(torus.d));
  double c00 = 0.0; // C(0,0) = mean of the C symbol
  for (std::int64_t n = 0; n < torus.volume; ++n) {
    torus.coords_into(n, mode.data());
    const double c = 1.0 / (W2 * laplacian_symbol(torus, mode) + mr2);
    c00 += c;
    table[static_cast<std::size_t>(n)] = 1.0 / (1.0 + cdouble(0, mi2) * c);
  }
  c00 /= static_cast<double>(torus.volume);

  KernelMatrix g; // profile-only carrier for the shell/fit utilities
  g.torus = torus;
  g.kind = KernelKind::Custom;
  g.W = W;
  g.mass = cdouble(mr2, mi2);
  g.profile = profile_from_symbol_table(torus, std::move(table));

  GDecayResult r;
  r.profile = decay_profile(g, static_cast<double>(W), static_cast<double>(min_side) / 2.0);
  r.rate = r.profile.fit_rate;
  r.rate_bound = 0.5 * std::sqrt(mr2) / static_cast<double>(W);
  r.rate_ok = r.rate >= r.rate_bound;
  r.diag_dev = std::abs(g.profile[0] - cdouble(1.0));
  r.diag_bound = 10.0 * std::abs(mi2) * c00;
  r.diag_ok = r.diag_dev <= r.diag_bound;
  const std::vector<double> env = binned_envelope(g);
  r.envelope_monotone = true;
  for (std::size_t k = static_cast<std::size_t>(W) + 1;
       k < env.size() && k <= static_cast<std::size_t>(min_side / 2); ++k)
    if (env[k] > env[k - 1] * (1.0 + 1e-12)) r.envelope_monotone = false;
  return r;
}

} // namespace bandwig
