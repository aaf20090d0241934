#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <vector>

#include "bandwig/lattice.hpp"

namespace bandwig {

using cdouble = std::complex<double>;

enum class KernelKind { J, C, B, Custom };

inline const char* kernel_kind_name(KernelKind k) {
  switch (k) {
    case KernelKind::J: return "J";
    case KernelKind::C: return "C";
    case KernelKind::B: return "B";
    default: return "custom";
  }
}

// Translation-invariant lattice kernel K = (-W^2 Delta + mass)^{-1} on a torus.
// `profile` stores K(x, 0) indexed by displacement site; `dense` stores the
// full |Lambda| x |Lambda| matrix (entry(i,j) = profile[displacement(i,j)]).
struct KernelMatrix {
  LatticeTorus torus;
  KernelKind kind = KernelKind::Custom;
  int W = 1;
  cdouble mass{1.0, 0.0};
  std::vector<cdouble> profile;
  Eigen::MatrixXcd dense;

  cdouble entry(std::int64_t i, std::int64_t j) const {
    return profile[static_cast<std::size_t>(torus.displacement_site(i, j))];
  }
  bool is_real() const {
    for (const cdouble& v : profile)
      if (std::abs(v.imag()) > 1e-14) return false;
    return true;
  }
  cdouble profile_sum() const {
    cdouble s = 0;
    for (const cdouble& v : profile) s += v;
    return s;
  }
};

// Inverse Fourier transform of a symbol table g[mode_site] via nested
// one-dimensional DFTs (one pass per axis), O(|Lambda| * sum_a L_a).
// Returns K(x) = (1/|Lambda|) sum_n g(n) exp(+i k_n . x).
inline std::vector<cdouble> profile_from_symbol_table(const LatticeTorus& torus,
                                                      std::vector<cdouble> g) {
  const std::int64_t V = torus.volume;
  std::vector<cdouble> out(static_cast<std::size_t>(V));
  std::vector<cdouble> line_in, line_out;
  for (int a = 0; a < torus.d; ++a) {
    const int L = torus.sides[static_cast<std::size_t>(a)];
    const std::int64_t stride = torus.strides[static_cast<std::size_t>(a)];
    // Twiddle table e(n, x) = exp(2*pi*i*n*x / L).
    std::vector<cdouble> tw(static_cast<std::size_t>(L) * static_cast<std::size_t>(L));
    for (int n = 0; n < L; ++n)
      for (int x = 0; x < L; ++x) {
        const double phi = 2.0 * M_PI * static_cast<double>((static_cast<std::int64_t>(n) * x) % L) /
                           static_cast<double>(L);
        tw[static_cast<std::size_t>(n) * L + x] = cdouble(std::cos(phi), std::sin(phi));
      }
    line_in.assign(static_cast<std::size_t>(L), cdouble(0));
    line_out.assign(static_cast<std::size_t>(L), cdouble(0));
    for (std::int64_t base = 0; base < V; ++base) {
      if (torus.coord(base, a) != 0) continue;
      for (int n = 0; n < L; ++n) line_in[static_cast<std::size_t>(n)] = g[static_cast<std::size_t>(base + n * stride)];
      for (int x = 0; x < L; ++x) {
        cdouble s = 0;
        const cdouble* twx = &tw[0];
        for (int n = 0; n < L; ++n) s += line_in[static_cast<std::size_t>(n)] * twx[static_cast<std::size_t>(n) * L + x];
        line_out[static_cast<std::size_t>(x)] = s;
      }
      for (int x = 0; x < L; ++x) g[static_cast<std::size_t>(base + x * stride)] = line_out[static_cast<std::size_t>(x)];
    }
  }
  const double inv_v = 1.0 / static_cast<double>(V);
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = g[i] * inv_v;
  return out;
}

// Symbol table of -W^2 Delta + mass over the dual lattice.
inline std::vector<cdouble> resolvent_symbol_table(const LatticeTorus& torus, int W, cdouble mass) {
  const std::int64_t V = torus.volume;
  std::vector<cdouble> g(static_cast<std::size_t>(V));
  std::vector<int> mode(static_cast<std::size_t>(torus.d));
  const double W2 = static_cast<double>(W) * static_cast<double>(W);
  for (std::int64_t n = 0; n < V; ++n) {
    torus.coords_into(n, mode.data());
    const cdouble denom = W2 * laplacian_symbol(torus, mode) + mass;
    if (std::abs(denom) < 1e-12)
      throw ConfigError("build_kernel: symbol W^2*sigma(k)+mass vanishes (ill-posed inverse)");
    g[static_cast<std::size_t>(n)] = 1.0 / denom;
  }
  return g;
}

// Max-norm residual of (-W^2 Delta + mass) K - Id computed from the profile
// (exact for translation-invariant kernels).
inline double kernel_profile_residual(const LatticeTorus& torus, int W, cdouble mass,
                                      const std::vector<cdouble>& profile) {
  const double W2 = static_cast<double>(W) * static_cast<double>(W);
  double worst = 0.0;
  for (std::int64_t x = 0; x < torus.volume; ++x) {
    cdouble lap = 0;
    for (int a = 0; a < torus.d; ++a) {
      lap += 2.0 * profile[static_cast<std::size_t>(x)];
      lap -= profile[static_cast<std::size_t>(torus.shift_site(x, a, +1))];
      lap -= profile[static_cast<std::size_t>(torus.shift_site(x, a, -1))];
    }
    cdouble r = W2 * lap + mass * profile[static_cast<std::size_t>(x)];
    if (x == 0) r -= 1.0;
    worst = std::max(worst, std::abs(r));
  }
  return worst;
}

// Dense-path residual check (O(d |Lambda|^2)); audits profile/dense agreement.
inline double kernel_dense_residual(const KernelMatrix& K) {
  const LatticeTorus& t = K.torus;
  const double W2 = static_cast<double>(K.W) * static_cast<double>(K.W);
  double worst = 0.0;
  for (std::int64_t j = 0; j < t.volume; ++j) {
    for (std::int64_t i = 0; i < t.volume; ++i) {
      cdouble lap = 0;
      for (int a = 0; a < t.d; ++a) {
        lap += 2.0 * K.dense(i, j);
        lap -= K.dense(t.shift_site(i, a, +1), j);
        lap -= K.dense(t.shift_site(i, a, -1), j);
      }
      cdouble r = W2 * lap + K.mass * K.dense(i, j);
      if (i == j) r -= 1.0;
      worst = std::max(worst, std::abs(r));
    }
  }
  return worst;
}

inline constexpr std::int64_t kDenseKernelByteCap = std::int64_t{2} * 1024 * 1024 * 1024;

inline KernelMatrix build_kernel(const LatticeTorus& torus, int W, cdouble mass,
                                 KernelKind kind = KernelKind::Custom) {
  if (W < 1) throw ConfigError("build_kernel: band width W must be >= 1");
  if (std::abs(mass) == 0.0) throw ConfigError("build_kernel: mass must be nonzero");
  const std::int64_t V = torus.volume;
  if (V > 0 && 16 * V > kDenseKernelByteCap / V)
    throw ConfigError("build_kernel: dense kernel would exceed the 2 GiB storage cap");
  KernelMatrix K;
  K.torus = torus;
  K.kind = kind;
  K.W = W;
  K.mass = mass;
  K.profile = profile_from_symbol_table(torus, resolvent_symbol_table(torus, W, mass));
  const double resid = kernel_profile_residual(torus, W, mass, K.profile);
  if (resid > 1e-10)
    throw NumericError("build_kernel: inverse residual " + std::to_string(resid) + " exceeds 1e-10");
  K.dense.resize(V, V);
  for (std::int64_t j = 0; j < V; ++j)
    for (std::int64_t i = 0; i < V; ++i)
      K.dense(i, j) = K.profile[static_cast<std::size_t>(torus.displacement_site(i, j))];
  return K;
}

// J = (-W^2 Delta + 1)^{-1}: the band-matrix variance profile. Rows sum to 1.
inline KernelMatrix build_J(const LatticeTorus& torus, int W) {
  return build_kernel(torus, W, cdouble(1.0, 0.0), KernelKind::J);
}

// Saddle mass parameters at energy E in (-2, 2):
//   m_r^2 = 2 - E^2/2 (real part), m_i^2 = E*sqrt(1 - E^2/4) (signed imag part),
//   1 - Escr^2 = m_r^2 + i m_i^2 for Escr = E/2 - i sqrt(1 - E^2/4).
inline double saddle_mr2(double E) { return 2.0 - E * E / 2.0; }
inline double saddle_mi2(double E) { return E * std::sqrt(1.0 - E * E / 4.0); }

// C = (-W^2 Delta + m_r^2)^{-1}: the real-mass comparison kernel.
inline KernelMatrix build_C(const LatticeTorus& torus, int W, double E) {
  if (!(std::abs(E) < 2.0)) throw ConfigError("build_C: |E| must be < 2");
  return build_kernel(torus, W, cdouble(saddle_mr2(E), 0.0), KernelKind::C);
}

// B = (-W^2 Delta + 1 - Escr^2)^{-1}: the complex-mass saddle Hessian inverse.
// B^{-1} = C^{-1} + i m_i^2 Id.
inline KernelMatrix build_B(const LatticeTorus& torus, int W, double E) {
  if (!(std::abs(E) < 2.0)) throw ConfigError("build_B: |E| must be < 2");
  return build_kernel(torus, W, cdouble(saddle_mr2(E), saddle_mi2(E)), KernelKind::B);
}

// Direct mode-sum entry (naive O(|Lambda|) per entry) for cross-checks.
inline cdouble kernel_entry_modesum(const LatticeTorus& torus, int W, cdouble mass,
                                    std::int64_t i, std::int64_t j) {
  const double W2 = static_cast<double>(W) * static_cast<double>(W);
  std::vector<int> mode(static_cast<std::size_t>(torus.d));
  cdouble s = 0;
  for (std::int64_t n = 0; n < torus.volume; ++n) {
    torus.coords_into(n, mode.data());
    double phase = 0.0;
    for (int a = 0; a < torus.d; ++a)
      phase += 2.0 * M_PI * static_cast<double>(mode[static_cast<std::size_t>(a)]) *
               static_cast<double>(torus.coord(i, a) - torus.coord(j, a)) /
               static_cast<double>(torus.sides[static_cast<std::size_t>(a)]);
    s += cdouble(std::cos(phase), std::sin(phase)) / (W2 * laplacian_symbol(torus, mode) + mass);
  }
  return s / static_cast<double>(torus.volume);
}

// ---------------------------------------------------------------------------
// Radial decay profile and exponential fit.

struct ShellPoint {
  double radius = 0;
  double max_abs = 0;
  std::int64_t count = 0;
};

struct DecayProfile {
  std::vector<ShellPoint> shells; // all exact radii, ascending
  double fit_rate = 0;            // decay rate: ln max_abs ~ intercept - rate * r
  double fit_intercept = 0;
  double fit_rms = 0;
  int fit_points = 0;
  double window_rmin = 0;
  double window_rmax = 0;
  double rate_bound = 0; // mass-based lower bound (0 when not applicable)
  bool rate_bound_ok = true;
};

// Group profile entries into exact-radius shells (keyed by integer r^2).
inline std::vector<ShellPoint> kernel_shells(const KernelMatrix& K) {
  const LatticeTorus& t = K.torus;
  std::map<std::int64_t, ShellPoint> by_r2;
  for (std::int64_t x = 0; x < t.volume; ++x) {
    std::int64_t r2 = 0;
    for (int a = 0; a < t.d; ++a) {
      const int m = t.coord(x, a);
      const int L = t.sides[static_cast<std::size_t>(a)];
      const std::int64_t mm = (m > L - m) ? (L - m) : m;
      r2 += mm * mm;
    }
    ShellPoint& sp = by_r2[r2];
    sp.radius = std::sqrt(static_cast<double>(r2));
    sp.max_abs = std::max(sp.max_abs, std::abs(K.profile[static_cast<std::size_t>(x)]));
    sp.count += 1;
  }
  std::vector<ShellPoint> shells;
  shells.reserve(by_r2.size());
  for (const auto& kv : by_r2) shells.push_back(kv.second);
  return shells;
}

// |entry| along a single axis, displacements 0 .. L-1 (wrap-symmetric).
inline std::vector<double> axis_profile(const KernelMatrix& K, int axis) {
  const LatticeTorus& t = K.torus;
  if (axis < 0 || axis >= t.d) throw ConfigError("axis_profile: axis out of range");
  const int L = t.sides[static_cast<std::size_t>(axis)];
  std::vector<double> out(static_cast<std::size_t>(L));
  for (int x = 0; x < L; ++x) {
    const std::int64_t site = static_cast<std::int64_t>(x) * t.strides[static_cast<std::size_t>(axis)];
    out[static_cast<std::size_t>(x)] = std::abs(K.profile[static_cast<std::size_t>(site)]);
  }
  return out;
}

// Envelope over integer radius bins [k, k+1): max |entry| per bin.
inline std::vector<double> binned_envelope(const KernelMatrix& K) {
  const std::vector<ShellPoint> shells = kernel_shells(K);
  double rmax = 0;
  for (const ShellPoint& s : shells) rmax = std::max(rmax, s.radius);
  std::vector<double> env(static_cast<std::size_t>(std::floor(rmax)) + 1, 0.0);
  for (const ShellPoint& s : shells) {
    const std::size_t bin = static_cast<std::size_t>(std::floor(s.radius));
    env[bin] = std::max(env[bin], s.max_abs);
  }
  return env;
}

inline DecayProfile decay_profile(const KernelMatrix& K, double rmin = -1.0, double rmax = -1.0) {
  const LatticeTorus& t = K.torus;
  int min_side = t.sides[0];
  for (int s : t.sides) min_side = std::min(min_side, s);
  if (rmin < 0) rmin = static_cast<double>(K.W);
  if (rmax < 0) rmax = static_cast<double>(min_side) / 2.0;
  DecayProfile dp;
  dp.shells = kernel_shells(K);
  dp.window_rmin = rmin;
  dp.window_rmax = rmax;
  std::vector<double> xs, ys;
  for (const ShellPoint& s : dp.shells) {
    if (s.radius < rmin || s.radius > rmax) continue;
    if (!(s.max_abs > 0)) continue;
    xs.push_back(s.radius);
    ys.push_back(std::log(s.max_abs));
  }
  dp.fit_points = static_cast<int>(xs.size());
  if (dp.fit_points < 3)
    throw NumericError("decay_profile: degenerate fit (fewer than 3 radii in window)");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  const double denom = n * sxx - sx * sx;
  if (std::abs(denom) < 1e-12) throw NumericError("decay_profile: degenerate fit abscissa");
  const double slope = (n * sxy - sx * sy) / denom;
  dp.fit_intercept = (sy - slope * sx) / n;
  dp.fit_rate = -slope;
  double ss = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - (dp.fit_intercept + slope * xs[i]);
    ss += r * r;
  }
  dp.fit_rms = std::sqrt(ss / n);
  // Mass-based lower bound on the decay rate, rate >= sqrt(Re mass) / (2 W),
  // meaningful for positive-mass kernels (J, C).
  if (K.mass.real() > 0 && std::abs(K.mass.imag()) < 1e-14) {
    dp.rate_bound = 0.5 * std::sqrt(K.mass.real()) / static_cast<double>(K.W);
    dp.rate_bound_ok = dp.fit_rate >= dp.rate_bound;
  }
  return dp;
}

} // namespace bandwig
