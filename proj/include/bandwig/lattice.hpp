#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "bandwig/errors.hpp"

namespace bandwig {

// Periodic lattice (discrete torus) with lexicographic site indexing:
//   site = sum_k coord[k] * strides[k],   strides[d-1] == 1.
struct LatticeTorus {
  int d = 0;
  std::vector<int> sides;
  std::vector<std::int64_t> strides;
  std::int64_t volume = 0;

  int coord(std::int64_t site, int axis) const {
    return static_cast<int>((site / strides[axis]) % sides[axis]);
  }

  void coords_into(std::int64_t site, int* out) const {
    for (int k = 0; k < d; ++k) out[k] = coord(site, k);
  }

  std::vector<int> coords(std::int64_t site) const {
    std::vector<int> c(static_cast<std::size_t>(d));
    coords_into(site, c.data());
    return c;
  }

  int wrap(int c, int axis) const {
    const int L = sides[static_cast<std::size_t>(axis)];
    int r = c % L;
    if (r < 0) r += L;
    return r;
  }

  // Site index of an arbitrary (possibly out-of-range) coordinate vector.
  std::int64_t site(const std::vector<int>& c) const {
    if (static_cast<int>(c.size()) != d)
      throw ConfigError("LatticeTorus::site: coordinate dimension mismatch");
    std::int64_t s = 0;
    for (int k = 0; k < d; ++k) s += static_cast<std::int64_t>(wrap(c[static_cast<std::size_t>(k)], k)) * strides[static_cast<std::size_t>(k)];
    return s;
  }

  // Nearest neighbor: shift one coordinate by delta (periodic).
  std::int64_t shift_site(std::int64_t s, int axis, int delta) const {
    const int c = coord(s, axis);
    const int cw = wrap(c + delta, axis);
    return s + static_cast<std::int64_t>(cw - c) * strides[static_cast<std::size_t>(axis)];
  }

  // Displacement site: coordinates coord(i) - coord(j) reduced mod sides.
  std::int64_t displacement_site(std::int64_t i, std::int64_t j) const {
    std::int64_t s = 0;
    for (int k = 0; k < d; ++k)
      s += static_cast<std::int64_t>(wrap(coord(i, k) - coord(j, k), k)) * strides[static_cast<std::size_t>(k)];
    return s;
  }

  // Minimal-image Euclidean length of the displacement encoded by `disp`.
  double displacement_norm(std::int64_t disp) const {
    double s2 = 0.0;
    for (int k = 0; k < d; ++k) {
      const int m = coord(disp, k);
      const int L = sides[static_cast<std::size_t>(k)];
      const int mm = (m > L - m) ? (L - m) : m;
      s2 += static_cast<double>(mm) * static_cast<double>(mm);
    }
    return std::sqrt(s2);
  }

  // Minimal-image Euclidean distance between two sites.
  double distance(std::int64_t i, std::int64_t j) const {
    return displacement_norm(displacement_site(i, j));
  }
};

inline constexpr std::int64_t kDefaultVolumeCap = std::int64_t{1} << 22;

// Build a torus, validating dimensions and guarding against runaway volumes.
inline LatticeTorus build_torus(int d, const std::vector<int>& sides,
                                std::int64_t volume_cap = kDefaultVolumeCap) {
  if (d < 1) throw ConfigError("build_torus: dimension must be >= 1");
  if (static_cast<int>(sides.size()) != d)
    throw ConfigError("build_torus: sides list must have length d");
  LatticeTorus t;
  t.d = d;
  t.sides = sides;
  t.strides.assign(static_cast<std::size_t>(d), 1);
  std::int64_t vol = 1;
  for (int k = 0; k < d; ++k) {
    const int L = sides[static_cast<std::size_t>(k)];
    if (L < 1) throw ConfigError("build_torus: side lengths must be >= 1");
    if (vol > volume_cap / L)
      throw ConfigError("build_torus: volume exceeds cap (" + std::to_string(volume_cap) + ")");
    vol *= L;
  }
  t.volume = vol;
  for (int k = d - 2; k >= 0; --k)
    t.strides[static_cast<std::size_t>(k)] =
        t.strides[static_cast<std::size_t>(k + 1)] * sides[static_cast<std::size_t>(k + 1)];
  return t;
}

// Fourier symbol of the (positive semidefinite) lattice Laplacian -Delta:
//   sigma(k) = 2 * sum_i (1 - cos k_i),  k_i = 2*pi*n_i / L_i.
inline double laplacian_symbol(const LatticeTorus& torus, const std::vector<int>& mode) {
  if (static_cast<int>(mode.size()) != torus.d)
    throw ConfigError("laplacian_symbol: mode dimension mismatch");
  double s = 0.0;
  for (int k = 0; k < torus.d; ++k) {
    const int n = mode[static_cast<std::size_t>(k)];
    const int L = torus.sides[static_cast<std::size_t>(k)];
    if (n < 0 || n >= L)
      throw ConfigError("laplacian_symbol: mode index outside dual lattice range [0, L)");
    s += 2.0 * (1.0 - std::cos(2.0 * M_PI * static_cast<double>(n) / static_cast<double>(L)));
  }
  return s;
}

} // namespace bandwig
