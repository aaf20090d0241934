#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <cstdint>
#include <vector>

#include "bandwig/errors.hpp"
#include "bandwig/kernel.hpp" // cdouble

namespace bandwig {

// Finite Grassmann algebra on up to 8 anticommuting generators (4 conjugate
// pairs). Elements are stored as coefficients over basis words chi_S with the
// generators of S written in ascending bit order. Pair i uses bit 2i for
// chi_i and bit 2i+1 for chi*_i.
inline constexpr int kMaxGrassmannPairs = 4;
inline constexpr int kMaxGrassmannGenerators = 2 * kMaxGrassmannPairs;

class GrassmannElement {
 public:
  GrassmannElement() : ngen_(0), c_(1, cdouble(0)) {}
  explicit GrassmannElement(int ngen) : ngen_(validate(ngen)), c_(std::size_t{1} << ngen, cdouble(0)) {}

  static GrassmannElement scalar(int ngen, cdouble z) {
    GrassmannElement e(ngen);
    e.c_[0] = z;
    return e;
  }
  static GrassmannElement generator(int ngen, int g) {
    GrassmannElement e(ngen);
    if (g < 0 || g >= ngen) throw ConfigError("GrassmannElement: generator index out of range");
    e.c_[std::size_t{1} << g] = 1.0;
    return e;
  }

  int generators() const { return ngen_; }
  std::size_t size() const { return c_.size(); }
  cdouble coeff(std::uint32_t mask) const { return c_.at(mask); }
  void set_coeff(std::uint32_t mask, cdouble v) { c_.at(mask) = v; }
  cdouble scalar_part() const { return c_[0]; }

  bool is_even() const { return pure_parity(0); }
  bool is_odd() const { return pure_parity(1); }
  bool is_nilpotent() const { return std::abs(c_[0]) == 0.0; }

  double norm_inf() const {
    double m = 0;
    for (const cdouble& v : c_) m = std::max(m, std::abs(v));
    return m;
  }

  GrassmannElement& operator+=(const GrassmannElement& o) {
    check_compatible(o);
    for (std::size_t k = 0; k < c_.size(); ++k) c_[k] += o.c_[k];
    return *this;
  }
  GrassmannElement& operator-=(const GrassmannElement& o) {
    check_compatible(o);
    for (std::size_t k = 0; k < c_.size(); ++k) c_[k] -= o.c_[k];
    return *this;
  }
  GrassmannElement& operator*=(cdouble z) {
    for (cdouble& v : c_) v *= z;
    return *this;
  }
  friend GrassmannElement operator+(GrassmannElement a, const GrassmannElement& b) { return a += b; }
  friend GrassmannElement operator-(GrassmannElement a, const GrassmannElement& b) { return a -= b; }
  friend GrassmannElement operator*(cdouble z, GrassmannElement a) { return a *= z; }
  friend GrassmannElement operator*(GrassmannElement a, cdouble z) { return a *= z; }

  // Graded product. Moving a generator of `t` with bit b into place flips the
  // sign once per generator of `s` above bit b.
  friend GrassmannElement operator*(const GrassmannElement& A, const GrassmannElement& B) {
    A.check_compatible(B);
    GrassmannElement out(A.ngen_);
    for (std::uint32_t s = 0; s < A.c_.size(); ++s) {
      if (A.c_[s] == cdouble(0)) continue;
      for (std::uint32_t t = 0; t < B.c_.size(); ++t) {
        if (B.c_[t] == cdouble(0)) continue;
        if (s & t) continue;
        int parity = 0;
        std::uint32_t tt = t;
        while (tt) {
          const int b = __builtin_ctz(tt);
          parity ^= __builtin_popcount(s >> (b + 1)) & 1;
          tt &= tt - 1;
        }
        const cdouble term = A.c_[s] * B.c_[t];
        out.c_[s | t] += parity ? -term : term;
      }
    }
    return out;
  }

 private:
  static int validate(int ngen) {
    if (ngen < 0 || ngen > kMaxGrassmannGenerators)
      throw ConfigError("GrassmannElement: generator count must be in [0, 8]");
    return ngen;
  }
  void check_compatible(const GrassmannElement& o) const {
    if (ngen_ != o.ngen_) throw ConfigError("GrassmannElement: generator count mismatch");
  }
  bool pure_parity(int want) const {
    for (std::uint32_t s = 0; s < c_.size(); ++s)
      if (std::abs(c_[s]) > 0 && (__builtin_popcount(s) & 1) != want) return false;
    return true;
  }

  int ngen_;
  std::vector<cdouble> c_;
};

inline GrassmannElement chi(int ngen, int pair) {
  return GrassmannElement::generator(ngen, 2 * pair);
}
inline GrassmannElement chi_star(int ngen, int pair) {
  return GrassmannElement::generator(ngen, 2 * pair + 1);
}

// exp of a nilpotent element: the series terminates at order ngen.
inline GrassmannElement gexp(const GrassmannElement& x) {
  if (!x.is_nilpotent())
    throw ConfigError("gexp: requires zero scalar part (use gexp_with_scalar)");
  GrassmannElement out = GrassmannElement::scalar(x.generators(), 1.0);
  GrassmannElement pow = GrassmannElement::scalar(x.generators(), 1.0);
  double fact = 1.0;
  for (int k = 1; k <= x.generators(); ++k) {
    pow = pow * x;
    fact *= k;
    out += (1.0 / fact) * pow;
    if (pow.norm_inf() == 0.0) break;
  }
  return out;
}

// exp of a general even element s + nu: e^s * gexp(nu).
inline GrassmannElement gexp_with_scalar(const GrassmannElement& x) {
  const cdouble s = x.scalar_part();
  GrassmannElement nil = x;
  nil.set_coeff(0, 0.0);
  return std::exp(s) * gexp(nil);
}

// Multiplicative inverse of an even element with nonzero scalar part:
//   (s + nu)^{-1} = s^{-1} sum_k (-nu/s)^k, terminating.
inline GrassmannElement ginv(const GrassmannElement& x) {
  const cdouble s = x.scalar_part();
  if (std::abs(s) == 0.0) throw NumericError("ginv: element has zero scalar part");
  GrassmannElement nu = x;
  nu.set_coeff(0, 0.0);
  nu *= -1.0 / s;
  GrassmannElement out = GrassmannElement::scalar(x.generators(), 1.0);
  GrassmannElement pow = GrassmannElement::scalar(x.generators(), 1.0);
  for (int k = 1; k <= x.generators(); ++k) {
    pow = pow * nu;
    if (pow.norm_inf() == 0.0) break;
    out += pow;
  }
  return out * (1.0 / s);
}

// ln of an even element with nonzero scalar part: ln s + ln(1 + nu/s),
// principal scalar branch, terminating nilpotent series.
inline GrassmannElement gln(const GrassmannElement& x) {
  const cdouble s = x.scalar_part();
  if (std::abs(s) == 0.0) throw NumericError("gln: element has zero scalar part");
  GrassmannElement g = x;
  g.set_coeff(0, 0.0);
  g *= 1.0 / s;
  GrassmannElement out = GrassmannElement::scalar(x.generators(), std::log(s));
  GrassmannElement pow = GrassmannElement::scalar(x.generators(), 1.0);
  for (int k = 1; k <= x.generators(); ++k) {
    pow = pow * g;
    if (pow.norm_inf() == 0.0) break;
    out += (((k % 2) == 1 ? 1.0 : -1.0) / static_cast<double>(k)) * pow;
  }
  return out;
}

// Berezin integral over one generator: left derivative times 1/sqrt(2 pi).
// Bringing chi_g to the front of the word chi_S costs one sign per generator
// of S below bit g.
inline GrassmannElement berezin_integrate_one(const GrassmannElement& x, int g) {
  if (g < 0 || g >= x.generators())
    throw ConfigError("berezin_integrate: generator index out of range");
  GrassmannElement out(x.generators());
  const std::uint32_t bit = std::uint32_t{1} << g;
  const std::uint32_t below = bit - 1;
  const double norm = 1.0 / std::sqrt(2.0 * M_PI);
  for (std::uint32_t s = 0; s < x.size(); ++s) {
    if (!(s & bit)) continue;
    const cdouble v = x.coeff(s);
    if (v == cdouble(0)) continue;
    const int sign = (__builtin_popcount(s & below) & 1) ? -1 : 1;
    out.set_coeff(s & ~bit, out.coeff(s & ~bit) + static_cast<double>(sign) * norm * v);
  }
  return out;
}

// Iterated Berezin integral for the measure d chi_{g_1} ... d chi_{g_k}:
// the rightmost differential acts first.
inline GrassmannElement berezin_integrate(const GrassmannElement& x, const std::vector<int>& gs) {
  GrassmannElement out = x;
  for (auto it = gs.rbegin(); it != gs.rend(); ++it) out = berezin_integrate_one(out, *it);
  return out;
}

// Gaussian Berezin integral, computed entirely inside the algebra:
//   integral prod_i d chi*_i d chi_i exp(-chi^dag M chi) = det(M / (2 pi)).
inline cdouble fermionic_gaussian_det(const Eigen::MatrixXcd& M) {
  const int N = static_cast<int>(M.rows());
  if (M.cols() != N) throw ConfigError("fermionic_gaussian_det: matrix must be square");
  if (N < 1 || N > kMaxGrassmannPairs)
    throw ConfigError("fermionic_gaussian_det: supported sizes are 1..4");
  const int ngen = 2 * N;
  GrassmannElement quad(ngen);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j)
      quad += (-M(i, j)) * (chi_star(ngen, i) * chi(ngen, j));
  GrassmannElement val = gexp(quad);
  // Measure prod_{i=1..N} d chi*_i d chi_i, innermost (rightmost) pair first.
  for (int i = N - 1; i >= 0; --i) {
    val = berezin_integrate_one(val, 2 * i);     // d chi_i
    val = berezin_integrate_one(val, 2 * i + 1); // d chi*_i
  }
  if (!val.is_even() || val.norm_inf() != std::abs(val.scalar_part()))
    throw NumericError("fermionic_gaussian_det: non-scalar integral remainder");
  return val.scalar_part();
}

struct DetIdentityReport {
  cdouble engine{0, 0};
  cdouble oracle{0, 0};
  double rel_err = 0;
  bool pass = false;
};

// Engine vs direct determinant of M/(2 pi).
inline DetIdentityReport verify_det_identity(const Eigen::MatrixXcd& M, double tol = 1e-12) {
  DetIdentityReport r;
  r.engine = fermionic_gaussian_det(M);
  const int N = static_cast<int>(M.rows());
  r.oracle = (M / (2.0 * M_PI)).determinant();
  const double scale = std::max(1.0, std::abs(r.oracle));
  r.rel_err = std::abs(r.engine - r.oracle) / scale;
  r.pass = r.rel_err <= tol;
  (void)N;
  return r;
}

// ---------------------------------------------------------------------------
// Small matrices over the algebra and supermatrix operations.

struct GMat {
  int rows = 0, cols = 0, ngen = 0;
  std::vector<GrassmannElement> e;

  GMat() = default;
  GMat(int r, int c, int g) : rows(r), cols(c), ngen(g), e(static_cast<std::size_t>(r) * c, GrassmannElement(g)) {}
  GrassmannElement& at(int i, int j) { return e[static_cast<std::size_t>(i) * cols + j]; }
  const GrassmannElement& at(int i, int j) const { return e[static_cast<std::size_t>(i) * cols + j]; }

  static GMat identity(int n, int g) {
    GMat m(n, n, g);
    for (int i = 0; i < n; ++i) m.at(i, i) = GrassmannElement::scalar(g, 1.0);
    return m;
  }
  static GMat from_scalar(const Eigen::MatrixXcd& a, int g) {
    GMat m(static_cast<int>(a.rows()), static_cast<int>(a.cols()), g);
    for (int i = 0; i < m.rows; ++i)
      for (int j = 0; j < m.cols; ++j) m.at(i, j) = GrassmannElement::scalar(g, a(i, j));
    return m;
  }
  Eigen::MatrixXcd scalar_part() const {
    Eigen::MatrixXcd a(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) a(i, j) = at(i, j).scalar_part();
    return a;
  }
  double norm_inf() const {
    double m = 0;
    for (const GrassmannElement& x : e) m = std::max(m, x.norm_inf());
    return m;
  }
};

inline GMat operator*(const GMat& A, const GMat& B) {
  if (A.cols != B.rows || A.ngen != B.ngen) throw ConfigError("GMat: shape mismatch in product");
  GMat out(A.rows, B.cols, A.ngen);
  for (int i = 0; i < A.rows; ++i)
    for (int j = 0; j < B.cols; ++j) {
      GrassmannElement s(A.ngen);
      for (int k = 0; k < A.cols; ++k) s += A.at(i, k) * B.at(k, j);
      out.at(i, j) = s;
    }
  return out;
}
inline GMat operator+(const GMat& A, const GMat& B) {
  if (A.rows != B.rows || A.cols != B.cols || A.ngen != B.ngen)
    throw ConfigError("GMat: shape mismatch in sum");
  GMat out = A;
  for (std::size_t k = 0; k < out.e.size(); ++k) out.e[k] += B.e[k];
  return out;
}
inline GMat operator-(const GMat& A, const GMat& B) {
  if (A.rows != B.rows || A.cols != B.cols || A.ngen != B.ngen)
    throw ConfigError("GMat: shape mismatch in difference");
  GMat out = A;
  for (std::size_t k = 0; k < out.e.size(); ++k) out.e[k] -= B.e[k];
  return out;
}
inline GMat operator*(cdouble z, GMat A) {
  for (GrassmannElement& x : A.e) x *= z;
  return A;
}

// Determinant of a matrix with commuting (even) entries, by Leibniz expansion.
inline GrassmannElement gm_det_even(const GMat& A) {
  if (A.rows != A.cols) throw ConfigError("gm_det_even: matrix must be square");
  const int n = A.rows;
  if (n > 4) throw ConfigError("gm_det_even: supported sizes are 0..4");
  GrassmannElement out(A.ngen);
  std::vector<int> perm(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
  // Enumerate permutations with explicit parity tracking (Heap's algorithm
  // would permute in place; with n <= 4 the simple lexicographic walk is fine).
  do {
    int inv = 0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (perm[static_cast<std::size_t>(i)] > perm[static_cast<std::size_t>(j)]) ++inv;
    GrassmannElement term = GrassmannElement::scalar(A.ngen, (inv % 2) ? -1.0 : 1.0);
    for (int i = 0; i < n; ++i) term = term * A.at(i, perm[static_cast<std::size_t>(i)]);
    out += term;
  } while (std::next_permutation(perm.begin(), perm.end()));
  if (n == 0) out = GrassmannElement::scalar(A.ngen, 1.0);
  return out;
}

// Inverse of an even matrix with invertible scalar part:
//   A = A0 + Nu,  A^{-1} = sum_k (-A0^{-1} Nu)^k A0^{-1} (terminating).
inline GMat gm_inverse_even(const GMat& A) {
  if (A.rows != A.cols) throw ConfigError("gm_inverse_even: matrix must be square");
  const Eigen::MatrixXcd a0 = A.scalar_part();
  const Eigen::FullPivLU<Eigen::MatrixXcd> lu(a0);
  if (!lu.isInvertible()) throw NumericError("gm_inverse_even: singular scalar part");
  const GMat A0inv = GMat::from_scalar(lu.inverse(), A.ngen);
  GMat Nu = A - GMat::from_scalar(a0, A.ngen);
  GMat X = cdouble(-1.0) * (A0inv * Nu);
  GMat out = A0inv;
  GMat pow = A0inv;
  for (int k = 1; k <= A.ngen; ++k) {
    pow = X * pow;
    if (pow.norm_inf() == 0.0) break;
    out = out + pow;
  }
  return out;
}

// Supermatrix M = [[a, sigma], [rho, b]] with even diagonal blocks and odd
// off-diagonal blocks, stored as one (na+nb) x (na+nb) matrix over the algebra.
struct SuperMatrix {
  int na = 0, nb = 0;
  GMat m;

  static SuperMatrix from_blocks(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b,
                                 const GMat& sigma, const GMat& rho) {
    const int na = static_cast<int>(a.rows());
    const int nb = static_cast<int>(b.rows());
    if (a.cols() != na || b.cols() != nb) throw ConfigError("SuperMatrix: diagonal blocks must be square");
    if (sigma.rows != na || sigma.cols != nb || rho.rows != nb || rho.cols != na)
      throw ConfigError("SuperMatrix: off-diagonal block shape mismatch");
    if (sigma.ngen != rho.ngen) throw ConfigError("SuperMatrix: algebra mismatch");
    for (const GrassmannElement& x : sigma.e)
      if (!x.is_odd()) throw ConfigError("SuperMatrix: sigma block must be odd");
    for (const GrassmannElement& x : rho.e)
      if (!x.is_odd()) throw ConfigError("SuperMatrix: rho block must be odd");
    SuperMatrix M;
    M.na = na;
    M.nb = nb;
    M.m = GMat(na + nb, na + nb, sigma.ngen);
    for (int i = 0; i < na; ++i)
      for (int j = 0; j < na; ++j) M.m.at(i, j) = GrassmannElement::scalar(sigma.ngen, a(i, j));
    for (int i = 0; i < nb; ++i)
      for (int j = 0; j < nb; ++j)
        M.m.at(na + i, na + j) = GrassmannElement::scalar(sigma.ngen, b(i, j));
    for (int i = 0; i < na; ++i)
      for (int j = 0; j < nb; ++j) M.m.at(i, na + j) = sigma.at(i, j);
    for (int i = 0; i < nb; ++i)
      for (int j = 0; j < na; ++j) M.m.at(na + i, j) = rho.at(i, j);
    return M;
  }

  GMat block(int top, int left, int r, int c) const {
    GMat out(r, c, m.ngen);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) out.at(i, j) = m.at(top + i, left + j);
    return out;
  }
  GMat a() const { return block(0, 0, na, na); }
  GMat b() const { return block(na, na, nb, nb); }
  GMat sigma() const { return block(0, na, na, nb); }
  GMat rho() const { return block(na, 0, nb, na); }
};

inline SuperMatrix sm_mul(const SuperMatrix& A, const SuperMatrix& B) {
  if (A.na != B.na || A.nb != B.nb) throw ConfigError("sm_mul: block shape mismatch");
  SuperMatrix out;
  out.na = A.na;
  out.nb = A.nb;
  out.m = A.m * B.m;
  return out;
}

inline SuperMatrix sm_inverse(const SuperMatrix& A) {
  SuperMatrix out;
  out.na = A.na;
  out.nb = A.nb;
  out.m = gm_inverse_even(A.m);
  return out;
}

inline SuperMatrix sm_scale(cdouble z, const SuperMatrix& A) {
  SuperMatrix out = A;
  out.m = z * out.m;
  return out;
}

// Superdeterminant: Sdet M = det(a - sigma b^{-1} rho) / det(b).
inline GrassmannElement sdet(const SuperMatrix& M) {
  const GMat schur = M.a() - (M.sigma() * (gm_inverse_even(M.b()) * M.rho()));
  const GrassmannElement da = gm_det_even(schur);
  const GrassmannElement db = gm_det_even(M.b());
  return da * ginv(db);
}

// Supertrace of a matrix over the algebra (block sizes supplied by caller).
inline GrassmannElement gm_str(const GMat& A, int na) {
  if (A.rows != A.cols) throw ConfigError("gm_str: matrix must be square");
  GrassmannElement s(A.ngen);
  for (int i = 0; i < A.rows; ++i) {
    if (i < na)
      s += A.at(i, i);
    else
      s -= A.at(i, i);
  }
  return s;
}

// Str ln M = ln det(a0) - ln det(b0) + Str sum_k (-1)^{k+1} (M0^{-1} Nu)^k / k,
// with M0 the scalar part. The scalar branch is the principal one, so the
// identity exp(Str ln M) = Sdet M is the branch-free comparison.
inline GrassmannElement str_ln(const SuperMatrix& M) {
  const Eigen::MatrixXcd m0 = M.m.scalar_part();
  const Eigen::MatrixXcd a0 = m0.topLeftCorner(M.na, M.na);
  const Eigen::MatrixXcd b0 = m0.bottomRightCorner(M.nb, M.nb);
  const cdouble lead = std::log(a0.determinant()) - std::log(b0.determinant());
  const Eigen::FullPivLU<Eigen::MatrixXcd> lu(m0);
  if (!lu.isInvertible()) throw NumericError("str_ln: singular scalar part");
  const GMat X = GMat::from_scalar(lu.inverse(), M.m.ngen) *
                 (M.m - GMat::from_scalar(m0, M.m.ngen));
  GrassmannElement out = GrassmannElement::scalar(M.m.ngen, lead);
  GMat pow = GMat::identity(M.m.rows, M.m.ngen);
  for (int k = 1; k <= M.m.ngen; ++k) {
    pow = pow * X;
    if (pow.norm_inf() == 0.0) break;
    out += (((k % 2) == 1 ? 1.0 : -1.0) / static_cast<double>(k)) * gm_str(pow, M.na);
  }
  return out;
}

struct SdetIdentityReport {
  double product_err = 0;    // |Sdet(M1 M2) - Sdet M1 Sdet M2|
  double inverse_err = 0;    // |Sdet(M^{-1}) - 1/Sdet M|
  double scale_err = 0;      // |Sdet(z M) - Sdet M| (na == nb only)
  double strln_err = 0;      // |exp(Str ln M) - Sdet M|
  bool pass = false;
};

inline SdetIdentityReport sdet_and_identities(const SuperMatrix& M1, const SuperMatrix& M2,
                                              cdouble z, double tol = 1e-10) {
  SdetIdentityReport r;
  const GrassmannElement s1 = sdet(M1);
  const GrassmannElement s2 = sdet(M2);
  r.product_err = (sdet(sm_mul(M1, M2)) - s1 * s2).norm_inf();
  r.inverse_err = (sdet(sm_inverse(M1)) - ginv(s1)).norm_inf();
  if (M1.na == M1.nb && std::abs(z) > 0)
    r.scale_err = (sdet(sm_scale(z, M1)) - s1).norm_inf();
  r.strln_err = (gexp_with_scalar(str_ln(M1)) - s1).norm_inf();
  r.pass = r.product_err <= tol && r.inverse_err <= tol && r.scale_err <= tol &&
           r.strln_err <= tol;
  return r;
}

} // namespace bandwig
