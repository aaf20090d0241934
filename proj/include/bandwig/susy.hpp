#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "bandwig/analytics.hpp"
#include "bandwig/ensemble.hpp"
#include "bandwig/kernel.hpp"
#include "bandwig/quadrature.hpp"
#include "bandwig/stats.hpp"

namespace bandwig {

// Two equivalent dual integral representations of <G(0,0)(E + i eps)>:
//  - Raw: Gaussian weight exp(-(a^T J^{-1} a + b^T J^{-1} b)/2) with the
//    observable/fermion determinant det(J^{-1} - F - F').
//  - Shifted: contours moved through the dominant saddle; Gaussian weight
//    B^{-1} = J^{-1} - escr^2, vertices V_a, V_b, V0' and coupling D, D0'.
enum class DualForm { Raw, Shifted };

struct DualIntegrandSpec {
  std::shared_ptr<const KernelMatrix> J;
  double E = 1.0;
  double eps = 0.0;
  DualForm form = DualForm::Shifted;
  int obs_site = 0;
  double eta = kDefaultEnergyWindowEta;

  // Derived quantities (filled by make_dual_spec).
  int n = 0;                 // |Lambda|
  Eigen::MatrixXd Jd;        // J (real dense)
  Eigen::MatrixXd Jinv;      // J^{-1}
  Eigen::MatrixXd SJ;        // symmetric sqrt of J
  Eigen::MatrixXd C, SC;     // C kernel and its symmetric sqrt
  Eigen::MatrixXcd Binv, B;  // complex-mass Hessian and inverse
  cdouble escr{0, 0};        // dominant saddle at eps = 0
  cdouble Etld{0, 0};        // E + i eps - escr
  double mi2 = 0;
  double det_J = 0, det_C = 0;
  cdouble det_Binv{0, 0};
  double second_well = 0;    // b-offset of the subdominant well: 2 Im(E - escr)
};

inline constexpr int kMaxDualSpecVolume = 256;
inline constexpr int kMaxQuadratureVolume = 3;

inline DualIntegrandSpec make_dual_spec(std::shared_ptr<const KernelMatrix> J, double E,
                                        double eps, DualForm form, int obs_site = 0,
                                        double eta = kDefaultEnergyWindowEta) {
  if (!J) throw ConfigError("make_dual_spec: null kernel");
  if (!J->is_real()) throw ConfigError("make_dual_spec: J must be real");
  const std::int64_t n64 = J->torus.volume;
  if (n64 > kMaxDualSpecVolume)
    throw ConfigError("make_dual_spec: |Lambda| too large for the dual representation tools");
  const int n = static_cast<int>(n64);
  if (obs_site < 0 || obs_site >= n) throw ConfigError("make_dual_spec: obs_site out of range");
  if (form == DualForm::Raw) {
    if (!(eps > 0)) throw ConfigError("make_dual_spec: raw form requires eps > 0");
    if (!(std::abs(E) <= kEnergyWindowMax))
      throw ConfigError("make_dual_spec: raw form requires |E| <= 1.8");
  } else {
    if (eps < 0) throw ConfigError("make_dual_spec: shifted form requires eps >= 0");
    if (!(std::abs(E) > eta) || !(std::abs(E) <= kEnergyWindowMax))
      throw ConfigError("make_dual_spec: shifted form requires E in the window eta < |E| <= 1.8");
  }
  DualIntegrandSpec s;
  s.J = std::move(J);
  s.E = E;
  s.eps = eps;
  s.form = form;
  s.obs_site = obs_site;
  s.eta = eta;
  s.n = n;
  s.Jd = s.J->dense.real();
  s.Jinv = s.Jd.inverse();
  {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s.Jd);
    if (es.info() != Eigen::Success) throw NumericError("make_dual_spec: J eigensolve failed");
    if (es.eigenvalues().minCoeff() <= 0)
      throw ConfigError("make_dual_spec: J must be positive definite");
    s.SJ = es.operatorSqrt();
  }
  s.det_J = s.Jd.determinant();
  s.escr = saddle_point(E);
  s.Etld = cdouble(E, eps) - s.escr;
  const cdouble hess = 1.0 - s.escr * s.escr;
  s.mi2 = hess.imag();
  s.second_well = 2.0 * (cdouble(E) - s.escr).imag();
  const Eigen::MatrixXd Cinv =
      s.Jinv + (hess.real() - 1.0) * Eigen::MatrixXd::Identity(n, n);
  s.C = Cinv.inverse();
  {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s.C);
    if (es.info() != Eigen::Success) throw NumericError("make_dual_spec: C eigensolve failed");
    if (es.eigenvalues().minCoeff() <= 0)
      throw NumericError("make_dual_spec: C must be positive definite");
    s.SC = es.operatorSqrt();
  }
  s.det_C = s.C.determinant();
  s.Binv = s.Jinv.cast<cdouble>() -
           s.escr * s.escr * Eigen::MatrixXcd::Identity(n, n);
  s.B = s.Binv.inverse();
  s.det_Binv = s.Binv.determinant();
  return s;
}

namespace detail {

inline cdouble det_small(const cdouble* K, int n) {
  switch (n) {
    case 1:
      return K[0];
    case 2:
      return K[0] * K[3] - K[1] * K[2];
    case 3:
      return K[0] * (K[4] * K[8] - K[5] * K[7]) - K[1] * (K[3] * K[8] - K[5] * K[6]) +
             K[2] * (K[3] * K[7] - K[4] * K[6]);
    default:
      throw ConfigError("det_small: only |Lambda| <= 3 supported");
  }
}

// Raw-form node factors, written pole-free. With alpha_i = E_eps - a_i,
// beta_i = E_eps - i b_i, G_i = alpha_i beta_i and K = diag(G) J^{-1} - Id:
//   prod_i beta_i/alpha_i * det(J^{-1} - F)        = prod_i alpha_i^{-2} det(K)
//   prod_i beta_i/alpha_i * det(J^{-1} - F - F')   = prod_i alpha_i^{-2} det(K - e0 e0^T)
// (diag(G) F' = e0 e0^T exactly), so no 1/beta_i singularity ever appears.
struct RawNode {
  cdouble log_scalar;   // -a^T J^{-1} a/2 - b^T J^{-1} b/2 - 2 sum ln(alpha_i)
  cdouble det_norm;     // det(K)
  cdouble det_obs;      // det(K - e_obs e_obs^T)
  cdouble inv_alpha0;   // 1/alpha_{obs}
};

inline RawNode raw_node(const DualIntegrandSpec& s, const Eigen::VectorXcd& a,
                        const Eigen::VectorXcd& b) {
  const int n = s.n;
  const cdouble Eeps(s.E, s.eps);
  RawNode out;
  cdouble qa = 0, qb = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      qa += a(i) * s.Jinv(i, j) * a(j);
      qb += b(i) * s.Jinv(i, j) * b(j);
    }
  cdouble logs = -0.5 * (qa + qb);
  cdouble G[3], alpha[3];
  for (int i = 0; i < n; ++i) {
    alpha[i] = Eeps - a(i);
    const cdouble beta = Eeps - cdouble(0, 1) * b(i);
    G[i] = alpha[i] * beta;
    logs -= 2.0 * std::log(alpha[i]);
  }
  cdouble K[9];
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      K[i * n + j] = G[i] * s.Jinv(i, j) - (i == j ? cdouble(1) : cdouble(0));
  out.log_scalar = logs;
  out.det_norm = det_small(K, n);
  K[s.obs_site * n + s.obs_site] -= 1.0;
  out.det_obs = det_small(K, n);
  out.inv_alpha0 = 1.0 / alpha[s.obs_site];
  return out;
}

// Shifted-form node factors:
//   log_scalar = -a^T B^{-1} a/2 - b^T B^{-1} b/2 + sum_i [V_a(a_i) + V_b(b_i)]
//   det_norm = det(I + D B), det_obs = det(I + (D + D0') B), obs scalar 1/(Etld - a0).
struct ShiftedNode {
  cdouble log_scalar;
  cdouble det_norm;
  cdouble det_obs;
  cdouble inv_alpha0;
};

inline ShiftedNode shifted_node(const DualIntegrandSpec& s, const Eigen::VectorXcd& a,
                                const Eigen::VectorXcd& b) {
  const int n = s.n;
  ShiftedNode out;
  cdouble qa = 0, qb = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      qa += a(i) * s.Binv(i, j) * a(j);
      qb += b(i) * s.Binv(i, j) * b(j);
    }
  cdouble logs = -0.5 * (qa + qb);
  cdouble D[3], ia[3], ib[3];
  const cdouble es2 = s.escr * s.escr;
  for (int i = 0; i < n; ++i) {
    const cdouble da = s.Etld - a(i);
    const cdouble db = s.Etld - cdouble(0, 1) * b(i);
    ia[i] = 1.0 / da;
    ib[i] = 1.0 / db;
    D[i] = es2 - ia[i] * ib[i];
    // V_a(a) + V_b(b); the +-ln(Etld) normalizers cancel within each site pair.
    logs += -s.escr * a(i) - es2 * a(i) * a(i) / 2.0 - std::log(da);
    logs += cdouble(0, 1) * s.escr * b(i) - es2 * b(i) * b(i) / 2.0 + std::log(db);
  }
  cdouble M[9];
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      M[i * n + j] = (i == j ? cdouble(1) : cdouble(0)) + D[i] * s.B(i, j);
  out.log_scalar = logs;
  out.det_norm = det_small(M, n);
  const cdouble d0 = -ia[s.obs_site] * ib[s.obs_site];
  for (int j = 0; j < n; ++j) M[s.obs_site * n + j] += d0 * s.B(s.obs_site, j);
  out.det_obs = det_small(M, n);
  out.inv_alpha0 = ia[s.obs_site];
  return out;
}

} // namespace detail

// Lemma-style raw integrand on the original (real) contours, observable and
// fermion corrections included, without the (2pi)^{-|Lambda|} constant.
inline cdouble integrand_raw(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                             const DualIntegrandSpec& s) {
  if (s.form != DualForm::Raw) throw ConfigError("integrand_raw: spec has shifted form");
  if (a.size() != s.n || b.size() != s.n) throw ConfigError("integrand_raw: dimension mismatch");
  const detail::RawNode nd = detail::raw_node(s, a.cast<cdouble>(), b.cast<cdouble>());
  return std::exp(nd.log_scalar) * nd.det_obs * nd.inv_alpha0;
}

// Saddle-shifted integrand relative to Lebesgue measure, observable vertices
// included, without the (2pi)^{-|Lambda|} det(B^{-1}) constant.
inline cdouble integrand_shifted(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                                 const DualIntegrandSpec& s) {
  if (s.form != DualForm::Shifted) throw ConfigError("integrand_shifted: spec has raw form");
  if (a.size() != s.n || b.size() != s.n)
    throw ConfigError("integrand_shifted: dimension mismatch");
  const detail::ShiftedNode nd = detail::shifted_node(s, a.cast<cdouble>(), b.cast<cdouble>());
  return std::exp(nd.log_scalar) * nd.det_obs * nd.inv_alpha0;
}

struct QuadratureScheme {
  int nodes = 64;             // Gauss-Hermite nodes per dimension
  double trunc_radius = 12.0; // drop 1D abscissas with |sqrt(2) t| beyond this
  double tol = 1e-6;          // target |ratio(n) - ratio(n/2)|
  double contour_shift = 0.75; // raw form: a -> a - i c (poles stay above)
  int max_refinements = 2;
};

struct QuadratureResult {
  cdouble value{0, 0};   // I_obs / I_norm, the <G(0,0)> estimate
  cdouble i_obs{0, 0};   // absolute observable integral (constants included)
  cdouble i_norm{0, 0};  // absolute normalization integral; equals 1 in exact arithmetic
  double error = 0;      // node-doubling error estimate on `value`
  int nodes_used = 0;
  std::int64_t evaluations = 0;
  double second_well_fraction = 0; // |norm integral over the subdominant b-well| ratio
};

namespace detail {

struct SweepSums {
  KahanComplexSum obs, norm, second;
  std::int64_t evals = 0;
};

inline SweepSums quadrature_sweep(const DualIntegrandSpec& s, const QuadratureScheme& sch,
                                  int nodes) {
  const int n = s.n;
  const GaussHermite gh = gauss_hermite(nodes);
  // 1D tables: physical abscissa x = sqrt(2) t and log-weight including the
  // +t^2 that cancels the Gaussian reweighting.
  std::vector<double> x1, lw1;
  for (int k = 0; k < nodes; ++k) {
    const double t = gh.nodes[static_cast<std::size_t>(k)];
    const double x = M_SQRT2 * t;
    if (std::abs(x) > sch.trunc_radius) continue;
    x1.push_back(x);
    lw1.push_back(gh.log_weight[static_cast<std::size_t>(k)] + t * t);
  }
  const int K = static_cast<int>(x1.size());
  if (K < 4) throw NumericError("quadrature: truncation removed almost all nodes");
  const Eigen::MatrixXd& S = s.form == DualForm::Raw ? s.SJ : s.SC;
  const double cshift = s.form == DualForm::Raw ? sch.contour_shift : 0.0;

  SweepSums sums;
  std::vector<int> idx(static_cast<std::size_t>(2 * n), 0);
  Eigen::VectorXd x(n), y(n), u(n), v(n);
  Eigen::VectorXcd a(n), b(n);
  while (true) {
    double lw = 0;
    for (int k = 0; k < n; ++k) {
      x(k) = x1[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])];
      y(k) = x1[static_cast<std::size_t>(idx[static_cast<std::size_t>(n + k)])];
      lw += lw1[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])] +
            lw1[static_cast<std::size_t>(idx[static_cast<std::size_t>(n + k)])];
    }
    u.noalias() = S * x;
    v.noalias() = S * y;
    for (int k = 0; k < n; ++k) {
      a(k) = cdouble(u(k), -cshift);
      b(k) = cdouble(v(k), 0.0);
    }
    cdouble log_scalar, det_norm, det_obs, inv_alpha0;
    if (s.form == DualForm::Raw) {
      const RawNode nd = raw_node(s, a, b);
      log_scalar = nd.log_scalar;
      det_norm = nd.det_norm;
      det_obs = nd.det_obs;
      inv_alpha0 = nd.inv_alpha0;
    } else {
      const ShiftedNode nd = shifted_node(s, a, b);
      log_scalar = nd.log_scalar;
      det_norm = nd.det_norm;
      det_obs = nd.det_obs;
      inv_alpha0 = nd.inv_alpha0;
    }
    const cdouble expo = log_scalar + lw;
    ++sums.evals;
    if (expo.real() > 700.0)
      throw NumericError("quadrature: integrand overflow (diverging exponent)");
    if (expo.real() >= -745.0) {
      const cdouble w = std::exp(expo);
      sums.norm.add(w * det_norm);
      sums.obs.add(w * det_obs * inv_alpha0);
      if (s.form == DualForm::Shifted) {
        bool in_second = true;
        for (int k = 0; k < n; ++k)
          if (std::abs(v(k) - s.second_well) > 0.5) in_second = false;
        if (in_second) sums.second.add(w * det_norm);
      }
    }
    // Odometer over the 2n-dimensional tensor grid.
    std::size_t kk = 0;
    while (kk < idx.size() && ++idx[kk] == K) {
      idx[kk] = 0;
      ++kk;
    }
    if (kk == idx.size()) break;
  }
  return sums;
}

inline cdouble quadrature_constant(const DualIntegrandSpec& s) {
  const double two_pi_pow = std::pow(2.0 * M_PI, -static_cast<double>(s.n));
  const double two_pow = std::pow(2.0, static_cast<double>(s.n));
  if (s.form == DualForm::Raw) return cdouble(two_pi_pow * s.det_J * two_pow);
  return two_pi_pow * s.det_Binv * s.det_C * two_pow;
}

} // namespace detail

// Deterministic tensor-product Gauss-Hermite evaluation of the dual integral,
// whitened by the symmetric square root of J (raw) or C (shifted). The error
// estimate is the change of the observable ratio under halving the per-axis
// node count; the scheme refines by doubling until `tol` is met.
inline QuadratureResult quadrature(const DualIntegrandSpec& s, QuadratureScheme scheme = {}) {
  if (s.n > kMaxQuadratureVolume)
    throw ConfigError("quadrature: tensor quadrature supports |Lambda| <= 3");
  if (scheme.nodes < 16) throw ConfigError("quadrature: need at least 16 nodes per axis");
  if (scheme.trunc_radius < 8.0)
    throw ConfigError("quadrature: truncation radius below safe minimum (8)");
  if (!(scheme.tol > 0)) throw ConfigError("quadrature: tolerance must be positive");
  if (s.form == DualForm::Raw && !(scheme.contour_shift > 0))
    throw ConfigError("quadrature: raw form requires a positive contour shift");
  const cdouble constant = detail::quadrature_constant(s);
  int n = scheme.nodes;
  for (int attempt = 0;; ++attempt) {
    const detail::SweepSums half = detail::quadrature_sweep(s, scheme, n / 2);
    const detail::SweepSums full = detail::quadrature_sweep(s, scheme, n);
    const cdouble r_half = half.obs.sum / half.norm.sum;
    const cdouble r_full = full.obs.sum / full.norm.sum;
    const double err = std::abs(r_full - r_half);
    if (err <= scheme.tol) {
      QuadratureResult out;
      out.value = r_full;
      out.i_obs = constant * full.obs.sum;
      out.i_norm = constant * full.norm.sum;
      out.error = err;
      out.nodes_used = n;
      out.evaluations = half.evals + full.evals;
      out.second_well_fraction =
          std::abs(full.second.sum) / std::max(1e-300, std::abs(full.norm.sum));
      return out;
    }
    if (attempt >= scheme.max_refinements)
      throw NumericError("quadrature: failed to reach tolerance after refinements (err " +
                         std::to_string(err) + ")");
    if (2 * n > kMaxHermiteNodes)
      throw NumericError("quadrature: node cap reached before tolerance");
    n *= 2;
  }
}

// Fraction of the normalization integral carried by the subdominant b-well
// (all b_i within 0.5 of the second saddle offset). Shifted form only.
inline double second_saddle_fraction(const DualIntegrandSpec& s, const QuadratureScheme& scheme) {
  if (s.form != DualForm::Shifted)
    throw ConfigError("second_saddle_fraction: requires the shifted form");
  const detail::SweepSums sums = detail::quadrature_sweep(s, scheme, scheme.nodes);
  return std::abs(sums.second.sum) / std::max(1e-300, std::abs(sums.norm.sum));
}

// Monte Carlo cross-check: direct ensemble average of G(0,0) vs the
// quadrature value, compared componentwise in standard-error units.
struct McReport {
  cdouble quad{0, 0};
  cdouble mc{0, 0};
  double se_re = 0, se_im = 0;
  double sigma = 0; // max componentwise |difference| / se
  std::int64_t samples = 0;
  bool pass = false;
};

inline McReport mc_crosscheck(const DualIntegrandSpec& s, cdouble quad_value,
                              std::int64_t samples, std::uint64_t seed,
                              double sigma_threshold = 4.0) {
  if (samples < 1000) throw ConfigError("mc_crosscheck: need at least 1000 samples");
  if (!(s.eps > 0)) throw ConfigError("mc_crosscheck: requires eps > 0");
  const EnsembleSpec ens = make_ensemble(s.J, samples, seed);
  const int n = s.n;
  ComplexAccumulator acc;
  Eigen::VectorXcd e = Eigen::VectorXcd::Zero(n);
  e(s.obs_site) = 1.0;
  for (std::int64_t k = 0; k < samples; ++k) {
    const BandMatrixSample sample = sample_H(ens, static_cast<std::uint64_t>(k));
    Eigen::MatrixXcd M = -sample.H;
    M.diagonal().array() += cdouble(s.E, s.eps);
    const Eigen::VectorXcd g = M.partialPivLu().solve(e);
    acc.add(g(s.obs_site));
  }
  McReport r;
  r.quad = quad_value;
  r.mc = acc.mean();
  r.se_re = acc.se_re();
  r.se_im = acc.se_im();
  r.samples = samples;
  const double dr = std::abs(r.quad.real() - r.mc.real());
  const double di = std::abs(r.quad.imag() - r.mc.imag());
  r.sigma = std::max(dr / std::max(1e-300, r.se_re), di / std::max(1e-300, r.se_im));
  r.pass = r.sigma <= sigma_threshold;
  return r;
}

} // namespace bandwig
