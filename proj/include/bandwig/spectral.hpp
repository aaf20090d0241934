#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "bandwig/ensemble.hpp"
#include "bandwig/stats.hpp"
#include "bandwig/threads.hpp"

namespace bandwig {

inline void require_hermitian(const Eigen::MatrixXcd& H, double tol = 1e-12) {
  const std::int64_t n = H.rows();
  if (H.cols() != n) throw ConfigError("require_hermitian: matrix must be square");
  double dev = 0;
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = i; j < n; ++j)
      dev = std::max(dev, std::abs(H(i, j) - std::conj(H(j, i))));
  if (dev > tol) throw ConfigError("require_hermitian: asymmetry " + std::to_string(dev));
}

struct EigenSystem {
  Eigen::VectorXd values; // ascending
  Eigen::MatrixXcd vectors;
  bool has_vectors = false;
};

inline EigenSystem hermitian_eigensystem(const Eigen::MatrixXcd& H, bool with_vectors) {
  require_hermitian(H);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(
      H, with_vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success)
    throw NumericError("hermitian_eigensystem: eigensolver failed to converge");
  EigenSystem es;
  es.values = solver.eigenvalues();
  if (with_vectors) {
    es.vectors = solver.eigenvectors();
    es.has_vectors = true;
  }
  // Invariant: the spectrum preserves the trace.
  const double tr = H.trace().real();
  const double sum = es.values.sum();
  double scale = std::max(1.0, H.cwiseAbs().maxCoeff() * static_cast<double>(H.rows()));
  if (std::abs(tr - sum) > 1e-8 * scale)
    throw NumericError("hermitian_eigensystem: trace mismatch in spectrum");
  return es;
}

inline std::vector<double> hermitian_eigenvalues(const Eigen::MatrixXcd& H) {
  const EigenSystem es = hermitian_eigensystem(H, false);
  return std::vector<double>(es.values.data(), es.values.data() + es.values.size());
}

// ---------------------------------------------------------------------------
// Resolvent rows by direct linear solves.

struct ResolventRows {
  std::vector<std::int64_t> sites;
  Eigen::MatrixXcd rows; // rows(k, x) = G(sites[k], x)
  double residual = 0;   // max solve residual, infinity norm
  double cross_check = 0; // row-route vs column-route disagreement
  std::string method = "linear-solve";
};

// G(o, .) for each requested site o, with G = (E + i eps - H)^{-1}.
// Rows come from transpose solves of M^T y = e_o; a column solve of the same
// LU factorization cross-checks one shared entry (for complex Hermitian H the
// resolvent is NOT symmetric, so the two routes genuinely differ in code path).
inline ResolventRows resolvent_entries(const Eigen::MatrixXcd& H, double E, double eps,
                                       const std::vector<std::int64_t>& sites) {
  if (!(eps > 0)) throw ConfigError("resolvent_entries: eps must be > 0");
  if (sites.empty()) throw ConfigError("resolvent_entries: no sites requested");
  require_hermitian(H);
  const std::int64_t n = H.rows();
  for (std::int64_t o : sites)
    if (o < 0 || o >= n) throw ConfigError("resolvent_entries: site index out of range");
  Eigen::MatrixXcd M = -H;
  M.diagonal().array() += cdouble(E, eps);
  const Eigen::PartialPivLU<Eigen::MatrixXcd> lu(M);
  ResolventRows out;
  out.sites = sites;
  out.rows.resize(static_cast<std::int64_t>(sites.size()), n);
  for (std::size_t k = 0; k < sites.size(); ++k) {
    Eigen::VectorXcd e = Eigen::VectorXcd::Zero(n);
    e(sites[k]) = 1.0;
    const Eigen::VectorXcd y = lu.transpose().solve(e); // y_x = G(o, x)
    out.rows.row(static_cast<std::int64_t>(k)) = y.transpose();
    const double resid = (M.transpose() * y - e).cwiseAbs().maxCoeff();
    out.residual = std::max(out.residual, resid);
  }
  if (out.residual > 1e-10 * std::max(1.0, out.rows.cwiseAbs().maxCoeff()))
    throw NumericError("resolvent_entries: solve residual exceeds tolerance");
  // Column route: G(., o) from M x = e_o; compare entry G(sites[0], sites.back()).
  {
    const std::int64_t o = sites.back();
    Eigen::VectorXcd e = Eigen::VectorXcd::Zero(n);
    e(o) = 1.0;
    const Eigen::VectorXcd x = lu.solve(e); // x_i = G(i, o)
    out.cross_check = std::abs(out.rows(0, o) - x(sites[0]));
    if (out.cross_check > 1e-9 * std::max(1.0, std::abs(x(sites[0]))))
      throw NumericError("resolvent_entries: row/column route disagreement");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Density of states.

enum class DosMode { Resolvent, Histogram };

struct SpectralResult {
  std::vector<double> energies;
  std::vector<double> dos, dos_se;
  std::vector<cdouble> g00;          // <G(0,0)> per energy (resolvent mode)
  std::vector<double> g00_se_re, g00_se_im;
  double eps = 0;
  double bin_width = 0;
  std::int64_t samples = 0;
  std::int64_t volume = 0;
  std::string method;
};

// Smoothed empirical DOS at broadening eps (one eigendecomposition per
// sample, reused across the whole energy grid):
//   rho_hat(E) = -(1/(pi |Lambda|)) Im sum_m 1/(E + i eps - lambda_m).
inline double dos_resolvent_value(const std::vector<double>& lambda, double E, double eps,
                                  std::int64_t volume) {
  cdouble s = 0;
  for (double l : lambda) s += 1.0 / (cdouble(E, eps) - l);
  return -s.imag() / (M_PI * static_cast<double>(volume));
}

// The same estimator written as an explicit Lorentzian mixture.
inline double dos_lorentzian_value(const std::vector<double>& lambda, double E, double eps,
                                   std::int64_t volume) {
  double s = 0;
  for (double l : lambda) s += (eps / M_PI) / ((E - l) * (E - l) + eps * eps);
  return s / static_cast<double>(volume);
}

struct DosOptions {
  DosMode mode = DosMode::Resolvent;
  bool want_g00 = false;  // also average G(0,0) over samples (resolvent mode)
  bool site_average = true; // average the observable over all sites, not just site 0
  double bin_width = 0;   // histogram mode; 0 = grid spacing
  int workers = 1;
};

inline SpectralResult estimate_dos(const EnsembleSpec& spec, const std::vector<double>& energies,
                                   double eps, const DosOptions& opts = {}) {
  if (energies.empty()) throw ConfigError("estimate_dos: empty energy grid");
  if (opts.mode == DosMode::Resolvent && !(eps > 0))
    throw ConfigError("estimate_dos: resolvent mode requires eps > 0");
  const std::int64_t S = spec.sample_count;
  const std::int64_t V = spec.J->torus.volume;
  const std::size_t ne = energies.size();
  double bin_width = opts.bin_width;
  if (opts.mode == DosMode::Histogram) {
    if (bin_width <= 0) {
      if (ne < 2) throw ConfigError("estimate_dos: histogram mode needs a bin width");
      bin_width = energies[1] - energies[0];
      for (std::size_t k = 1; k + 1 < ne; ++k)
        if (std::abs((energies[k + 1] - energies[k]) - bin_width) > 1e-9)
          throw ConfigError("estimate_dos: histogram mode needs a uniform grid");
    }
    if (!(bin_width > 0)) throw ConfigError("estimate_dos: bin width must be positive");
  }

  // Per-sample slabs keep the reduction order fixed regardless of threading.
  std::vector<double> dos_slab(static_cast<std::size_t>(S) * ne);
  std::vector<cdouble> g_slab(opts.want_g00 ? static_cast<std::size_t>(S) * ne : 0);
  const bool want_g = opts.want_g00 && opts.mode == DosMode::Resolvent;

  parallel_for_index(S, opts.workers, [&](std::int64_t s) {
    const BandMatrixSample sample = sample_H(spec, static_cast<std::uint64_t>(s));
    const EigenSystem es = hermitian_eigensystem(sample.H, want_g);
    const std::vector<double> lambda(es.values.data(), es.values.data() + es.values.size());
    double* drow = &dos_slab[static_cast<std::size_t>(s) * ne];
    if (opts.mode == DosMode::Resolvent) {
      for (std::size_t k = 0; k < ne; ++k)
        drow[k] = dos_resolvent_value(lambda, energies[k], eps, V);
    } else {
      for (std::size_t k = 0; k < ne; ++k) {
        const double lo = energies[k] - bin_width / 2.0;
        const double hi = energies[k] + bin_width / 2.0;
        std::int64_t cnt = 0;
        for (double l : lambda)
          if (l >= lo && l < hi) ++cnt;
        drow[k] = static_cast<double>(cnt) / (static_cast<double>(V) * bin_width);
      }
    }
    if (want_g) {
      cdouble* grow = &g_slab[static_cast<std::size_t>(s) * ne];
      // |U_{xm}|^2 weights; averaged over all sites x the weight is 1/V exactly,
      // so the site-averaged G(x,x) reduces to the normalized trace.
      if (opts.site_average) {
        for (std::size_t k = 0; k < ne; ++k) {
          cdouble g = 0;
          for (std::int64_t m = 0; m < V; ++m) g += 1.0 / (cdouble(energies[k], eps) - es.values(m));
          grow[k] = g / static_cast<double>(V);
        }
      } else {
        Eigen::VectorXd w(V);
        for (std::int64_t m = 0; m < V; ++m) w(m) = std::norm(es.vectors(0, m));
        for (std::size_t k = 0; k < ne; ++k) {
          cdouble g = 0;
          for (std::int64_t m = 0; m < V; ++m) g += w(m) / (cdouble(energies[k], eps) - es.values(m));
          grow[k] = g;
        }
      }
    }
  });

  SpectralResult r;
  r.energies = energies;
  r.eps = eps;
  r.bin_width = opts.mode == DosMode::Histogram ? bin_width : 0.0;
  r.samples = S;
  r.volume = V;
  r.method = opts.mode == DosMode::Histogram ? "histogram" : "eigendecomposition";
  r.dos.resize(ne);
  r.dos_se.resize(ne);
  for (std::size_t k = 0; k < ne; ++k) {
    Accumulator a;
    for (std::int64_t s = 0; s < S; ++s) a.add(dos_slab[static_cast<std::size_t>(s) * ne + k]);
    r.dos[k] = a.mean;
    r.dos_se[k] = a.std_error();
  }
  if (want_g) {
    r.g00.resize(ne);
    r.g00_se_re.resize(ne);
    r.g00_se_im.resize(ne);
    for (std::size_t k = 0; k < ne; ++k) {
      ComplexAccumulator a;
      for (std::int64_t s = 0; s < S; ++s) a.add(g_slab[static_cast<std::size_t>(s) * ne + k]);
      r.g00[k] = a.mean();
      r.g00_se_re[k] = a.se_re();
      r.g00_se_im[k] = a.se_im();
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Resolvent two-point function R(x) = <G(0,x) G(x,0)>.

struct TwoPointProfile {
  std::vector<double> radius;        // shell radii, ascending
  std::vector<std::int64_t> shell_count;
  std::vector<cdouble> R;            // shell means over samples
  std::vector<double> R_se_re, R_se_im;
  std::vector<cdouble> g0x;          // shell means of <G(0,x)> (should vanish off 0)
  std::vector<double> g0x_se_re, g0x_se_im;
  double E = 0, eps = 0;
  std::int64_t samples = 0, volume = 0;
  int origins = 0;                   // 0 = all origins (full inverse)
  double fit_rate = 0, fit_amplitude = 0, fit_rms = 0;
  int fit_points = 0;
  double sum_rule_residual = 0;      // max over samples of |sum_x R_s(x) - tr(G^2)/V|
  std::string method;
};

struct ROptions {
  int origins = 0;        // 0: average over every origin via a full inverse
  double fit_rmin = -1;   // default W
  double fit_rmax = -1;   // default min side / 2
  int workers = 1;
};

inline TwoPointProfile estimate_R(const EnsembleSpec& spec, double E, double eps,
                                  const ROptions& opts = {}) {
  if (!(eps > 0)) throw ConfigError("estimate_R: eps must be > 0");
  const LatticeTorus& torus = spec.J->torus;
  const std::int64_t V = torus.volume;
  const std::int64_t S = spec.sample_count;

  // Shell layout from exact squared radii.
  std::vector<std::int64_t> disp_r2(static_cast<std::size_t>(V));
  std::map<std::int64_t, std::size_t> shell_of_r2;
  for (std::int64_t x = 0; x < V; ++x) {
    std::int64_t r2 = 0;
    for (int a = 0; a < torus.d; ++a) {
      const int m = torus.coord(x, a);
      const int L = torus.sides[static_cast<std::size_t>(a)];
      const std::int64_t mm = (m > L - m) ? (L - m) : m;
      r2 += mm * mm;
    }
    disp_r2[static_cast<std::size_t>(x)] = r2;
    shell_of_r2.emplace(r2, 0);
  }
  std::size_t ns = 0;
  for (auto& kv : shell_of_r2) kv.second = ns++;
  std::vector<std::size_t> shell_idx(static_cast<std::size_t>(V));
  std::vector<double> shell_radius(ns);
  std::vector<std::int64_t> shell_count(ns, 0);
  for (std::int64_t x = 0; x < V; ++x) {
    const std::size_t k = shell_of_r2[disp_r2[static_cast<std::size_t>(x)]];
    shell_idx[static_cast<std::size_t>(x)] = k;
    shell_radius[k] = std::sqrt(static_cast<double>(disp_r2[static_cast<std::size_t>(x)]));
    shell_count[k] += 1;
  }

  // Per-sample shell values, reduced sequentially afterwards.
  std::vector<cdouble> R_slab(static_cast<std::size_t>(S) * ns);
  std::vector<cdouble> g_slab(static_cast<std::size_t>(S) * ns);
  std::vector<double> sum_rule(static_cast<std::size_t>(S));

  parallel_for_index(S, opts.workers, [&](std::int64_t s) {
    const BandMatrixSample sample = sample_H(spec, static_cast<std::uint64_t>(s));
    Eigen::MatrixXcd M = -sample.H;
    M.diagonal().array() += cdouble(E, eps);
    std::vector<cdouble> Rd(static_cast<std::size_t>(V), cdouble(0));
    std::vector<cdouble> Gd(static_cast<std::size_t>(V), cdouble(0));
    cdouble tr_g2 = 0;
    double norm_per_disp = 0;
    if (opts.origins == 0) {
      const Eigen::PartialPivLU<Eigen::MatrixXcd> lu(M);
      const Eigen::MatrixXcd G = lu.inverse();
      {
        // Spot residual check on one unit column.
        Eigen::VectorXcd e = Eigen::VectorXcd::Zero(V);
        e(0) = 1.0;
        const double resid = (M * G.col(0) - e).cwiseAbs().maxCoeff();
        if (resid > 1e-8)
          throw NumericError("estimate_R: inverse residual exceeds tolerance");
      }
      for (std::int64_t o = 0; o < V; ++o)
        for (std::int64_t x = 0; x < V; ++x) {
          const std::int64_t disp = torus.displacement_site(x, o);
          const cdouble rox = G(o, x) * G(x, o);
          Rd[static_cast<std::size_t>(disp)] += rox;
          Gd[static_cast<std::size_t>(disp)] += G(o, x);
          tr_g2 += rox;
        }
      norm_per_disp = static_cast<double>(V);
      tr_g2 /= static_cast<double>(V);
    } else {
      const Eigen::PartialPivLU<Eigen::MatrixXcd> lu(M);
      const int k = std::min<std::int64_t>(opts.origins, V);
      for (int t = 0; t < k; ++t) {
        const std::int64_t o = (V * t) / k;
        Eigen::VectorXcd e = Eigen::VectorXcd::Zero(V);
        e(o) = 1.0;
        const Eigen::VectorXcd col = lu.solve(e);            // col_x = G(x, o)
        const Eigen::VectorXcd row = lu.transpose().solve(e); // row_x = G(o, x)
        for (std::int64_t x = 0; x < V; ++x) {
          const std::int64_t disp = torus.displacement_site(x, o);
          Rd[static_cast<std::size_t>(disp)] += row(x) * col(x);
          Gd[static_cast<std::size_t>(disp)] += row(x);
        }
      }
      norm_per_disp = static_cast<double>(k);
      tr_g2 = 0; // no full trace available in subset mode
    }
    // Shell reduction within the sample.
    std::vector<cdouble> Rs(ns, cdouble(0)), Gs(ns, cdouble(0));
    cdouble disp_sum = 0;
    for (std::int64_t x = 0; x < V; ++x) {
      const cdouble rv = Rd[static_cast<std::size_t>(x)] / norm_per_disp;
      Rs[shell_idx[static_cast<std::size_t>(x)]] += rv;
      Gs[shell_idx[static_cast<std::size_t>(x)]] += Gd[static_cast<std::size_t>(x)] / norm_per_disp;
      disp_sum += rv;
    }
    for (std::size_t kk = 0; kk < ns; ++kk) {
      Rs[kk] /= static_cast<double>(shell_count[kk]);
      Gs[kk] /= static_cast<double>(shell_count[kk]);
    }
    sum_rule[static_cast<std::size_t>(s)] =
        opts.origins == 0 ? std::abs(disp_sum - tr_g2) : 0.0;
    std::copy(Rs.begin(), Rs.end(), R_slab.begin() + static_cast<std::ptrdiff_t>(s * static_cast<std::int64_t>(ns)));
    std::copy(Gs.begin(), Gs.end(), g_slab.begin() + static_cast<std::ptrdiff_t>(s * static_cast<std::int64_t>(ns)));
  });

  TwoPointProfile p;
  p.radius = shell_radius;
  p.shell_count = shell_count;
  p.E = E;
  p.eps = eps;
  p.samples = S;
  p.volume = V;
  p.origins = opts.origins;
  p.method = opts.origins == 0 ? "full-inverse" : "lu-subset";
  p.R.resize(ns);
  p.R_se_re.resize(ns);
  p.R_se_im.resize(ns);
  p.g0x.resize(ns);
  p.g0x_se_re.resize(ns);
  p.g0x_se_im.resize(ns);
  for (std::size_t k = 0; k < ns; ++k) {
    ComplexAccumulator ar, ag;
    for (std::int64_t s = 0; s < S; ++s) {
      ar.add(R_slab[static_cast<std::size_t>(s) * ns + k]);
      ag.add(g_slab[static_cast<std::size_t>(s) * ns + k]);
    }
    p.R[k] = ar.mean();
    p.R_se_re[k] = ar.se_re();
    p.R_se_im[k] = ar.se_im();
    p.g0x[k] = ag.mean();
    p.g0x_se_re[k] = ag.se_re();
    p.g0x_se_im[k] = ag.se_im();
  }
  for (std::int64_t s = 0; s < S; ++s)
    p.sum_rule_residual = std::max(p.sum_rule_residual, sum_rule[static_cast<std::size_t>(s)]);

  // Exponential fit of ln |R| over the window [fit_rmin, fit_rmax].
  int min_side = torus.sides[0];
  for (int side : torus.sides) min_side = std::min(min_side, side);
  const double rmin = opts.fit_rmin >= 0 ? opts.fit_rmin : static_cast<double>(spec.J->W);
  const double rmax = opts.fit_rmax >= 0 ? opts.fit_rmax : static_cast<double>(min_side) / 2.0;
  std::vector<double> xs, ys;
  for (std::size_t k = 0; k < ns; ++k) {
    if (p.radius[k] < rmin || p.radius[k] > rmax) continue;
    const double v = std::abs(p.R[k]);
    if (!(v > 0)) continue;
    xs.push_back(p.radius[k]);
    ys.push_back(std::log(v));
  }
  if (xs.size() >= 3) {
    const LinFit f = linear_fit(xs, ys);
    p.fit_rate = -f.slope;
    p.fit_amplitude = std::exp(f.intercept);
    p.fit_rms = f.rms;
    p.fit_points = f.points;
  }
  return p;
}

// ---------------------------------------------------------------------------
// Paired finite-difference check of d rho / dE against (1/(pi V)) Im tr G^2.

struct DerivativeCheck {
  double E = 0, eps = 0, delta = 0;
  double lhs = 0, lhs_se = 0; // centered difference of the smoothed DOS
  double rhs = 0, rhs_se = 0; // (1/(pi V)) Im sum_m (E_eps - lambda_m)^{-2}
  double paired_diff = 0, paired_se = 0;
  bool within = false;
  std::int64_t samples = 0;
};

inline DerivativeCheck dos_derivative_check(const EnsembleSpec& spec, double E, double eps,
                                            double delta, std::int64_t samples,
                                            double abs_slack = 1e-3, int workers = 1) {
  if (!(eps > 0) || !(delta > 0)) throw ConfigError("dos_derivative_check: eps, delta must be > 0");
  if (samples < 2) throw ConfigError("dos_derivative_check: need at least 2 samples");
  const std::int64_t V = spec.J->torus.volume;
  std::vector<double> lhs_v(static_cast<std::size_t>(samples)), rhs_v(static_cast<std::size_t>(samples));
  parallel_for_index(samples, workers, [&](std::int64_t s) {
    const BandMatrixSample sample = sample_H(spec, static_cast<std::uint64_t>(s));
    const EigenSystem es = hermitian_eigensystem(sample.H, false);
    const std::vector<double> lambda(es.values.data(), es.values.data() + es.values.size());
    const double lo = dos_resolvent_value(lambda, E - delta, eps, V);
    const double hi = dos_resolvent_value(lambda, E + delta, eps, V);
    lhs_v[static_cast<std::size_t>(s)] = (hi - lo) / (2.0 * delta);
    cdouble t2 = 0;
    for (double l : lambda) {
      const cdouble d = cdouble(E, eps) - l;
      t2 += 1.0 / (d * d);
    }
    rhs_v[static_cast<std::size_t>(s)] = t2.imag() / (M_PI * static_cast<double>(V));
  });
  Accumulator al, ar, ad;
  for (std::int64_t s = 0; s < samples; ++s) {
    al.add(lhs_v[static_cast<std::size_t>(s)]);
    ar.add(rhs_v[static_cast<std::size_t>(s)]);
    ad.add(lhs_v[static_cast<std::size_t>(s)] - rhs_v[static_cast<std::size_t>(s)]);
  }
  DerivativeCheck c;
  c.E = E;
  c.eps = eps;
  c.delta = delta;
  c.samples = samples;
  c.lhs = al.mean;
  c.lhs_se = al.std_error();
  c.rhs = ar.mean;
  c.rhs_se = ar.std_error();
  c.paired_diff = ad.mean;
  c.paired_se = ad.std_error();
  c.within = std::abs(c.lhs - c.rhs) <=
             2.0 * std::sqrt(c.lhs_se * c.lhs_se + c.rhs_se * c.rhs_se) + abs_slack;
  return c;
}

} // namespace bandwig
