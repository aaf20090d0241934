#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bandwig/errors.hpp"

namespace bandwig {

// Gauss-Hermite rule (physicists' weight exp(-x^2)):
//   integral exp(-x^2) f(x) dx ~= sum_i exp(log_weight[i]) f(node[i]).
// Weights are kept in log form: for large n the extreme weights underflow
// double precision long before their contribution becomes negligible.
struct GaussHermite {
  std::vector<double> nodes;      // ascending
  std::vector<double> log_weight; // same order
};

inline constexpr int kMaxHermiteNodes = 600;

namespace quad_detail {

// Evaluate the orthonormal Hermite polynomial p_n and the derivative factor
// pp = sqrt(2n) p_{n-1} at z, with dynamic rescaling so nothing overflows even
// far outside the oscillatory region. Returns the Newton step p_n/pp (scale
// cancels) and log|pp| (scale restored) for the weight formula.
inline void hermite_eval(int n, double z, double& newton_step, double& log_pp) {
  const double pim4 = 0.7511255444649425; // pi^{-1/4}
  double p1 = pim4, p2 = 0.0, log_scale = 0.0;
  for (int j = 1; j <= n; ++j) {
    const double p3 = p2;
    p2 = p1;
    p1 = z * std::sqrt(2.0 / j) * p2 - std::sqrt((j - 1.0) / j) * p3;
    const double mag = std::max(std::abs(p1), std::abs(p2));
    if (mag > 1e150) {
      p1 *= 1e-150;
      p2 *= 1e-150;
      log_scale += 150.0 * std::log(10.0);
    }
  }
  const double pp = std::sqrt(2.0 * n) * p2;
  newton_step = p1 / pp;
  log_pp = std::log(std::abs(pp)) + log_scale;
}

} // namespace quad_detail

inline GaussHermite gauss_hermite(int n) {
  if (n < 1 || n > kMaxHermiteNodes)
    throw ConfigError("gauss_hermite: node count must be in [1, " +
                      std::to_string(kMaxHermiteNodes) + "]");
  GaussHermite g;
  g.nodes.assign(static_cast<std::size_t>(n), 0.0);
  g.log_weight.assign(static_cast<std::size_t>(n), 0.0);
  // Nodes are the eigenvalues of the symmetric tridiagonal Jacobi matrix
  // (zero diagonal, off-diagonal sqrt(j/2)); each is then polished by two
  // Newton steps on the orthonormal recurrence, which also yields the weight.
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd sub(std::max(n - 1, 0));
  for (int j = 0; j + 1 < n; ++j) sub[j] = std::sqrt(0.5 * (j + 1));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success)
    throw NumericError("gauss_hermite: Jacobi eigenvalue solve failed");
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    // i-th largest root; exploit symmetry and write the mirrored node too.
    double z = es.eigenvalues()[n - 1 - i];
    if (n % 2 == 1 && i == m - 1) z = 0.0;
    double step = 0.0, log_pp = 0.0;
    for (int polish = 0; polish < 2; ++polish) {
      quad_detail::hermite_eval(n, z, step, log_pp);
      if (!std::isfinite(step)) throw NumericError("gauss_hermite: polish step diverged");
      z -= step;
    }
    quad_detail::hermite_eval(n, z, step, log_pp);
    const double lw = std::log(2.0) - 2.0 * log_pp;
    g.nodes[static_cast<std::size_t>(n - 1 - i)] = z;
    g.nodes[static_cast<std::size_t>(i)] = -z;
    g.log_weight[static_cast<std::size_t>(n - 1 - i)] = lw;
    g.log_weight[static_cast<std::size_t>(i)] = lw;
  }
  if (n % 2 == 1) g.nodes[static_cast<std::size_t>(n / 2)] = 0.0;
  for (int i = 1; i < n; ++i)
    if (!(g.nodes[static_cast<std::size_t>(i)] > g.nodes[static_cast<std::size_t>(i - 1)]))
      throw NumericError("gauss_hermite: nodes not strictly increasing");
  return g;
}

// Gauss-Legendre rule on [-1, 1].
struct GaussLegendre {
  std::vector<double> nodes;
  std::vector<double> weights;
};

inline GaussLegendre gauss_legendre(int n) {
  if (n < 1 || n > 1024) throw ConfigError("gauss_legendre: node count must be in [1, 1024]");
  GaussLegendre g;
  g.nodes.assign(static_cast<std::size_t>(n), 0.0);
  g.weights.assign(static_cast<std::size_t>(n), 0.0);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    bool converged = false;
    for (int it = 0; it < 200; ++it) {
      double p1 = 1.0, p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1.0);
      }
      pp = n * (z * p1 - p2) / (z * z - 1.0);
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) <= 1e-15) {
        converged = true;
        break;
      }
    }
    if (!converged) throw NumericError("gauss_legendre: Newton iteration failed to converge");
    g.nodes[static_cast<std::size_t>(i)] = -z;
    g.nodes[static_cast<std::size_t>(n - 1 - i)] = z;
    const double w = 2.0 / ((1.0 - z * z) * pp * pp);
    g.weights[static_cast<std::size_t>(i)] = w;
    g.weights[static_cast<std::size_t>(n - 1 - i)] = w;
  }
  return g;
}

namespace detail {

inline const GaussLegendre& gl7() {
  static const GaussLegendre g = gauss_legendre(7);
  return g;
}
inline const GaussLegendre& gl15() {
  static const GaussLegendre g = gauss_legendre(15);
  return g;
}

template <class F, class R>
void adaptive_panel(F& f, double lo, double hi, double tol_panel, int depth, R& total,
                    std::int64_t& evals) {
  if (depth > 60) throw NumericError("adaptive_integrate: recursion depth exceeded");
  evals += 22;
  if (evals > 20000000) throw NumericError("adaptive_integrate: evaluation budget exceeded");
  const double c = 0.5 * (lo + hi);
  const double h = 0.5 * (hi - lo);
  R i7{};
  for (int k = 0; k < 7; ++k)
    i7 += static_cast<R>(gl7().weights[static_cast<std::size_t>(k)] *
                         f(c + h * gl7().nodes[static_cast<std::size_t>(k)]));
  i7 *= h;
  R i15{};
  double l1 = 0.0;
  for (int k = 0; k < 15; ++k) {
    const auto fv = f(c + h * gl15().nodes[static_cast<std::size_t>(k)]);
    i15 += static_cast<R>(gl15().weights[static_cast<std::size_t>(k)] * fv);
    l1 += gl15().weights[static_cast<std::size_t>(k)] * std::abs(fv);
  }
  i15 *= h;
  l1 *= h;
  const double err = std::abs(i15 - i7);
  // Accept when the panel meets its error share, when the estimate has reached
  // the roundoff floor of the panel's L1 mass (no further subdivision can
  // improve it in double precision), or when the panel width has collapsed.
  const double floor = 100.0 * std::numeric_limits<double>::epsilon() * l1;
  if (err <= tol_panel || err <= floor || hi - lo < 1e-14) {
    total += i15;
    return;
  }
  adaptive_panel(f, lo, c, tol_panel / 2.0, depth + 1, total, evals);
  adaptive_panel(f, c, hi, tol_panel / 2.0, depth + 1, total, evals);
}

} // namespace detail

// Adaptive Gauss quadrature with an embedded 7/15-point error estimate and
// panel bisection until each panel's share of the absolute tolerance is met.
template <class R, class F>
R adaptive_integrate(F f, double a, double b, double tol_abs = 1e-12) {
  if (!(b > a)) throw ConfigError("adaptive_integrate: requires b > a");
  if (!(tol_abs > 0)) throw ConfigError("adaptive_integrate: tolerance must be positive");
  R total{};
  std::int64_t evals = 0;
  detail::adaptive_panel(f, a, b, tol_abs, 0, total, evals);
  return total;
}

} // namespace bandwig
