#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "bandwig/quadrature.hpp"

using namespace bandwig;

TEST_CASE("Gauss-Hermite rules reproduce Gaussian moments at every scale") {
  for (int n : {1, 2, 3, 16, 64, 128, 256, 512, 600}) {
    const GaussHermite g = gauss_hermite(n);
    REQUIRE(g.nodes.size() == static_cast<std::size_t>(n));
    double s0 = 0, s2 = 0, s4 = 0;
    for (int i = 0; i < n; ++i) {
      const double w = std::exp(g.log_weight[static_cast<std::size_t>(i)]);
      const double t = g.nodes[static_cast<std::size_t>(i)];
      s0 += w;
      s2 += w * t * t;
      s4 += w * t * t * t * t;
    }
    const double sp = std::sqrt(M_PI);
    CHECK(std::abs(s0 - sp) < 1e-13);
    if (n >= 2) CHECK(std::abs(s2 - sp / 2.0) < 1e-13);
    if (n >= 3) CHECK(std::abs(s4 - 3.0 * sp / 4.0) < 1e-12);
    // Nodes ascend strictly and come in symmetric pairs.
    for (int i = 1; i < n; ++i)
      REQUIRE(g.nodes[static_cast<std::size_t>(i)] > g.nodes[static_cast<std::size_t>(i - 1)]);
    for (int i = 0; i < n; ++i) {
      CHECK(g.nodes[static_cast<std::size_t>(i)] ==
            Catch::Approx(-g.nodes[static_cast<std::size_t>(n - 1 - i)]).margin(1e-13));
      CHECK(g.log_weight[static_cast<std::size_t>(i)] ==
            Catch::Approx(g.log_weight[static_cast<std::size_t>(n - 1 - i)]).margin(1e-10));
    }
  }
}

TEST_CASE("small Gauss-Hermite rules match closed forms") {
  const GaussHermite g1 = gauss_hermite(1);
  CHECK(g1.nodes[0] == Catch::Approx(0.0).margin(1e-15));
  CHECK(std::exp(g1.log_weight[0]) == Catch::Approx(std::sqrt(M_PI)));
  const GaussHermite g2 = gauss_hermite(2);
  CHECK(g2.nodes[1] == Catch::Approx(1.0 / std::sqrt(2.0)));
  CHECK(std::exp(g2.log_weight[0]) == Catch::Approx(std::sqrt(M_PI) / 2.0));
}

TEST_CASE("log weights track tiny tail weights without underflow") {
  const GaussHermite g = gauss_hermite(512);
  // The extreme weight is ~exp(-t_max^2) with t_max ~ 31.4; its log must be
  // finite and deeply negative even though exp() of it underflows.
  CHECK(std::isfinite(g.log_weight.front()));
  CHECK(g.log_weight.front() < -700.0);
  CHECK(g.nodes.back() == Catch::Approx(31.4).epsilon(0.01));
}

TEST_CASE("Gauss-Legendre integrates low-order polynomials exactly") {
  const GaussLegendre g = gauss_legendre(16);
  double s0 = 0, s2 = 0, s6 = 0;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    s0 += g.weights[i];
    s2 += g.weights[i] * std::pow(g.nodes[i], 2);
    s6 += g.weights[i] * std::pow(g.nodes[i], 6);
  }
  CHECK(s0 == Catch::Approx(2.0));
  CHECK(s2 == Catch::Approx(2.0 / 3.0));
  CHECK(s6 == Catch::Approx(2.0 / 7.0));
}

TEST_CASE("adaptive integration reaches requested tolerances") {
  const double a = adaptive_integrate<double>([](double x) { return x * x; }, 0.0, 1.0, 1e-14);
  CHECK(std::abs(a - 1.0 / 3.0) < 1e-13);
  const double b =
      adaptive_integrate<double>([](double x) { return std::exp(-x * x); }, -10.0, 10.0, 1e-13);
  CHECK(std::abs(b - std::sqrt(M_PI)) < 1e-11);
  // A needle the fixed rule would miss.
  const double c = adaptive_integrate<double>(
      [](double x) { return std::exp(-1e4 * (x - 0.3) * (x - 0.3)); }, 0.0, 1.0, 1e-12);
  CHECK(std::abs(c - std::sqrt(M_PI) / 100.0) < 1e-10);
}

TEST_CASE("complex adaptive integration reproduces the Gaussian resolvent") {
  // integral of the standard normal density against 1/(E + i eps - h),
  // truncated at +-15 sigma: the average resolvent of a 1x1 ensemble.
  const std::complex<double> Ee(1.0, 0.05);
  const std::complex<double> val = adaptive_integrate<std::complex<double>>(
      [&](double h) {
        return std::exp(-0.5 * h * h) / std::sqrt(2.0 * M_PI) / (Ee - h);
      },
      -15.0, 15.0, 1e-13);
  const std::complex<double> golden(0.687988765066858, -0.746421354394914);
  CHECK(std::abs(val - golden) < 1e-10);
}

TEST_CASE("quadrature builders validate node counts") {
  REQUIRE_THROWS_AS(gauss_hermite(0), ConfigError);
  REQUIRE_THROWS_AS(gauss_hermite(601), ConfigError);
  REQUIRE_THROWS_AS(gauss_legendre(0), ConfigError);
}
