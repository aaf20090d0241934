#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "bandwig/rng.hpp"

using namespace bandwig;

TEST_CASE("Philox4x64-10 known-answer vectors") {
  using A4 = std::array<std::uint64_t, 4>;
  using A2 = std::array<std::uint64_t, 2>;
  // Zero counter, zero key.
  REQUIRE(Philox4x64::block(A4{0, 0, 0, 0}, A2{0, 0}) ==
          A4{0x16554d9eca36314cULL, 0xdb20fe9d672d0fdcULL, 0xd7e772cee186176bULL,
             0x7e68b68aec7ba23bULL});
  // All-ones counter and key.
  REQUIRE(Philox4x64::block(A4{~0ULL, ~0ULL, ~0ULL, ~0ULL}, A2{~0ULL, ~0ULL}) ==
          A4{0x87b092c3013fe90bULL, 0x438c3c67be8d0224ULL, 0x9cc7d7c69cd777b6ULL,
             0xa09caebf594f0ba0ULL});
  // Pi and e digit patterns.
  REQUIRE(Philox4x64::block(A4{0x243f6a8885a308d3ULL, 0x13198a2e03707344ULL,
                               0xa4093822299f31d0ULL, 0x082efa98ec4e6c89ULL},
                            A2{0x452821e638d01377ULL, 0xbe5466cf34e90c6cULL}) ==
          A4{0xa528f45403e61d95ULL, 0x38c72dbd566e9788ULL, 0xa5a1610e72fd18b5ULL,
             0x57bd43b5e52b7fe6ULL});
  // Unit counter, zero key.
  REQUIRE(Philox4x64::block(A4{1, 0, 0, 0}, A2{0, 0}) ==
          A4{0x02f4ba6408e4d89bULL, 0x3dd62b0b9ca8c5b2ULL, 0x1c8667a55d902e79ULL,
             0x907d7a052fd5b4dcULL});
}

TEST_CASE("counter-mode normals are deterministic and stream-separated") {
  const GaussianStream a(42, 7, 0);
  const GaussianStream b(42, 7, 0);
  const GaussianStream c(42, 8, 0);
  const GaussianStream d(43, 7, 0);
  const GaussianStream e(42, 7, 1);
  for (std::uint64_t i : {0ULL, 1ULL, 5ULL, 123456789ULL}) {
    REQUIRE(a.normal(i) == b.normal(i));
    REQUIRE(a.normal(i) != c.normal(i));
    REQUIRE(a.normal(i) != d.normal(i));
    REQUIRE(a.normal(i) != e.normal(i));
  }
  // Random access equals sequential access.
  std::vector<double> seq;
  for (std::uint64_t i = 0; i < 16; ++i) seq.push_back(a.normal(i));
  for (std::uint64_t i = 16; i-- > 0;)
    REQUIRE(a.normal(i) == seq[static_cast<std::size_t>(i)]);
}

TEST_CASE("normals have the right moments") {
  const GaussianStream g(2024, 0, 0);
  const std::int64_t n = 200000;
  double s1 = 0, s2 = 0, s3 = 0, s4 = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double x = g.normal(static_cast<std::uint64_t>(i));
    s1 += x;
    s2 += x * x;
    s3 += x * x * x;
    s4 += x * x * x * x;
  }
  const double nd = static_cast<double>(n);
  // Mean se = 1/sqrt(n); var se ~ sqrt(2/n); allow 5 sigma.
  CHECK(std::abs(s1 / nd) < 5.0 / std::sqrt(nd));
  CHECK(std::abs(s2 / nd - 1.0) < 5.0 * std::sqrt(2.0 / nd));
  CHECK(std::abs(s3 / nd) < 5.0 * std::sqrt(15.0 / nd));
  CHECK(std::abs(s4 / nd - 3.0) < 5.0 * std::sqrt(96.0 / nd));
}

TEST_CASE("normals have no pathological repeats or out-of-range values") {
  const GaussianStream g(7, 1, 0);
  std::set<double> seen;
  for (std::uint64_t i = 0; i < 4096; ++i) {
    const double x = g.normal(i);
    REQUIRE(std::isfinite(x));
    REQUIRE(std::abs(x) < 9.0); // |z| beyond 9 has probability ~1e-19
    seen.insert(x);
  }
  CHECK(seen.size() == 4096);
}

TEST_CASE("one-sample Kolmogorov distance against the normal CDF is small") {
  const GaussianStream g(99, 3, 0);
  const std::int64_t n = 20000;
  std::vector<double> xs(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) xs[static_cast<std::size_t>(i)] =
      g.normal(static_cast<std::uint64_t>(i));
  std::sort(xs.begin(), xs.end());
  double dmax = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double cdf = 0.5 * std::erfc(-xs[static_cast<std::size_t>(i)] / std::sqrt(2.0));
    const double lo = static_cast<double>(i) / n, hi = static_cast<double>(i + 1) / n;
    dmax = std::max(dmax, std::max(std::abs(cdf - lo), std::abs(cdf - hi)));
  }
  // 1.95/sqrt(n) corresponds to p ~ 0.001 for the one-sample KS statistic.
  CHECK(dmax < 1.95 / std::sqrt(static_cast<double>(n)));
}
