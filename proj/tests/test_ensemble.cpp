#include <catch2/catch_amalgamated.hpp>

#include <memory>
#include <set>

#include "bandwig/ensemble.hpp"

using namespace bandwig;

namespace {

std::shared_ptr<const KernelMatrix> make_J(int d, std::vector<int> sides, int W) {
  const LatticeTorus t = build_torus(d, std::move(sides));
  return std::make_shared<const KernelMatrix>(build_J(t, W));
}

} // namespace

TEST_CASE("off-diagonal slot layout is a bijection over the upper triangle") {
  const int n = 7;
  std::set<std::int64_t> slots;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const std::int64_t s = detail::offdiag_slot(i, j, n);
      REQUIRE(s >= 0);
      REQUIRE(s < n * (n - 1) / 2);
      slots.insert(s);
    }
  CHECK(slots.size() == static_cast<std::size_t>(n * (n - 1) / 2));
}

TEST_CASE("samples are Hermitian and deterministic in (seed, stream)") {
  const auto J = make_J(2, {4, 3}, 1);
  const EnsembleSpec spec = make_ensemble(J, 10, 123);
  const BandMatrixSample s0 = sample_H(spec, 0);
  const BandMatrixSample s0b = sample_H(spec, 0);
  const BandMatrixSample s1 = sample_H(spec, 1);
  REQUIRE(s0.H.rows() == 12);
  CHECK((s0.H - s0.H.adjoint()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((s0.H - s0b.H).cwiseAbs().maxCoeff() == 0.0);
  CHECK((s0.H - s1.H).cwiseAbs().maxCoeff() > 0.0);
  const EnsembleSpec spec2 = make_ensemble(J, 10, 124);
  CHECK((sample_H(spec2, 0).H - s0.H).cwiseAbs().maxCoeff() > 0.0);
  // Diagonal entries are real.
  for (int i = 0; i < 12; ++i) CHECK(s0.H(i, i).imag() == 0.0);
}

TEST_CASE("empirical covariance matches <H_ij H_kl> = delta_jk delta_il J_ij") {
  const auto J = make_J(1, {6}, 1);
  const EnsembleSpec spec = make_ensemble(J, 4000, 2025);
  // (i, j, k, l): nonzero only when k = j and l = i.
  const std::vector<std::array<std::int64_t, 4>> quads = {
      {0, 1, 1, 0}, // <H_01 H_10> = J_01
      {0, 3, 3, 0}, // <H_03 H_30> = J_03
      {0, 0, 0, 0}, // diagonal variance J_00
      {0, 1, 0, 1}, // <H_01 H_01> = 0
      {0, 1, 2, 3}, // unrelated entries: independent, mean 0
  };
  const std::vector<CovEstimate> cov = empirical_covariance(spec, quads, 4000);
  for (std::size_t q = 0; q < quads.size(); ++q) {
    const auto& ix = quads[q];
    const bool match = ix[1] == ix[2] && ix[0] == ix[3];
    const double target = match ? J->entry(ix[0], ix[1]).real() : 0.0;
    INFO("quad " << q << ": mean " << cov[q].mean << " target " << target);
    CHECK(std::abs(cov[q].mean.real() - target) < 5.0 * std::max(cov[q].se_re, 1e-12));
    CHECK(std::abs(cov[q].mean.imag()) < 5.0 * std::max(cov[q].se_im, 1e-12));
  }
}

TEST_CASE("variance profile follows J for off-diagonal pairs at larger separation") {
  const auto J = make_J(1, {8}, 2);
  const EnsembleSpec spec = make_ensemble(J, 3000, 77);
  Accumulator acc_near, acc_far;
  for (std::int64_t s = 0; s < spec.sample_count; ++s) {
    const BandMatrixSample smp = sample_H(spec, s);
    acc_near.add(std::norm(smp.H(0, 1)));
    acc_far.add(std::norm(smp.H(0, 4)));
  }
  CHECK(std::abs(acc_near.mean - J->entry(0, 1).real()) < 5.0 * acc_near.std_error());
  CHECK(std::abs(acc_far.mean - J->entry(0, 4).real()) < 5.0 * acc_far.std_error());
  // J decays with distance, and so must the empirical variances.
  CHECK(acc_near.mean > acc_far.mean);
}

TEST_CASE("log density integrates to the Gaussian entropy within one percent") {
  const auto J = make_J(1, {4}, 1);
  const EnsembleSpec spec = make_ensemble(J, 50000, 11);
  Accumulator nll;
  for (std::int64_t s = 0; s < spec.sample_count; ++s)
    nll.add(-log_density(sample_H(spec, s), *J));
  const double H = ensemble_entropy(*J);
  INFO("mean NLL " << nll.mean << " entropy " << H << " se " << nll.std_error());
  // E[-log p] is the differential entropy; 5 se at this sample count sits
  // below one percent of H, so the headline claim keeps its teeth.
  CHECK(nll.std_error() < 0.002 * std::abs(H));
  CHECK(std::abs(nll.mean - H) < 5.0 * nll.std_error());
}

TEST_CASE("ensemble construction and density validate their inputs") {
  const auto J = make_J(1, {4}, 1);
  REQUIRE_THROWS_AS(make_ensemble(nullptr, 10, 1), ConfigError);
  REQUIRE_THROWS_AS(make_ensemble(J, 0, 1), ConfigError);
  const EnsembleSpec spec = make_ensemble(J, 200, 1);
  REQUIRE_THROWS_AS(empirical_covariance(spec, {{0, 1, 1, 0}}, 50), ConfigError);
  REQUIRE_THROWS_AS(empirical_covariance(spec, {}, 200), ConfigError);
  REQUIRE_THROWS_AS(empirical_covariance(spec, {{0, 9, 9, 0}}, 200), ConfigError);
  BandMatrixSample s = sample_H(spec, 0);
  s.H(0, 1) += cdouble(0.0, 1.0); // break Hermiticity
  REQUIRE_THROWS_AS(log_density(s, *J), ConfigError);
}
