#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <vector>

#include "bandwig/kernel.hpp"
#include "bandwig/rng.hpp"
#include "bandwig/stats.hpp"

namespace bandwig {

// Gaussian Hermitian band ensemble with covariance profile J:
//   <H_ij H_kl> = delta_jk delta_il J_ij,
// i.e. H_ii ~ N(0, J_ii) real, and for i<j H_ij complex with independent
// real/imaginary parts of variance J_ij/2, H_ji = conj(H_ij).
struct EnsembleSpec {
  std::shared_ptr<const KernelMatrix> J;
  std::int64_t sample_count = 0;
  std::uint64_t base_seed = 0;
};

inline EnsembleSpec make_ensemble(std::shared_ptr<const KernelMatrix> J,
                                  std::int64_t sample_count, std::uint64_t base_seed) {
  if (!J) throw ConfigError("make_ensemble: null variance kernel");
  if (sample_count < 1) throw ConfigError("make_ensemble: sample_count must be >= 1");
  if (!J->is_real()) throw ConfigError("make_ensemble: variance kernel must be real");
  for (const cdouble& v : J->profile)
    if (!(v.real() > 0)) throw ConfigError("make_ensemble: variance kernel must be positive");
  EnsembleSpec s;
  s.J = std::move(J);
  s.sample_count = sample_count;
  s.base_seed = base_seed;
  return s;
}

struct BandMatrixSample {
  Eigen::MatrixXcd H;
  std::uint64_t base_seed = 0;
  std::uint64_t stream_id = 0;
};

namespace detail {
// Counter-stream domains: keep diagonal and off-diagonal draws disjoint.
inline constexpr std::uint64_t kDomainOffDiagonal = 0;
inline constexpr std::uint64_t kDomainDiagonal = 1;

// Packed index of the (i, j) off-diagonal slot, i < j, row-major upper triangle.
inline std::uint64_t offdiag_slot(std::int64_t i, std::int64_t j, std::int64_t n) {
  return static_cast<std::uint64_t>(i * n - i * (i + 1) / 2 + (j - i - 1));
}
} // namespace detail

// Draw sample `stream_id` of the ensemble. Bit-reproducible: every matrix
// entry is a fixed function of (base_seed, stream_id, entry index), so the
// result is independent of evaluation order and thread schedule.
inline BandMatrixSample sample_H(const EnsembleSpec& spec, std::uint64_t stream_id) {
  const KernelMatrix& J = *spec.J;
  const std::int64_t n = J.torus.volume;
  BandMatrixSample s;
  s.base_seed = spec.base_seed;
  s.stream_id = stream_id;
  s.H.resize(n, n);
  GaussianStream diag(spec.base_seed, stream_id, detail::kDomainDiagonal);
  GaussianStream off(spec.base_seed, stream_id, detail::kDomainOffDiagonal);
  for (std::int64_t i = 0; i < n; ++i) {
    s.H(i, i) = diag.normal(static_cast<std::uint64_t>(i)) * std::sqrt(J.entry(i, i).real());
    for (std::int64_t j = i + 1; j < n; ++j) {
      const std::uint64_t slot = detail::offdiag_slot(i, j, n);
      const double sd = std::sqrt(J.entry(i, j).real() / 2.0);
      const cdouble z(off.normal(2 * slot) * sd, off.normal(2 * slot + 1) * sd);
      s.H(i, j) = z;
      s.H(j, i) = std::conj(z);
    }
  }
  return s;
}

struct CovEstimate {
  std::array<std::int64_t, 4> indices{}; // (i, j, k, l) for <H_ij H_kl>
  cdouble mean{0, 0};
  double se_re = 0, se_im = 0;
};

// Monte Carlo estimates of <H_ij H_kl> over the first `samples` streams.
inline std::vector<CovEstimate> empirical_covariance(
    const EnsembleSpec& spec, const std::vector<std::array<std::int64_t, 4>>& quads,
    std::int64_t samples) {
  if (samples < 100) throw ConfigError("empirical_covariance: need at least 100 samples");
  if (quads.empty()) throw ConfigError("empirical_covariance: empty index list");
  const std::int64_t n = spec.J->torus.volume;
  for (const auto& q : quads)
    for (std::int64_t idx : q)
      if (idx < 0 || idx >= n) throw ConfigError("empirical_covariance: index out of range");
  std::vector<ComplexAccumulator> acc(quads.size());
  for (std::int64_t s = 0; s < samples; ++s) {
    const BandMatrixSample sample = sample_H(spec, static_cast<std::uint64_t>(s));
    for (std::size_t q = 0; q < quads.size(); ++q) {
      const auto& ix = quads[q];
      acc[q].add(sample.H(ix[0], ix[1]) * sample.H(ix[2], ix[3]));
    }
  }
  std::vector<CovEstimate> out(quads.size());
  for (std::size_t q = 0; q < quads.size(); ++q) {
    out[q].indices = quads[q];
    out[q].mean = acc[q].mean();
    out[q].se_re = acc[q].se_re();
    out[q].se_im = acc[q].se_im();
  }
  return out;
}

// Log density of a Hermitian matrix under the ensemble:
//   ln p(H) = sum_i ln N(H_ii; 0, J_ii)
//           + sum_{i<j} [ln N(Re H_ij; 0, J_ij/2) + ln N(Im H_ij; 0, J_ij/2)].
inline double log_density(const BandMatrixSample& sample, const KernelMatrix& J) {
  const std::int64_t n = J.torus.volume;
  if (sample.H.rows() != n || sample.H.cols() != n)
    throw ConfigError("log_density: dimension mismatch");
  double herm = 0;
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = i; j < n; ++j)
      herm = std::max(herm, std::abs(sample.H(i, j) - std::conj(sample.H(j, i))));
  if (herm > 1e-12) throw ConfigError("log_density: input matrix is not Hermitian");
  double lp = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double vii = J.entry(i, i).real();
    const double x = sample.H(i, i).real();
    lp += -x * x / (2.0 * vii) - 0.5 * std::log(2.0 * M_PI * vii);
    for (std::int64_t j = i + 1; j < n; ++j) {
      const double vij = J.entry(i, j).real();
      lp += -std::norm(sample.H(i, j)) / vij - std::log(M_PI * vij);
    }
  }
  return lp;
}

// Differential entropy of the ensemble (oracle for log_density):
//   h = sum_i (1/2) ln(2 pi e J_ii) + sum_{i<j} ln(pi e J_ij).
inline double ensemble_entropy(const KernelMatrix& J) {
  const std::int64_t n = J.torus.volume;
  double h = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    h += 0.5 * std::log(2.0 * M_PI * M_E * J.entry(i, i).real());
    for (std::int64_t j = i + 1; j < n; ++j) h += std::log(M_PI * M_E * J.entry(i, j).real());
  }
  return h;
}

} // namespace bandwig
