#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace bandwig {

// Philox4x64-10 counter-based generator (Salmon et al., SC'11 constants).
// Deterministic, splittable, order-independent: the value at any counter/key
// is independent of evaluation order.
struct Philox4x64 {
  static constexpr std::uint64_t kM0 = 0xD2E7470EE14C6C93ULL;
  static constexpr std::uint64_t kM1 = 0xCA5A826395121157ULL;
  static constexpr std::uint64_t kW0 = 0x9E3779B97F4A7C15ULL;
  static constexpr std::uint64_t kW1 = 0xBB67AE8584CAA73BULL;

  static void mulhilo(std::uint64_t a, std::uint64_t b, std::uint64_t& hi, std::uint64_t& lo) {
    const unsigned __int128 p = static_cast<unsigned __int128>(a) * b;
    hi = static_cast<std::uint64_t>(p >> 64);
    lo = static_cast<std::uint64_t>(p);
  }

  static std::array<std::uint64_t, 4> block(std::array<std::uint64_t, 4> ctr,
                                            std::array<std::uint64_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
      std::uint64_t hi0, lo0, hi1, lo1;
      mulhilo(kM0, ctr[0], hi0, lo0);
      mulhilo(kM1, ctr[2], hi1, lo1);
      const std::array<std::uint64_t, 4> next{hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
      ctr = next;
      key[0] += kW0;
      key[1] += kW1;
    }
    return ctr;
  }
};

// Stream of standard normals with O(1) random access, built on Philox blocks:
// normal(idx) reads the Philox block at counter {idx>>2, 0, 0, domain} and key
// {seed, stream}, converts word pairs by Box-Muller. Four normals per block.
class GaussianStream {
 public:
  GaussianStream(std::uint64_t seed, std::uint64_t stream, std::uint64_t domain)
      : seed_(seed), stream_(stream), domain_(domain) {}

  double normal(std::uint64_t idx) const {
    const std::uint64_t blk = idx >> 2;
    if (!cache_valid_ || cache_block_ != blk) {
      fill_cache(blk);
    }
    return cache_[idx & 3];
  }

  // Uniform in (0,1]: 53-bit mantissa from the top bits of a Philox word.
  static double uniform_from_word(std::uint64_t w) {
    return static_cast<double>(w >> 11) * 0x1.0p-53;
  }

 private:
  void fill_cache(std::uint64_t blk) const {
    const std::array<std::uint64_t, 4> words =
        Philox4x64::block({blk, 0, 0, domain_}, {seed_, stream_});
    for (int p = 0; p < 2; ++p) {
      // u1 in (0,1] guards the logarithm; u2 in [0,1).
      const double u1 = 1.0 - uniform_from_word(words[2 * p]);
      const double u2 = uniform_from_word(words[2 * p + 1]);
      const double r = std::sqrt(-2.0 * std::log(u1));
      cache_[2 * p] = r * std::cos(2.0 * M_PI * u2);
      cache_[2 * p + 1] = r * std::sin(2.0 * M_PI * u2);
    }
    cache_block_ = blk;
    cache_valid_ = true;
  }

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t domain_;
  mutable std::array<double, 4> cache_{};
  mutable std::uint64_t cache_block_ = 0;
  mutable bool cache_valid_ = false;
};

} // namespace bandwig
