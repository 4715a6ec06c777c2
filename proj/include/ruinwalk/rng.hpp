#ifndef RUINWALK_RNG_HPP
#define RUINWALK_RNG_HPP

#include <cstdint>
#include <cmath>

namespace ruinwalk {

// Philox 4x32-10 counter-based generator (Salmon et al., SC 2011).
// A generator is addressed by (key, stream): the key carries the master
// seed, the stream selects an independent substream (one per simulated
// path), and the block counter advances as numbers are drawn.  Output is
// a pure function of (key, stream, counter), so any assignment of paths
// to threads produces identical results.
class Philox {
 public:
  Philox(std::uint64_t seed, std::uint64_t stream)
      : key0_(static_cast<std::uint32_t>(seed)),
        key1_(static_cast<std::uint32_t>(seed >> 32)),
        stream_lo_(static_cast<std::uint32_t>(stream)),
        stream_hi_(static_cast<std::uint32_t>(stream >> 32)) {}

  using result_type = std::uint32_t;
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return 0xffffffffu; }

  result_type operator()() { return next_u32(); }

  std::uint32_t next_u32() {
    if (pos_ == 4) {
      fill_block();
      pos_ = 0;
    }
    return out_[pos_++];
  }

  std::uint64_t next_u64() {
    std::uint64_t lo = next_u32();
    std::uint64_t hi = next_u32();
    return lo | (hi << 32);
  }

  // Uniform on the open interval (0,1); never returns 0 or 1, so it is
  // safe to feed through inverse CDFs with poles at the endpoints.
  double next_double() {
    std::uint64_t bits = next_u64() >> 11;  // 53 random bits
    return (static_cast<double>(bits) + 0.5) * 0x1p-53;
  }

  // Integer uniform on {0,...,n-1} by rejection (unbiased).
  std::uint64_t next_below(std::uint64_t n) {
    if (n <= 1) return 0;
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % n;
  }

 private:
  static void round(std::uint32_t c[4], std::uint32_t k0, std::uint32_t k1) {
    constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
    std::uint64_t p0 = static_cast<std::uint64_t>(M0) * c[0];
    std::uint64_t p1 = static_cast<std::uint64_t>(M1) * c[2];
    std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
    std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
    std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
    std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
    std::uint32_t t1 = c[1], t3 = c[3];
    c[0] = hi1 ^ t1 ^ k0;
    c[1] = lo1;
    c[2] = hi0 ^ t3 ^ k1;
    c[3] = lo0;
  }

  void fill_block() {
    constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
    std::uint32_t c[4] = {static_cast<std::uint32_t>(ctr_),
                          static_cast<std::uint32_t>(ctr_ >> 32), stream_lo_,
                          stream_hi_};
    std::uint32_t k0 = key0_, k1 = key1_;
    for (int r = 0; r < 10; ++r) {
      if (r > 0) {
        k0 += W0;
        k1 += W1;
      }
      round(c, k0, k1);
    }
    out_[0] = c[0];
    out_[1] = c[1];
    out_[2] = c[2];
    out_[3] = c[3];
    ++ctr_;
  }

  std::uint32_t key0_, key1_;
  std::uint32_t stream_lo_, stream_hi_;
  std::uint64_t ctr_ = 0;
  std::uint32_t out_[4] = {0, 0, 0, 0};
  int pos_ = 4;
};

// splitmix64 step, used to derive domain-separated seeds so that e.g. the
// estimator and the conditional sampler of one experiment never share
// substreams.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (tag + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace ruinwalk

#endif  // RUINWALK_RNG_HPP
