#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace gmc {

// splitmix64, used to expand (master seed, replicate index) into seed material.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// One RNG stream per replicate, derived from (master, replicate) by a
// counter split. Within a replicate the stream is consumed in schedule
// order, which makes runs reproducible independently of the thread count.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::uint64_t replicate) {
    std::uint64_t s = master_seed;
    (void)splitmix64(s);
    s ^= 0x6a09e667f3bcc909ULL + replicate * 0x3c6ef372fe94f82bULL;
    std::seed_seq seq{static_cast<std::uint32_t>(splitmix64(s)),
                      static_cast<std::uint32_t>(splitmix64(s) >> 32),
                      static_cast<std::uint32_t>(splitmix64(s)),
                      static_cast<std::uint32_t>(splitmix64(s) >> 32)};
    gen_.seed(seq);
  }

  // Uniform on [0,1) with 53 random bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // Standard normal via the Marsaglia polar method (pair cached).
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    have_spare_ = true;
    return u * f;
  }

  std::uint64_t raw() { return gen_(); }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace gmc
