#ifndef COLLAPSELAB_RNG_HPP
#define COLLAPSELAB_RNG_HPP

// Deterministic counter-seeded RNG. Streams are derived from a root seed and
// a stream index with splitmix64, so parallel blocks reproduce bit-for-bit
// regardless of thread count or platform.

#include <cmath>
#include <cstdint>

#include "collapselab/linalg.hpp"

namespace collapselab {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class Rng {
public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) {
    std::uint64_t st = seed ^ (0x6a09e667f3bcc909ULL + stream * 0x9e3779b97f4a7c15ULL);
    for (int i = 0; i < 4; ++i) s_[i] = splitmix64(st);
  }

  std::uint64_t next_u64() {  // xoshiro256**
    std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }  // [0,1)
  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  double normal() {
    // Marsaglia polar; consumes a variable number of uniforms (fine: each
    // stream is private to its block).
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = uniform(-1.0, 1.0);
      v = uniform(-1.0, 1.0);
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    have_spare_ = true;
    return u * f;
  }

  Vec on_sphere(int dim) {
    Vec v(dim);
    double m;
    do {
      for (int i = 0; i < dim; ++i) v[i] = normal();
      m = norm(v);
    } while (m < 1e-12);
    return (1.0 / m) * v;
  }

  Vec in_ball(int dim, double radius) {
    Vec v = on_sphere(dim);
    double u = uniform();
    return radius * std::pow(u, 1.0 / dim) * v;
  }

private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::uint64_t s_[4];
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace collapselab

#endif
