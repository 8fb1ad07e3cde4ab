#pragma once

#include <cmath>
#include <cstdint>

namespace sgnet {

// Splitmix64 stream. One 64-bit word of state, so streams are trivial to
// checkpoint and to derive deterministically from a parent stream.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed = 0) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  // Standard normal via Box-Muller. Always consumes two uniforms and keeps
  // only the cosine branch, so the draw count per call is fixed.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(1.0 - u1));
    return r * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  // Child stream decorrelated from this one. Does not advance this stream.
  RandomStream derive(std::uint64_t salt) const {
    RandomStream mixer(state_ ^ (0x632be59bd9b4e019ULL + salt));
    mixer.next_u64();
    return RandomStream(mixer.next_u64());
  }

  std::uint64_t state() const { return state_; }
  void set_state(std::uint64_t s) { state_ = s; }

 private:
  std::uint64_t state_;
};

}  // namespace sgnet
