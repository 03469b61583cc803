#pragma once

#include <cmath>
#include <cstdint>

namespace cloven {

// Counter-based deterministic generator (splitmix64). The stream depends only
// on the seed value, never on platform or library internals, so identical
// seeds reproduce identical draws everywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; the second draw of each pair is cached.
  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    cached_ = r * std::sin(theta);
    has_cached_ = true;
    return r * std::cos(theta);
  }

  // Uniform integer in [0, n), n > 0.
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // Independent stream derived from this generator's seed and a stream id.
  static Rng fork(std::uint64_t seed, std::uint64_t stream) {
    Rng mix(seed ^ (0x632BE59BD9B4E019ULL * (stream + 1)));
    return Rng(mix.next_u64());
  }

  // State access for exact save/resume.
  struct State {
    std::uint64_t counter;
    bool has_cached;
    double cached;
  };
  State state() const { return {state_, has_cached_, cached_}; }
  void restore(const State& s) {
    state_ = s.counter;
    has_cached_ = s.has_cached;
    cached_ = s.cached;
  }

 private:
  std::uint64_t state_;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace cloven
