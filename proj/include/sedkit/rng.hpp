#pragma once
// Seeded random number generation. All randomness in the toolkit flows
// through this wrapper so that runs are reproducible bit for bit; the
// raw mt19937_64 stream is mapped to doubles/indices here rather than
// through std distributions, whose output is implementation-defined.

#include <cstdint>
#include <random>
#include <vector>

namespace sedkit {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // Uniform double in [0, 1).
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform index in [0, n). Modulo bias is negligible for desk-scale n.
  std::size_t uniform_index(std::size_t n) { return static_cast<std::size_t>(gen_() % n); }

  bool bernoulli(double p) { return uniform() < p; }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = uniform_index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  std::uint64_t raw() { return gen_(); }

 private:
  std::mt19937_64 gen_;
};

}  // namespace sedkit
