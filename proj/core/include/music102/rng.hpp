#pragma once
#include <cstdint>
#include <random>
#include <vector>

namespace music102 {

// Seeded RNG wrapper. std::mt19937_64 gives identical streams on every
// platform; the draw helpers below avoid std::uniform_real_distribution and
// friends because libstdc++/libc++ are free to implement those differently.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t raw() { return gen_(); }

  // Uniform in [0, 1) with 53 random mantissa bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n) via rejection sampling (no modulo bias).
  uint64_t below(uint64_t n) {
    if (n == 0) return 0;
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return x % n;
  }

  int range(int lo, int hi_exclusive) {
    return lo + static_cast<int>(below(static_cast<uint64_t>(hi_exclusive - lo)));
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace music102
