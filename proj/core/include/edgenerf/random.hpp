#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace edgenerf {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Seed for the stream used at a given training iteration.
inline std::uint64_t iteration_seed(std::uint64_t seed, std::uint64_t iteration) {
  return splitmix64(seed ^ splitmix64(iteration + 0x632be59bd9b4e019ull));
}

// mt19937_64 that counts raw draws. Every helper consumes exactly one draw so
// the count depends only on the sequence of requests, never on the values.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  static constexpr result_type min() { return std::numeric_limits<result_type>::min(); }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    ++draws_;
    return engine_();
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  // Uniform in [0, n).
  int uniform_index(int n) {
    const int i = static_cast<int>(uniform() * n);
    return i < n ? i : n - 1;
  }

  std::uint64_t draws() const { return draws_; }

 private:
  std::mt19937_64 engine_;
  std::uint64_t draws_ = 0;
};

}  // namespace edgenerf
