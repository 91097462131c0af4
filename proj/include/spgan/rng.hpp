#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace spgan {

// Deterministic 64-bit PRNG: xoshiro256++ seeded through splitmix64.
// The integer/uniform stream is a pure function of the seed on every
// platform; normal variates use Box-Muller (sqrt/log/cos from libm).
class SeededRng {
 public:
  explicit SeededRng(uint64_t seed);

  uint64_t next_u64();

  // Uniform in [0,1) with 53-bit resolution.
  double uniform01();
  double uniform(double lo, double hi);

  // Unbiased integer in [0, n); n must be > 0.
  uint64_t below(uint64_t n);
  bool bernoulli(double p);

  // Standard normal, Box-Muller with one cached spare.
  double normal();
  std::vector<double> normal_vec(size_t n);

  // Independent child seed for (seed, index) pairs, e.g. per dataset item.
  static uint64_t derive(uint64_t seed, uint64_t index);

  struct State {
    uint64_t s[4];
    bool has_spare;
    double spare;
  };
  State state() const;
  void set_state(const State& st);

 private:
  uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace spgan
