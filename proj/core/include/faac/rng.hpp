#pragma once

#include <cstdint>
#include <string_view>

namespace faac {

// splitmix64; used for seed derivation and parameter hashing.
uint64_t splitmix64(uint64_t& state);

// Derives an independent stream seed from (root, tag, indices...).
// Stable across platforms; the basis of all reproducibility claims.
uint64_t derive_seed(uint64_t root, std::string_view tag, uint64_t a = 0, uint64_t b = 0);

// Deterministic generator: xoshiro-free, just splitmix64 underneath, with a
// hand-rolled Box-Muller so gaussian streams do not depend on the standard
// library's distribution implementation.
class Rng {
  public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() { return splitmix64(state_); }

    // uniform in [0, 1)
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n)
    uint64_t uniform_index(uint64_t n);

    double gaussian();

  private:
    uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace faac
