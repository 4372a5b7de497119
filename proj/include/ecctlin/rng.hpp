// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>

namespace ecctlin {

// Deterministic random source. All distributions are generated explicitly
// (53-bit uniforms, Box-Muller normals, rejection-sampled integers) so a
// given seed produces the same stream on every standard-library
// implementation. State is serializable for checkpoint/resume.
class Rng {
  public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform();
    double uniform(double lo, double hi);

    // Uniform in {0, 1, ..., bound-1}; bound must be nonzero.
    std::uint64_t uniform_int(std::uint64_t bound);

    int bit();

    // Standard normal via Box-Muller; the paired draw is cached.
    double normal();

    // Independent stream derived from this generator's seed and an index.
    Rng fork(std::uint64_t stream_index) const;

    std::uint64_t seed() const { return seed_; }

    void save_state(std::ostream& os) const;
    void load_state(std::istream& is);

  private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// SplitMix64 step; used for seed derivation and hashing small values.
std::uint64_t splitmix64(std::uint64_t x);

}  // namespace ecctlin
