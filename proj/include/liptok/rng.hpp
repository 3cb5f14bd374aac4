#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace liptok {

// Deterministic random source. Every run derives all of its randomness from a
// single root seed; child() splits off independent, label-addressed streams so
// paired experiments (same seed, different tokenizer) see identical data.
class Rng {
  public:
    explicit Rng(std::uint64_t seed);

    // Independent stream derived from this rng's seed and a label.
    Rng child(std::string_view label) const;
    Rng child(std::string_view label, std::uint64_t index) const;

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64();
    double uniform();  // [0, 1)
    double uniform(double lo, double hi);
    double normal(double mean = 0.0, double stddev = 1.0);
    // Uniform integer in [0, n). n must be > 0.
    std::size_t uniform_index(std::size_t n);

  private:
    std::uint64_t seed_;
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace liptok
