#pragma once

#include <cstdint>
#include <random>

namespace pixelnet {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Seeded generator with derivable sub-streams. Batch construction, dropout,
// and initialization each draw from their own child stream so that
// overlapping work cannot perturb determinism.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

    // Independent stream derived from (seed, tag); stable across runs.
    Rng child(std::uint64_t tag) const {
        return Rng(splitmix64(seed_ ^ splitmix64(tag + 0x51ed270b8d5c156bULL)));
    }
    Rng child2(std::uint64_t a, std::uint64_t b) const { return child(a).child(b); }

    std::uint64_t next_u64() { return engine_(); }

    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

    double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }

    // Uniform integer in [0, n).
    int uniform_int(int n) { return std::uniform_int_distribution<int>(0, n - 1)(engine_); }

    std::mt19937_64& engine() { return engine_; }
    std::uint64_t seed() const { return seed_; }

  private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

}  // namespace pixelnet
