#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace idea::diff {

/// Seedable deterministic RNG. All stochastic choices in the project derive
/// from a single integer seed through this class. Distributions are
/// hand-rolled on top of the raw 64-bit stream so that results are identical
/// across standard libraries and platforms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : base_(seed), gen_(splitmix(seed)) {}

    std::uint64_t next_u64() { return gen_(); }

    /// Uniform double in [0, 1) with 53 significant bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Box-Muller without state caching: two raw draws per value.
    double normal(double mu = 0.0, double sigma = 1.0) {
        double u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log1p(-u1));  // -log(1-u1), u1 in [0,1)
        return mu + sigma * r * std::cos(6.283185307179586476925286766559 * u2);
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Uniform index in [0, n). n must be positive.
    std::size_t uniform_index(std::size_t n) { return static_cast<std::size_t>(next_u64() % n); }

    /// Independent child stream. Forking depends only on the seed this Rng
    /// was constructed with, never on how many draws were consumed, so
    /// per-sample streams are insensitive to batch processing order.
    Rng fork(std::uint64_t stream) const {
        return Rng(splitmix(base_ ^ splitmix(stream + 0x9E3779B97F4A7C15ULL)));
    }

    std::uint64_t seed() const { return base_; }

private:
    static std::uint64_t splitmix(std::uint64_t x) {
        x += 0x9E3779B97F4A7C15ULL;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
        return x ^ (x >> 31);
    }

    std::uint64_t base_;
    std::mt19937_64 gen_;
};

}  // namespace idea::diff
