#pragma once

#include <cstdint>
#include <random>

namespace stalkprobe {

/// Seeded random stream. Every stochastic operation takes one of these
/// explicitly; nothing in the library touches global random state.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
        engine_.seed(seq);
    }

    double uniform(double lo = 0.0, double hi = 1.0) {
        return std::uniform_real_distribution<double>(lo, hi)(engine_);
    }

    // Distribution objects are rebuilt per call so that no cached variate
    // survives between draws; the stream position alone defines the state.
    double normal(double mean, double sigma) {
        if (sigma <= 0.0) return mean;
        return std::normal_distribution<double>(mean, sigma)(engine_);
    }

    bool bernoulli(double p) {
        if (p <= 0.0) return false;
        if (p >= 1.0) return true;
        return uniform() < p;
    }

    double beta(double alpha, double beta_param) {
        const double x = std::gamma_distribution<double>(alpha, 1.0)(engine_);
        const double y = std::gamma_distribution<double>(beta_param, 1.0)(engine_);
        return x / (x + y);
    }

    std::uint64_t next_seed() { return engine_(); }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

} // namespace stalkprobe
