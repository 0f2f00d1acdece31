#pragma once

#include <cstdint>
#include <random>
#include <span>

#include "linmix/common.hpp"

namespace linmix {

/// Tags separating the independent random streams of a run.
enum class StreamTag : std::uint64_t {
    environment = 0x656e76,
    algorithm = 0x616c67,
    env_generator = 0x67656e,
    prior_atoms = 0x707269,
    verifier = 0x766572,
};

std::uint64_t splitmix64(std::uint64_t x);

/// Seed for stream `tag` of replication `id` under `base`.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t id, StreamTag tag);
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t id, std::uint64_t tag);

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform on [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [0, n).
    int index(int n);
    /// Draws an index proportionally to non-negative, possibly unnormalized weights.
    int categorical(std::span<const double> weights);
    double normal();
    /// Uniform point on the probability simplex of dimension n (Dirichlet(1, ..., 1)).
    Vec simplex(int n);

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace linmix
