#include "linmix/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace linmix {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t id, std::uint64_t tag) {
    return splitmix64(splitmix64(splitmix64(base) ^ id) ^ tag);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t id, StreamTag tag) {
    return derive_seed(base, id, static_cast<std::uint64_t>(tag));
}

double Rng::uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

int Rng::index(int n) {
    if (n <= 0) throw std::invalid_argument("Rng::index: n must be positive");
    std::uniform_int_distribution<int> dist(0, n - 1);
    return dist(engine_);
}

int Rng::categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    if (!(total > 0.0)) throw std::invalid_argument("Rng::categorical: weights sum to zero");
    const double u = uniform() * total;
    double acc = 0.0;
    int last_positive = -1;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] <= 0.0) continue;
        acc += weights[i];
        last_positive = static_cast<int>(i);
        if (u < acc) return last_positive;
    }
    return last_positive;
}

double Rng::normal() { return normal_(engine_); }

Vec Rng::simplex(int n) {
    Vec v(n);
    for (int i = 0; i < n; ++i) {
        // 1 - u lies in (0, 1], so the log is finite.
        v(i) = -std::log(1.0 - uniform());
    }
    return v / v.sum();
}

}  // namespace linmix
