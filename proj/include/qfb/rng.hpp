#pragma once

// Per-trajectory random streams.
//
// Every trajectory owns a generator keyed by (master seed, trajectory index),
// so ensembles reproduce bit-exactly no matter how trajectories are spread
// over worker threads.

#include <cmath>
#include <cstdint>
#include <random>

namespace qfb {

/// SplitMix64 finalizer; a bijective 64-bit mixer.
inline constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Seed for stream `index` under `master`.
inline constexpr std::uint64_t stream_seed(std::uint64_t master, std::uint64_t index) noexcept {
    return mix64(mix64(master) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

/// Source of Wiener increments dW ~ Normal(0, dt).
class WienerSource {
public:
    WienerSource(std::uint64_t master, std::uint64_t index)
        : engine_(stream_seed(master, index)) {}

    double increment(double dt) { return std::sqrt(dt) * normal_(engine_); }

    /// Standard normal draw on the same stream.
    double standard_normal() { return normal_(engine_); }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace qfb
