#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace mimic {

// Deterministic splitmix64 random stream. All randomness in the toolkit flows
// from one root seed through named substreams (see RngStream::derive), so any
// component can be reproduced in isolation. State is a single u64, which keeps
// checkpointing trivial and behavior identical across platforms (no reliance
// on std::*_distribution, whose outputs are implementation-defined).
class RngStream {
public:
    RngStream() = default;
    explicit RngStream(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ull;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). n must be > 0.
    std::uint64_t uniform_index(std::uint64_t n) { return next_u64() % n; }

    // Standard normal via Box-Muller. Draws two uniforms per call and discards
    // the second variate, so the stream state stays a single u64.
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    std::uint64_t state() const { return state_; }
    void set_state(std::uint64_t s) { state_ = s; }

    // Derives an independent substream from (seed, name, index).
    static RngStream derive(std::uint64_t root_seed, std::string_view name, std::uint64_t index = 0) {
        std::uint64_t h = 0xCBF29CE484222325ull;  // FNV-1a
        for (char c : name) {
            h ^= static_cast<std::uint8_t>(c);
            h *= 0x100000001B3ull;
        }
        RngStream mix(root_seed ^ h ^ (index * 0xA24BAED4963EE407ull));
        mix.next_u64();  // decorrelate nearby seeds
        return mix;
    }

private:
    std::uint64_t state_ = 0x853C49E6748FEA9Bull;
};

}  // namespace mimic
