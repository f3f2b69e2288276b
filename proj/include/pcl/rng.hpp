#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace pcl {

/// Small fork-splittable PRNG (xoshiro256** seeded through splitmix64).
///
/// Everything stochastic in this project draws from one of these. Independent
/// streams are derived with fork(), never by sharing a generator across
/// components, so results are reproducible bit-for-bit regardless of
/// evaluation order or thread count. Normal variates use Box-Muller on two
/// uniforms per call; no state is cached between calls.
class Rng {
public:
    Rng() { *this = seeded(0); }

    static Rng seeded(std::uint64_t seed) {
        std::array<std::uint64_t, 4> s{};
        std::uint64_t x = seed;
        for (auto& word : s) word = splitmix64(x);
        return Rng(s);
    }

    /// Derives an independent stream keyed by `stream`. Does not advance *this.
    [[nodiscard]] Rng fork(std::uint64_t stream) const {
        std::uint64_t h = 0x9e3779b97f4a7c15ULL;
        for (auto word : state_) h = mix(h ^ word);
        h = mix(h ^ (stream + 0x6a09e667f3bcc909ULL));
        return seeded(h);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform in [0, n). Multiply-shift; bias is O(n / 2^64).
    std::size_t below(std::size_t n) {
        return static_cast<std::size_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    /// Standard normal via Box-Muller. Two uniforms consumed per call.
    double normal() {
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

private:
    explicit Rng(std::array<std::uint64_t, 4> s) : state_(s) {}

    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    static std::uint64_t splitmix64(std::uint64_t& s) {
        s += 0x9e3779b97f4a7c15ULL;
        return mix(s);
    }

    std::array<std::uint64_t, 4> state_{};
};

}  // namespace pcl
