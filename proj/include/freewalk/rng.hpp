#pragma once

#include <array>
#include <cstdint>

namespace freewalk {

// splitmix64 (Steele/Lea/Flood); used for seed derivation only.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// xoshiro256** by Blackman & Vigna.  Small, fast, and good enough for
/// Monte Carlo; each stream is seeded independently via splitmix64.
class Xoshiro256ss {
public:
    explicit Xoshiro256ss(std::uint64_t seed) {
        for (auto& word : s_) word = splitmix64_next(seed);
    }

    std::uint64_t next() {
        auto rotl = [](std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); };
        std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

private:
    std::array<std::uint64_t, 4> s_{};
};

// Stream derivation.  All randomness flows from one root seed; independent
// streams are addressed as (trial, lane) so trials can run in any order on
// any number of threads and still reproduce exactly.
inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t trial, std::uint64_t lane) {
    std::uint64_t s = root;
    std::uint64_t h = splitmix64_next(s);
    s ^= trial + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    h = splitmix64_next(s);
    s ^= lane + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return splitmix64_next(s);
}

inline Xoshiro256ss derive_rng(std::uint64_t root, std::uint64_t trial, std::uint64_t lane = 0) {
    return Xoshiro256ss(derive_seed(root, trial, lane));
}

} // namespace freewalk
