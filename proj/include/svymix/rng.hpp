#pragma once

#include <array>
#include <cstdint>

namespace svymix {

// SplitMix64 step (Steele/Lea/Flood); used for seeding and stream derivation.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// xoshiro256** generator with SplitMix64-derived streams.
///
/// `Rng::stream(master, id)` seeds from position `id` of the SplitMix64
/// sequence anchored at `master`, which is the usual splittable construction:
/// distinct ids give statistically independent streams and the mapping is a
/// pure function, so replicated runs are reproducible draw-for-draw.
class Rng {
  public:
    static Rng seeded(std::uint64_t seed) { return stream(seed, 0); }

    static Rng stream(std::uint64_t master, std::uint64_t stream_id) {
        Rng r;
        std::uint64_t sm = master + stream_id * 0x9E3779B97F4A7C15ull;
        bool all_zero = true;
        for (auto& w : r.state_) {
            w = splitmix64(sm);
            all_zero = all_zero && w == 0;
        }
        if (all_zero) r.state_[0] = 1;
        return r;
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

    /// Uniform double in [0, 1) with 53 random bits.
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Unbiased integer in [0, n); Lemire's multiply-reject method.
    std::uint64_t next_below(std::uint64_t n) {
        unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
        auto lo = static_cast<std::uint64_t>(m);
        if (lo < n) {
            const std::uint64_t threshold = (0 - n) % n;
            while (lo < threshold) {
                m = static_cast<unsigned __int128>(next_u64()) * n;
                lo = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

  private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }
    std::array<std::uint64_t, 4> state_{};
};

}  // namespace svymix
