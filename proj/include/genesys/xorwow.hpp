#pragma once

// XOR-WOW streams (Marsaglia 2003), one independent stream per consumer.

#include <cstdint>

namespace genesys {

struct XorWowState {
    std::uint32_t x = 123456789u;
    std::uint32_t y = 362436069u;
    std::uint32_t z = 521288629u;
    std::uint32_t w = 88675123u;
    std::uint32_t v = 5783321u;
    std::uint32_t d = 6615241u;
    std::uint64_t stream_id = 0;

    std::uint32_t next_word() {
        const std::uint32_t t = x ^ (x >> 2);
        x = y;
        y = z;
        z = w;
        w = v;
        v = (v ^ (v << 4)) ^ (t ^ (t << 1));
        d += 362437u;
        return d + v;
    }

    std::uint8_t next_byte() { return static_cast<std::uint8_t>(next_word() & 0xFFu); }

    /// Uniform in [0, 1).
    double next_unit() { return static_cast<double>(next_word()) * 0x1p-32; }

    /// Uniform integer in [0, n); multiply-shift, no rejection.
    std::uint32_t next_below(std::uint32_t n) {
        return static_cast<std::uint32_t>((static_cast<std::uint64_t>(next_word()) * n) >> 32);
    }

    bool words_all_zero() const { return (x | y | z | w | v) == 0; }

    friend bool operator==(const XorWowState&, const XorWowState&) = default;
};

inline std::uint64_t splitmix64(std::uint64_t& s) {
    std::uint64_t z = (s += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// Builds a state from raw words; an all-zero xorshift vector is replaced by the classic seed constants.
inline XorWowState make_xorwow(std::uint32_t x, std::uint32_t y, std::uint32_t z, std::uint32_t w,
                               std::uint32_t v, std::uint32_t d, std::uint64_t stream_id) {
    XorWowState s{x, y, z, w, v, d, stream_id};
    if (s.words_all_zero()) {
        const XorWowState fallback{};
        s.x = fallback.x;
        s.y = fallback.y;
        s.z = fallback.z;
        s.w = fallback.w;
        s.v = fallback.v;
    }
    return s;
}

inline XorWowState seed_stream(std::uint64_t seed, std::uint64_t stream_id) {
    std::uint64_t mix = stream_id + 0x632BE59BD9B4E019ull;
    std::uint64_t s = seed ^ splitmix64(mix);
    const std::uint64_t a = splitmix64(s);
    const std::uint64_t b = splitmix64(s);
    const std::uint64_t c = splitmix64(s);
    return make_xorwow(static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                       static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
                       static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32), stream_id);
}

/// Derives a sub-seed, e.g. one per generation or per episode.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t s = seed ^ (salt * 0xD1B54A32D192ED03ull);
    return splitmix64(s);
}

} // namespace genesys
