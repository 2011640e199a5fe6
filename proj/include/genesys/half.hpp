#pragma once

#include <bit>
#include <cstdint>

namespace genesys {

// IEEE 754 binary16 conversions, round-to-nearest-even.

inline std::uint16_t float_to_half_bits(float value) {
    const auto bits = std::bit_cast<std::uint32_t>(value);
    const std::uint32_t sign = (bits >> 16) & 0x8000u;
    const std::uint32_t exponent = (bits >> 23) & 0xFFu;
    std::uint32_t mantissa = bits & 0x7FFFFFu;

    if (exponent == 0xFFu)
        return static_cast<std::uint16_t>(sign | 0x7C00u | (mantissa != 0 ? 0x200u : 0u));

    const int rebiased = static_cast<int>(exponent) - 127 + 15;
    if (rebiased >= 0x1F)
        return static_cast<std::uint16_t>(sign | 0x7C00u);

    if (rebiased <= 0) {
        if (rebiased < -10)
            return static_cast<std::uint16_t>(sign);
        mantissa |= 0x800000u;
        const int shift = 14 - rebiased;
        std::uint32_t half_mantissa = mantissa >> shift;
        const std::uint32_t rest = mantissa & ((1u << shift) - 1u);
        const std::uint32_t halfway = 1u << (shift - 1);
        if (rest > halfway || (rest == halfway && (half_mantissa & 1u)))
            ++half_mantissa;
        return static_cast<std::uint16_t>(sign | half_mantissa);
    }

    std::uint32_t half = sign | (static_cast<std::uint32_t>(rebiased) << 10) | (mantissa >> 13);
    const std::uint32_t rest = mantissa & 0x1FFFu;
    // a carry out of the mantissa correctly bumps the exponent (up to infinity)
    if (rest > 0x1000u || (rest == 0x1000u && (half & 1u)))
        ++half;
    return static_cast<std::uint16_t>(half);
}

inline float half_bits_to_float(std::uint16_t half) {
    const std::uint32_t sign = static_cast<std::uint32_t>(half & 0x8000u) << 16;
    const std::uint32_t exponent = (half >> 10) & 0x1Fu;
    std::uint32_t mantissa = half & 0x3FFu;

    std::uint32_t bits = 0;
    if (exponent == 0) {
        if (mantissa == 0) {
            bits = sign;
        } else {
            int e = -1;
            do {
                ++e;
                mantissa <<= 1;
            } while ((mantissa & 0x400u) == 0);
            bits = sign | (static_cast<std::uint32_t>(127 - 15 - e) << 23) | ((mantissa & 0x3FFu) << 13);
        }
    } else if (exponent == 0x1F) {
        bits = sign | 0x7F800000u | (mantissa << 13);
    } else {
        bits = sign | ((exponent + 127 - 15) << 23) | (mantissa << 13);
    }
    return std::bit_cast<float>(bits);
}

/// Nearest binary16 value, widened back to double.
inline double quantize_half(double value) {
    return static_cast<double>(half_bits_to_float(float_to_half_bits(static_cast<float>(value))));
}

/// Nearest binary32 value, widened back to double.
inline double quantize_single(double value) {
    return static_cast<double>(static_cast<float>(value));
}

} // namespace genesys
