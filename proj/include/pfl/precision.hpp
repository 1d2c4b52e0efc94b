#pragma once

#include <cstdint>
#include <cstring>
#include <string>

namespace pfl {

enum class Precision { fp16, fp32, fp64 };

inline int bits_per_scalar(Precision p) {
    switch (p) {
        case Precision::fp16: return 16;
        case Precision::fp32: return 32;
        default: return 64;
    }
}

inline int wire_bytes_per_scalar(Precision p) { return bits_per_scalar(p) / 8; }

inline std::string to_string(Precision p) {
    switch (p) {
        case Precision::fp16: return "fp16";
        case Precision::fp32: return "fp32";
        default: return "fp64";
    }
}

// IEEE-754 binary16 conversion, round to nearest even.
inline std::uint16_t f32_to_f16_bits(float value) {
    std::uint32_t x;
    std::memcpy(&x, &value, 4);
    const std::uint32_t sign = (x >> 16) & 0x8000u;
    std::uint32_t mant = x & 0x7FFFFFu;
    const std::uint32_t exp32 = (x >> 23) & 0xFFu;
    if (exp32 == 0xFFu)  // inf / nan
        return std::uint16_t(sign | 0x7C00u | (mant ? (0x200u | (mant >> 13)) : 0u));
    const std::int32_t exp = std::int32_t(exp32) - 127 + 15;
    if (exp >= 0x1F) return std::uint16_t(sign | 0x7C00u);
    if (exp <= 0) {
        if (exp < -10) return std::uint16_t(sign);
        mant |= 0x800000u;
        const std::uint32_t shift = std::uint32_t(14 - exp);
        std::uint32_t half = mant >> shift;
        const std::uint32_t rem = mant & ((1u << shift) - 1u);
        const std::uint32_t halfway = 1u << (shift - 1);
        if (rem > halfway || (rem == halfway && (half & 1u))) ++half;
        return std::uint16_t(sign | half);
    }
    std::uint16_t half = std::uint16_t(sign | std::uint32_t(exp << 10) | (mant >> 13));
    const std::uint32_t rem = mant & 0x1FFFu;
    if (rem > 0x1000u || (rem == 0x1000u && (half & 1u))) ++half;  // carry rounds to inf
    return half;
}

inline float f16_bits_to_f32(std::uint16_t h) {
    const std::uint32_t sign = std::uint32_t(h & 0x8000u) << 16;
    std::uint32_t exp = (h >> 10) & 0x1Fu;
    std::uint32_t mant = h & 0x3FFu;
    std::uint32_t x;
    if (exp == 0) {
        if (mant == 0) {
            x = sign;
        } else {
            int e = -1;
            do {
                ++e;
                mant <<= 1;
            } while (!(mant & 0x400u));
            mant &= 0x3FFu;
            x = sign | (std::uint32_t(127 - 15 - e) << 23) | (mant << 13);
        }
    } else if (exp == 0x1F) {
        x = sign | 0x7F800000u | (mant << 13);
    } else {
        x = sign | ((exp - 15 + 127) << 23) | (mant << 13);
    }
    float f;
    std::memcpy(&f, &x, 4);
    return f;
}

inline float round_through_f16(float v) { return f16_bits_to_f32(f32_to_f16_bits(v)); }

inline bool precision_from_string(const std::string& s, Precision& out) {
    if (s == "fp16") out = Precision::fp16;
    else if (s == "fp32") out = Precision::fp32;
    else if (s == "fp64") out = Precision::fp64;
    else return false;
    return true;
}

// Emulated half-precision scalar: every arithmetic result is rounded through
// binary16 while the stored representation stays FP32 (reductions accumulate
// in FP32, see AccumOf). Mirrors FP16 runs on hardware without native half.
struct Half {
    float v = 0.0f;

    Half() = default;
    explicit Half(double d) : v(round_through_f16(float(d))) {}
    explicit Half(float f) : v(round_through_f16(f)) {}

    friend Half operator+(Half a, Half b) { return Half(a.v + b.v); }
    friend Half operator-(Half a, Half b) { return Half(a.v - b.v); }
    friend Half operator*(Half a, Half b) { return Half(a.v * b.v); }
    friend Half operator/(Half a, Half b) { return Half(a.v / b.v); }
    Half& operator+=(Half o) { *this = *this + o; return *this; }
    Half& operator-=(Half o) { *this = *this - o; return *this; }
    friend bool operator==(Half a, Half b) { return a.v == b.v; }
};

template <class S>
struct AccumOf { using type = S; };
template <>
struct AccumOf<Half> { using type = float; };

template <class S>
using accum_t = typename AccumOf<S>::type;

template <class S>
inline S scalar_from_double(double d) { return S(d); }
template <>
inline Half scalar_from_double<Half>(double d) { return Half(d); }

inline double scalar_to_double(double v) { return v; }
inline double scalar_to_double(float v) { return double(v); }
inline double scalar_to_double(Half v) { return double(v.v); }

}  // namespace pfl
