#pragma once

#include <bit>
#include <cstdint>

namespace tapml::fp16 {

/// Software IEEE-754 binary16. Storage is the raw 16-bit pattern; every
/// narrowing conversion rounds to nearest-even, widening is lossless.

inline float bits_to_f32(uint16_t h) {
  const uint32_t sign = static_cast<uint32_t>(h & 0x8000u) << 16;
  const uint32_t exp = (h >> 10) & 0x1Fu;
  const uint32_t frac = h & 0x3FFu;
  uint32_t out;
  if (exp == 0) {
    if (frac == 0) {
      out = sign;  // signed zero
    } else {
      // subnormal: normalize into f32
      uint32_t e = 127 - 15 + 1;
      uint32_t f = frac;
      while ((f & 0x400u) == 0) {
        f <<= 1;
        --e;
      }
      out = sign | (e << 23) | ((f & 0x3FFu) << 13);
    }
  } else if (exp == 0x1F) {
    out = sign | 0x7F800000u | (frac << 13);  // inf / nan
  } else {
    out = sign | ((exp - 15 + 127) << 23) | (frac << 13);
  }
  return std::bit_cast<float>(out);
}

inline uint16_t f32_to_bits(float value) {
  const uint32_t x = std::bit_cast<uint32_t>(value);
  const uint16_t sign = static_cast<uint16_t>((x >> 16) & 0x8000u);
  const int32_t exp = static_cast<int32_t>((x >> 23) & 0xFFu) - 127 + 15;
  uint32_t frac = x & 0x7FFFFFu;

  if (((x >> 23) & 0xFFu) == 0xFFu) {
    // inf or nan; keep a nan payload bit so nan stays nan
    uint16_t f = static_cast<uint16_t>(frac >> 13);
    if (frac != 0 && f == 0) f = 1;
    return static_cast<uint16_t>(sign | 0x7C00u | f);
  }
  if (exp >= 0x1F) return static_cast<uint16_t>(sign | 0x7C00u);  // overflow -> inf
  if (exp <= 0) {
    if (exp < -10) return sign;  // underflow to zero
    // subnormal result: shift with round-to-nearest-even
    frac |= 0x800000u;
    const int shift = 14 - exp;
    const uint32_t kept = frac >> shift;
    const uint32_t rem = frac & ((1u << shift) - 1);
    const uint32_t half = 1u << (shift - 1);
    uint32_t out = kept;
    if (rem > half || (rem == half && (kept & 1))) ++out;
    return static_cast<uint16_t>(sign | out);
  }
  // normal result
  uint32_t kept = frac >> 13;
  const uint32_t rem = frac & 0x1FFFu;
  uint32_t out = (static_cast<uint32_t>(exp) << 10) | kept;
  if (rem > 0x1000u || (rem == 0x1000u && (out & 1))) ++out;  // may carry into exp
  if (out >= 0x7C00u) out = 0x7C00u;
  return static_cast<uint16_t>(sign | out);
}

/// Round a float through binary16 and widen back (the emulation step applied
/// to every F16 intermediate on the native-precision backend).
inline float round_f32(float value) { return bits_to_f32(f32_to_bits(value)); }

inline double round_f64(double value) {
  return static_cast<double>(round_f32(static_cast<float>(value)));
}

}  // namespace tapml::fp16
