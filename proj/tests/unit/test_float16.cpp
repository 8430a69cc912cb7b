#include <cmath>
#include <limits>

#include "doctest.h"
#include "tapml/float16.hpp"

using namespace tapml;

TEST_CASE("binary16 known bit patterns") {
  CHECK(fp16::f32_to_bits(0.0f) == 0x0000);
  CHECK(fp16::f32_to_bits(-0.0f) == 0x8000);
  CHECK(fp16::f32_to_bits(1.0f) == 0x3C00);
  CHECK(fp16::f32_to_bits(-2.0f) == 0xC000);
  CHECK(fp16::f32_to_bits(0.5f) == 0x3800);
  CHECK(fp16::f32_to_bits(65504.0f) == 0x7BFF);  // largest finite binary16
  CHECK(fp16::bits_to_f32(0x3C00) == 1.0f);
  CHECK(fp16::bits_to_f32(0x7BFF) == 65504.0f);
  CHECK(fp16::bits_to_f32(0x0001) == doctest::Approx(5.960464477539063e-08));  // min subnormal
  CHECK(fp16::bits_to_f32(0x0400) == doctest::Approx(6.103515625e-05));        // min normal
}

TEST_CASE("binary16 overflow, infinity, and nan") {
  CHECK(fp16::f32_to_bits(65520.0f) == 0x7C00);  // first value rounding to inf
  CHECK(fp16::f32_to_bits(1e9f) == 0x7C00);
  CHECK(fp16::f32_to_bits(-1e9f) == 0xFC00);
  CHECK(std::isinf(fp16::bits_to_f32(0x7C00)));
  CHECK(std::isinf(fp16::bits_to_f32(0xFC00)));
  CHECK(fp16::bits_to_f32(0xFC00) < 0.0f);
  const float nan = std::numeric_limits<float>::quiet_NaN();
  CHECK(std::isnan(fp16::bits_to_f32(fp16::f32_to_bits(nan))));
}

TEST_CASE("binary16 round-to-nearest-even at the 1.0 midpoints") {
  // ulp at 1.0 is 2^-10; the midpoint 1 + 2^-11 ties to even (stays 1.0)
  CHECK(fp16::f32_to_bits(1.0f + 0x1.0p-11f) == 0x3C00);
  // 1 + 3*2^-11 ties upward to the even code 0x3C02
  CHECK(fp16::f32_to_bits(1.0f + 3.0f * 0x1.0p-11f) == 0x3C02);
  // anything past a midpoint rounds away
  CHECK(fp16::f32_to_bits(1.0f + 0x1.0p-11f + 0x1.0p-17f) == 0x3C01);
  CHECK(fp16::f32_to_bits(1.0f + 0x1.0p-10f) == 0x3C01);
}

TEST_CASE("binary16 subnormal rounding and underflow") {
  // half of the smallest subnormal ties to even -> zero
  CHECK(fp16::f32_to_bits(2.980232238769531e-08f) == 0x0000);
  // just above the tie rounds up to the smallest subnormal
  CHECK(fp16::f32_to_bits(3.1e-08f) == 0x0001);
  CHECK(fp16::f32_to_bits(1e-12f) == 0x0000);
  CHECK(fp16::f32_to_bits(-1e-12f) == 0x8000);
}

TEST_CASE("every binary16 code round-trips losslessly through f32") {
  for (uint32_t code = 0; code <= 0xFFFF; ++code) {
    const uint16_t h = static_cast<uint16_t>(code);
    const float widened = fp16::bits_to_f32(h);
    if (std::isnan(widened)) {
      CHECK(std::isnan(fp16::bits_to_f32(fp16::f32_to_bits(widened))));
    } else {
      CHECK(fp16::f32_to_bits(widened) == h);
    }
  }
}

TEST_CASE("values near 1000 are spaced 0.5 then 1.0 in binary16") {
  // [512, 1024) has ulp 0.5; [1024, 2048) has ulp 1.0 - so 1031 and 1035 are
  // exactly representable and their difference survives the narrow format
  CHECK(fp16::round_f64(1031.0) == 1031.0);
  CHECK(fp16::round_f64(1035.0) == 1035.0);
  CHECK(fp16::round_f64(1035.0 - 1031.0) == 4.0);
  CHECK(fp16::round_f64(1000.25) == 1000.0);  // rounds to even neighbor
  CHECK(fp16::round_f64(1024.5) == 1024.0);
}
