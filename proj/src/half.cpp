#include "polarquant/half.hpp"

#include <bit>
#include <cmath>
#include <cstring>

namespace polarquant {

std::uint16_t double_to_half(double value) noexcept {
  const std::uint64_t bits = std::bit_cast<std::uint64_t>(value);
  const auto sign = static_cast<std::uint16_t>((bits >> 48) & 0x8000u);
  const int exp = static_cast<int>((bits >> 52) & 0x7ff);
  std::uint64_t mant = bits & ((std::uint64_t{1} << 52) - 1);

  if (exp == 0x7ff) {
    if (mant != 0) {
      // keep the top payload bits, force quiet
      return static_cast<std::uint16_t>(sign | 0x7e00u | (mant >> 42));
    }
    return static_cast<std::uint16_t>(sign | 0x7c00u);
  }
  if (exp == 0 && mant == 0) return sign;  // signed zero; double subnormals underflow below too

  const int unbiased = exp - 1023;
  if (unbiased > 15) return static_cast<std::uint16_t>(sign | 0x7c00u);

  // 53-bit significand with implicit one (double subnormals are far below
  // the binary16 range and simply round to zero).
  std::uint64_t sig = (exp == 0) ? mant : (mant | (std::uint64_t{1} << 52));

  // Number of low bits to discard so that the kept bits form a binary16
  // significand (10 fraction bits for normals; fewer for subnormals).
  int shift;
  int half_exp;
  if (unbiased >= -14) {
    shift = 52 - 10;
    half_exp = unbiased + 15;
  } else {
    shift = 52 - 10 + (-14 - unbiased);
    half_exp = 0;
  }
  if (shift > 63) return sign;

  std::uint64_t kept = sig >> shift;
  const std::uint64_t rem = sig & ((std::uint64_t{1} << shift) - 1);
  const std::uint64_t halfway = std::uint64_t{1} << (shift - 1);
  if (rem > halfway || (rem == halfway && (kept & 1u))) ++kept;

  if (half_exp == 0) {
    // subnormal; rounding may carry into the smallest normal, which the
    // plain bit pattern represents correctly
    return static_cast<std::uint16_t>(sign | kept);
  }
  // kept includes the implicit bit at position 10; a carry to bit 11 bumps the exponent
  if (kept >> 11) {
    kept >>= 1;
    ++half_exp;
  }
  if (half_exp >= 31) return static_cast<std::uint16_t>(sign | 0x7c00u);
  return static_cast<std::uint16_t>(sign | (half_exp << 10) | (kept & 0x3ffu));
}

std::uint16_t float_to_half(float value) noexcept {
  return double_to_half(static_cast<double>(value));
}

float half_to_float(std::uint16_t h) noexcept {
  const std::uint32_t sign = static_cast<std::uint32_t>(h & 0x8000u) << 16;
  const std::uint32_t exp = (h >> 10) & 0x1fu;
  std::uint32_t mant = h & 0x3ffu;

  std::uint32_t out;
  if (exp == 0) {
    if (mant == 0) {
      out = sign;
    } else {
      // normalize the subnormal
      int e = -1;
      do {
        ++e;
        mant <<= 1;
      } while ((mant & 0x400u) == 0);
      out = sign | (static_cast<std::uint32_t>(127 - 15 - e) << 23) | ((mant & 0x3ffu) << 13);
    }
  } else if (exp == 0x1f) {
    out = sign | 0x7f800000u | (mant << 13);
  } else {
    out = sign | ((exp + 127 - 15) << 23) | (mant << 13);
  }
  return std::bit_cast<float>(out);
}

}  // namespace polarquant
