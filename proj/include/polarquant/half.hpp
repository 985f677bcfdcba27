#pragma once

#include <cstdint>

namespace polarquant {

/// IEEE-754 binary16 conversions with round-to-nearest-even.
///
/// Encoding from double is done in one rounding step, so values computed in
/// 64-bit (block norms) never go through an intermediate float rounding.
std::uint16_t double_to_half(double value) noexcept;
std::uint16_t float_to_half(float value) noexcept;

float half_to_float(std::uint16_t bits) noexcept;

inline constexpr double kHalfMax = 65504.0;
/// Smallest positive subnormal, 2^-24.
inline constexpr double kHalfMinSubnormal = 5.9604644775390625e-08;

}  // namespace polarquant
