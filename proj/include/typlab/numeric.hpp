#pragma once

// SPDX-License-Identifier: Apache-2.0

#include <charconv>
#include <cmath>
#include <cstddef>
#include <string>

namespace typlab {

/// Smallest probability any recorded distribution may carry. Bounds every
/// per-token surprisal by log2(1/kProbFloor) ~ 33.2 bits.
inline constexpr double kProbFloor = 1e-10;

/// Neumaier-compensated running sum. Order-insensitive to ~1 ulp of the
/// total for the sizes used here.
class KahanSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::fabs(sum_) >= std::fabs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }

  KahanSum& operator+=(double x) noexcept {
    add(x);
    return *this;
  }

  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// Surprisal in bits, -log2(p).
inline double surprisal(double p) noexcept { return -std::log2(p); }

/// Round-trip decimal form with 17 significant digits ("%.17g", locale-free).
inline std::string format_double(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

}  // namespace typlab
