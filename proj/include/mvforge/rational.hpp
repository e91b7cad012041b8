// Copyright 2026 The mvforge Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MVFORGE_RATIONAL_HPP_
#define MVFORGE_RATIONAL_HPP_

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace mvforge {

/// Exact rational with a normalized int64 numerator/denominator pair
/// (gcd-reduced, denominator > 0). Intermediate products use 128-bit
/// arithmetic; a result that does not fit int64 throws DomainError.
class Rational {
 public:
  constexpr Rational() = default;
  Rational(std::int64_t value) : num_(value), den_(1) {}  // NOLINT(runtime/explicit)
  Rational(std::int64_t num, std::int64_t den);

  /// Parses "3.07", "-1.5", "12" or "7/3" exactly.
  static Rational parse(std::string_view text);

  std::int64_t num() const { return num_; }
  std::int64_t den() const { return den_; }
  double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }

  /// Decimal rendering rounded half away from zero, e.g. to_fixed(2) -> "2.94".
  std::string to_fixed(int decimals) const;
  /// Rounded to `decimals` places, still exact.
  Rational rounded(int decimals) const;
  Rational abs() const { return num_ < 0 ? Rational(-num_, den_) : *this; }

  friend Rational operator+(const Rational& a, const Rational& b);
  friend Rational operator-(const Rational& a, const Rational& b);
  friend Rational operator*(const Rational& a, const Rational& b);
  friend Rational operator/(const Rational& a, const Rational& b);
  Rational operator-() const { return Rational(-num_, den_); }
  Rational& operator+=(const Rational& o) { return *this = *this + o; }

  friend bool operator==(const Rational& a, const Rational& b) {
    return a.num_ == b.num_ && a.den_ == b.den_;
  }
  friend std::strong_ordering operator<=>(const Rational& a, const Rational& b);

 private:
  static Rational from_wide(__int128 num, __int128 den);

  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

std::string to_string(const Rational& r);

}  // namespace mvforge

#endif  // MVFORGE_RATIONAL_HPP_
