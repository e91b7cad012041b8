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

#include "mvforge/rational.hpp"

#include <cctype>
#include <limits>

#include "mvforge/errors.hpp"

namespace mvforge {
namespace {

using i128 = __int128;

i128 gcd128(i128 a, i128 b) {
  if (a < 0) a = -a;
  if (b < 0) b = -b;
  while (b != 0) {
    const i128 t = a % b;
    a = b;
    b = t;
  }
  return a;
}

std::int64_t pow10(int n) {
  std::int64_t p = 1;
  for (int i = 0; i < n; ++i) p *= 10;
  return p;
}

}  // namespace

Rational::Rational(std::int64_t num, std::int64_t den) {
  *this = from_wide(num, den);
}

Rational Rational::from_wide(i128 num, i128 den) {
  if (den == 0) throw DomainError("rational with zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  const i128 g = gcd128(num, den);
  if (g > 1) {
    num /= g;
    den /= g;
  }
  constexpr i128 kMax = std::numeric_limits<std::int64_t>::max();
  if (num > kMax || num < -kMax || den > kMax) {
    throw DomainError("rational overflow");
  }
  Rational r;
  r.num_ = static_cast<std::int64_t>(num);
  r.den_ = static_cast<std::int64_t>(den);
  return r;
}

Rational Rational::parse(std::string_view text) {
  if (text.empty()) throw DomainError("empty rational literal");
  if (const auto slash = text.find('/'); slash != std::string_view::npos) {
    const Rational n = parse(text.substr(0, slash));
    const Rational d = parse(text.substr(slash + 1));
    return n / d;
  }
  bool negative = false;
  std::size_t i = 0;
  if (text[0] == '-' || text[0] == '+') {
    negative = text[0] == '-';
    i = 1;
  }
  i128 num = 0;
  i128 den = 1;
  bool seen_digit = false;
  bool seen_point = false;
  for (; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '.' && !seen_point) {
      seen_point = true;
      continue;
    }
    if (!std::isdigit(static_cast<unsigned char>(c))) {
      throw DomainError("bad rational literal: " + std::string(text));
    }
    seen_digit = true;
    num = num * 10 + (c - '0');
    if (seen_point) den *= 10;
    if (den > std::numeric_limits<std::int64_t>::max() / 10 ||
        num > std::numeric_limits<std::int64_t>::max() / 10) {
      throw DomainError("rational literal too long: " + std::string(text));
    }
  }
  if (!seen_digit) throw DomainError("bad rational literal: " + std::string(text));
  return from_wide(negative ? -num : num, den);
}

Rational operator+(const Rational& a, const Rational& b) {
  return Rational::from_wide(static_cast<i128>(a.num_) * b.den_ + static_cast<i128>(b.num_) * a.den_,
                             static_cast<i128>(a.den_) * b.den_);
}

Rational operator-(const Rational& a, const Rational& b) { return a + (-b); }

Rational operator*(const Rational& a, const Rational& b) {
  return Rational::from_wide(static_cast<i128>(a.num_) * b.num_,
                             static_cast<i128>(a.den_) * b.den_);
}

Rational operator/(const Rational& a, const Rational& b) {
  if (b.num_ == 0) throw DomainError("rational division by zero");
  return Rational::from_wide(static_cast<i128>(a.num_) * b.den_,
                             static_cast<i128>(a.den_) * b.num_);
}

std::strong_ordering operator<=>(const Rational& a, const Rational& b) {
  const i128 lhs = static_cast<i128>(a.num_) * b.den_;
  const i128 rhs = static_cast<i128>(b.num_) * a.den_;
  if (lhs < rhs) return std::strong_ordering::less;
  if (lhs > rhs) return std::strong_ordering::greater;
  return std::strong_ordering::equal;
}

Rational Rational::rounded(int decimals) const {
  const std::int64_t scale = pow10(decimals);
  const i128 scaled_num = static_cast<i128>(num_ < 0 ? -num_ : num_) * scale;
  // Half away from zero: floor((2*|x|*scale + den) / (2*den)).
  const i128 q = (2 * scaled_num + den_) / (2 * static_cast<i128>(den_));
  return from_wide(num_ < 0 ? -q : q, scale);
}

std::string Rational::to_fixed(int decimals) const {
  const Rational r = rounded(decimals);
  const std::int64_t scale = pow10(decimals);
  // r * scale is an integer by construction.
  const i128 units = static_cast<i128>(r.num_) * scale / r.den_;
  const bool negative = units < 0;
  const i128 mag = negative ? -units : units;
  std::string whole = std::to_string(static_cast<long long>(mag / scale));
  std::string out = negative ? "-" + whole : whole;
  if (decimals > 0) {
    std::string frac = std::to_string(static_cast<long long>(mag % scale));
    out += "." + std::string(decimals - frac.size(), '0') + frac;
  }
  return out;
}

std::string to_string(const Rational& r) {
  if (r.den() == 1) return std::to_string(r.num());
  return std::to_string(r.num()) + "/" + std::to_string(r.den());
}

}  // namespace mvforge
