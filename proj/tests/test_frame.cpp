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

// Timeline arithmetic, exact rationals and the small utilities everything
// else leans on.

#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "mvforge/errors.hpp"
#include "mvforge/frame.hpp"
#include "mvforge/rational.hpp"
#include "mvforge/util.hpp"

using namespace mvforge;

TEST_CASE("frame time rejects negatives and spans must be non-empty") {
  CHECK_THROWS_AS(FrameTime(-1), DomainError);
  CHECK_THROWS_AS(FrameSpan(10, 10), DomainError);
  CHECK_THROWS_AS(FrameSpan(11, 10), DomainError);
  const FrameSpan s(24, 96);
  CHECK(s.duration_frames() == 72);
  CHECK(s.contains(FrameTime(24)));
  CHECK_FALSE(s.contains(FrameTime(96)));
}

TEST_CASE("half-open spans: adjacent spans do not intersect") {
  const FrameSpan a(0, 96), b(96, 240);
  CHECK_FALSE(a.intersects(b));
  CHECK(a.overlap_frames(b) == 0);
  CHECK(FrameSpan(0, 100).overlap_frames(FrameSpan(50, 200)) == 50);
}

TEST_CASE("quantize: 24 fps, round half up, exact round trip") {
  CHECK(quantize(12.5).frames() == 300);
  CHECK(quantize(1.0 / 48).frames() == 1);  // exactly half a frame rounds up
  CHECK(quantize(0.02).frames() == 0);
  CHECK(quantize(0.02, Rounding::kCeil).frames() == 1);
  CHECK(quantize(0.99 / 24, Rounding::kFloor).frames() == 0);
  for (std::int64_t f = 0; f < 24 * 400; ++f) {
    REQUIRE(quantize(static_cast<double>(f) / 24.0).frames() == f);
  }
  CHECK_THROWS_AS(quantize(-0.5), DomainError);
  CHECK_THROWS_AS(quantize(std::numeric_limits<double>::quiet_NaN()), DomainError);
  CHECK_THROWS_AS(quantize(std::numeric_limits<double>::infinity()), DomainError);
}

TEST_CASE("format_seconds") { CHECK(format_seconds(FrameTime(300)) == "12.500s"); }

TEST_CASE("rational parse and normalize") {
  CHECK(Rational::parse("3.07") == Rational(307, 100));
  CHECK(Rational::parse("-1.5") == Rational(-3, 2));
  CHECK(Rational::parse("12") == Rational(12));
  CHECK(Rational::parse("14/6") == Rational(7, 3));
  CHECK(Rational(2, -4) == Rational(-1, 2));
  CHECK_THROWS(Rational::parse("abc"));
  CHECK_THROWS(Rational(1, 0));
}

TEST_CASE("rational arithmetic is exact") {
  const Rational a(1, 3), b(1, 6);
  CHECK(a + b == Rational(1, 2));
  CHECK(a - b == Rational(1, 6));
  CHECK(a * b == Rational(1, 18));
  CHECK(a / b == Rational(2));
  CHECK(Rational(1, 5) + Rational(1, 5) + Rational(3, 10) + Rational(3, 10) == Rational(1));
  CHECK(Rational(2, 3) > Rational(3, 5));
}

TEST_CASE("rational presentation rounds half away from zero") {
  CHECK(Rational(2985, 1000).to_fixed(2) == "2.99");
  CHECK(Rational(-2985, 1000).to_fixed(2) == "-2.99");
  CHECK(Rational(317, 150).to_fixed(2) == "2.11");
  CHECK(Rational(1, 3).to_fixed(3) == "0.333");
  CHECK(Rational(5).to_fixed(2) == "5.00");
  CHECK(Rational(2985, 1000).rounded(2) == Rational(299, 100));
}

TEST_CASE("rational overflow is reported, not wrapped") {
  const Rational big(std::numeric_limits<std::int64_t>::max() / 2);
  CHECK_THROWS_AS(big * Rational(4), DomainError);
}

TEST_CASE("property: rational field laws on random small fractions") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::int64_t> n(-1000, 1000), d(1, 1000);
  for (int i = 0; i < 2000; ++i) {
    const Rational a(n(rng), d(rng)), b(n(rng), d(rng)), c(n(rng), d(rng));
    REQUIRE((a + b) + c == a + (b + c));
    REQUIRE(a * (b + c) == a * b + a * c);
    REQUIRE(a - a == Rational(0));
    REQUIRE(std::abs((a + b).to_double() - (a.to_double() + b.to_double())) < 1e-9);
  }
}

TEST_CASE("hashing is stable and field-separated") {
  // FNV-1a reference values.
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(hash_fields({"ab", "c"}) != hash_fields({"a", "bc"}));
  CHECK(hash_fields({"x"}, 1) != hash_fields({"x"}, 2));
  CHECK(hex64(255) == "00000000000000ff");
}

TEST_CASE("text helpers") {
  CHECK(to_lower("MiXeD") == "mixed");
  CHECK(trim("  a b \n") == "a b");
  CHECK(tokenize("Mira-Chen, the  Ghost!") == std::vector<std::string>{"mira", "chen", "the", "ghost"});
}
