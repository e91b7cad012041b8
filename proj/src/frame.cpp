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

#include "mvforge/frame.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "mvforge/errors.hpp"

namespace mvforge {

FrameTime::FrameTime(std::int64_t frames) : frames_(frames) {
  if (frames < 0) {
    throw DomainError("frame count must be non-negative, got " + std::to_string(frames));
  }
}

FrameSpan::FrameSpan(FrameTime start, FrameTime end) : start_(start), end_(end) {
  if (!(start < end)) {
    throw DomainError("span start must precede end: [" + std::to_string(start.frames()) +
                      ", " + std::to_string(end.frames()) + ")");
  }
}

std::int64_t FrameSpan::overlap_frames(const FrameSpan& other) const {
  const std::int64_t lo = std::max(start_.frames(), other.start_.frames());
  const std::int64_t hi = std::min(end_.frames(), other.end_.frames());
  return std::max<std::int64_t>(0, hi - lo);
}

FrameTime quantize(double seconds, Rounding mode) {
  if (!std::isfinite(seconds) || seconds < 0.0) {
    throw DomainError("quantize expects a finite non-negative time, got " +
                      std::to_string(seconds));
  }
  const double scaled = seconds * static_cast<double>(kFramesPerSecond);
  if (scaled > 9.0e15) {
    throw DomainError("time too large to quantize: " + std::to_string(seconds));
  }
  const double grid = std::nearbyint(scaled);
  if (std::fabs(scaled - grid) <= 1e-9 * std::max(1.0, scaled)) {
    return FrameTime(static_cast<std::int64_t>(grid));
  }
  double frames = 0.0;
  switch (mode) {
    case Rounding::kNearest:
      frames = std::floor(scaled + 0.5);
      break;
    case Rounding::kFloor:
      frames = std::floor(scaled);
      break;
    case Rounding::kCeil:
      frames = std::ceil(scaled);
      break;
  }
  return FrameTime(static_cast<std::int64_t>(frames));
}

std::string format_seconds(FrameTime t) {
  const std::int64_t whole = t.frames() / kFramesPerSecond;
  const std::int64_t rem = t.frames() % kFramesPerSecond;
  // rem/24 has at most three significant decimals after rounding to ms.
  const std::int64_t millis = (rem * 1000 + kFramesPerSecond / 2) / kFramesPerSecond;
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%lld.%03llds", static_cast<long long>(whole),
                static_cast<long long>(millis));
  return buf;
}

}  // namespace mvforge
