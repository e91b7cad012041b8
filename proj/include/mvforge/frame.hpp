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

// Integer frame-grid time. Every timestamp past ingestion is a frame count
// on the 24 fps grid; seconds only exist at the edges (analyzer input and
// human-readable output).

#ifndef MVFORGE_FRAME_HPP_
#define MVFORGE_FRAME_HPP_

#include <compare>
#include <cstdint>
#include <string>

namespace mvforge {

/// The single definition of the timeline frame rate.
inline constexpr std::int64_t kFramesPerSecond = 24;

class FrameTime {
 public:
  constexpr FrameTime() = default;
  /// Throws DomainError when `frames` is negative.
  explicit FrameTime(std::int64_t frames);

  constexpr std::int64_t frames() const { return frames_; }
  /// Exact value is frames/24; the double is for display only.
  double seconds() const { return static_cast<double>(frames_) / kFramesPerSecond; }

  friend constexpr auto operator<=>(FrameTime, FrameTime) = default;

 private:
  std::int64_t frames_ = 0;
};

/// Half-open interval [start, end) with start < end.
class FrameSpan {
 public:
  /// Throws DomainError unless start < end.
  FrameSpan(FrameTime start, FrameTime end);
  FrameSpan(std::int64_t start_frames, std::int64_t end_frames)
      : FrameSpan(FrameTime(start_frames), FrameTime(end_frames)) {}

  FrameTime start() const { return start_; }
  FrameTime end() const { return end_; }
  std::int64_t duration_frames() const { return end_.frames() - start_.frames(); }

  bool contains(FrameTime t) const { return start_ <= t && t < end_; }
  bool intersects(const FrameSpan& other) const {
    return start_ < other.end_ && other.start_ < end_;
  }
  std::int64_t overlap_frames(const FrameSpan& other) const;

  friend bool operator==(const FrameSpan&, const FrameSpan&) = default;

 private:
  FrameTime start_;
  FrameTime end_;
};

enum class Rounding { kNearest, kFloor, kCeil };

/// Converts seconds to frames. kNearest rounds half up. Products within
/// 1e-9 (relative) of an integer snap to it so that f/24 maps back to f.
/// Throws DomainError for negative or non-finite input.
FrameTime quantize(double seconds, Rounding mode = Rounding::kNearest);

/// "12.500s" style rendering for logs and tables.
std::string format_seconds(FrameTime t);

}  // namespace mvforge

#endif  // MVFORGE_FRAME_HPP_
