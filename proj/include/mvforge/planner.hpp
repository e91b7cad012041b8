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

// Temporal layout of a song: shots that tile [0, duration) exactly, each
// split into backend-renderable subclips chained by last-frame keyframes.

#ifndef MVFORGE_PLANNER_HPP_
#define MVFORGE_PLANNER_HPP_

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mvforge/context.hpp"

namespace mvforge {

struct PlannerConstraints {
  FrameTime min_shot{72};
  FrameTime max_shot{360};
  FrameTime min_subclip{72};
  FrameTime max_subclip{192};
  int max_subclips_per_shot = 3;
  /// Soft target length; shots longer than this count against a plan.
  FrameTime target_shot{192};
  /// Credit (in squared frames) for each shot boundary placed on a section
  /// transition rather than on a lyric boundary.
  std::int64_t section_boundary_bonus = 2304;

  /// Throws ConfigError when the bounds are inconsistent.
  void validate() const;

  friend bool operator==(const PlannerConstraints&, const PlannerConstraints&) = default;
};

/// Lexicographic plan cost; smaller is better.
struct PlanCost {
  std::int64_t synthetic_boundaries = 0;
  std::int64_t over_target_shots = 0;
  /// Sum of squared deviations from the target, minus section bonuses.
  std::int64_t deviation = 0;

  friend auto operator<=>(const PlanCost&, const PlanCost&) = default;
  PlanCost& operator+=(const PlanCost& o) {
    synthetic_boundaries += o.synthetic_boundaries;
    over_target_shots += o.over_target_shots;
    deviation += o.deviation;
    return *this;
  }
};

enum class KeyframeSource { kGeneratedImage, kPreviousLastFrame };

std::string_view to_string(KeyframeSource source);

struct Shot {
  std::string shot_id;
  FrameSpan span;
  SectionLabel section_label = SectionLabel::kInstrumental;
  std::vector<LyricLine> lyric_lines;
  std::optional<std::string> description;
  bool lipsync = false;
  bool continuity_from_previous = false;
  /// Set by a reviewer; wins over the computed default.
  std::optional<bool> continuity_override;
  /// Normalized character mentions from the script; empty until attached.
  std::vector<std::string> cast;

  friend bool operator==(const Shot&, const Shot&) = default;
};

struct SubClip {
  std::string subclip_id;
  std::string parent_shot;
  FrameSpan span;
  KeyframeSource keyframe_source = KeyframeSource::kGeneratedImage;

  friend bool operator==(const SubClip&, const SubClip&) = default;
};

struct ShotPlan {
  std::string song_id;
  FrameTime duration;
  std::vector<Shot> shots;
  std::vector<SubClip> subclips;
  PlannerConstraints constraints;
  /// Song shorter than min_shot: one shot covering it, bounds not met.
  bool undersized = false;
  PlanCost cost;

  const Shot* find_shot(std::string_view shot_id) const;
  const SubClip* find_subclip(std::string_view subclip_id) const;

  friend bool operator==(const ShotPlan&, const ShotPlan&) = default;
};

/// A frame where a shot may start or end.
struct Boundary {
  std::int64_t frame = 0;
  bool section_transition = false;

  friend bool operator==(const Boundary&, const Boundary&) = default;
};

/// {0, end} plus every section start and lyric start/end strictly inside
/// the song, sorted and de-duplicated.
std::vector<Boundary> candidate_boundaries(const MusicContext& ctx);

/// Optimal tiling over the candidate boundaries under the lexicographic
/// cost. Pieces between candidates that no legal shot can span are split
/// into the fewest balanced shots (counted as synthetic boundaries).
ShotPlan segment_song(const MusicContext& ctx, const PlannerConstraints& constraints = {});

/// Fewest subclips with balanced durations (differ by at most one frame).
/// Throws PlannerError naming the shot when no split fits the bounds.
std::vector<SubClip> split_shot(const Shot& shot, const PlannerConstraints& constraints);

/// Predicate deciding whether shots[index] gets the lip-sync backend.
using LipsyncPolicy =
    std::function<bool(const ShotPlan& plan, std::size_t index, const MusicContext& ctx)>;

/// Chorus onsets inside the shot, or the first shot with sung lyrics in
/// any section.
LipsyncPolicy default_lipsync_policy();
LipsyncPolicy never_lipsync_policy();

ShotPlan assign_lipsync_flags(ShotPlan plan, const MusicContext& ctx, const LipsyncPolicy& policy);

struct ShotScript {
  std::string shot_id;
  std::string description;
  /// Character mentions as written by the screenwriter.
  std::vector<std::string> mentions;
};

/// Fills description slots and casts, then recomputes continuity (same
/// section label and cast as the previous shot, unless overridden) and the
/// subclip keyframe sources that follow from it.
ShotPlan attach_script(ShotPlan plan, const std::vector<ShotScript>& scripts);

/// Reviewer override of continuity_from_previous; nullopt restores the default.
ShotPlan set_continuity_override(ShotPlan plan, std::string_view shot_id,
                                 std::optional<bool> value);

/// Structural checks: exact tiling, shot and subclip bounds, subclip
/// closure, keyframe-source rule. Empty when the plan is sound.
std::vector<Violation> validate_plan(const ShotPlan& plan);

inline constexpr int kPlanSchemaVersion = 1;

nlohmann::json plan_to_json(const ShotPlan& plan);
ShotPlan plan_from_json(const nlohmann::json& j);

}  // namespace mvforge

#endif  // MVFORGE_PLANNER_HPP_
