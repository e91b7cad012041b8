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

// Song-level data model shared by every stage: metadata, caption, section
// structure and timed lyrics, all on the integer frame grid.

#ifndef MVFORGE_CONTEXT_HPP_
#define MVFORGE_CONTEXT_HPP_

#include <initializer_list>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "mvforge/frame.hpp"

namespace mvforge {

enum class SectionLabel { kIntro, kVerse, kChorus, kBridge, kInstrumental, kOutro };

std::string_view to_string(SectionLabel label);
/// Exact lowercase name; throws ValidationError for anything else.
SectionLabel parse_section_label(std::string_view name);

struct SongMetadata {
  std::string song_id;
  FrameTime duration;
  int sample_rate = 44100;
  std::string language_tag;
  std::string mix_audio_ref;
  std::optional<std::string> vocal_stem_ref;

  friend bool operator==(const SongMetadata&, const SongMetadata&) = default;
};

struct StructureSegment {
  SectionLabel label;
  FrameSpan span;

  friend bool operator==(const StructureSegment&, const StructureSegment&) = default;
};

struct LyricLine {
  std::string text;
  FrameSpan span;
  double confidence = 1.0;

  friend bool operator==(const LyricLine&, const LyricLine&) = default;
};

/// Keys allowed in MusicCaption::vocalist_attributes.
inline constexpr std::string_view kVocalistAttributeKeys[] = {"gender", "count", "age_range",
                                                             "vocal_style"};

struct MusicCaption {
  std::string genre;
  std::string mood;
  std::vector<std::string> instrumentation;
  std::map<std::string, std::string> vocalist_attributes;

  friend bool operator==(const MusicCaption&, const MusicCaption&) = default;
};

struct MusicContext {
  SongMetadata metadata;
  MusicCaption caption;
  std::vector<StructureSegment> structure;
  std::vector<LyricLine> lyrics;
  /// Carried through untouched; no algorithm depends on it.
  std::optional<std::vector<FrameTime>> beat_grid;

  friend bool operator==(const MusicContext&, const MusicContext&) = default;
};

struct Violation {
  std::string field;
  std::string rule;

  friend bool operator==(const Violation&, const Violation&) = default;
};

/// Empty iff every MusicContext invariant holds. Never throws.
std::vector<Violation> validate_context(const MusicContext& ctx);

// context.json: integer frames with an explicit top-level "fps": 24.
// Unknown keys are rejected at every level.
nlohmann::json context_to_json(const MusicContext& ctx);
MusicContext context_from_json(const nlohmann::json& j);

nlohmann::json span_to_json(const FrameSpan& span);
FrameSpan span_from_json(const nlohmann::json& j, std::string_view where);

/// Throws ValidationError naming the first key of `j` not in `allowed`.
void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<std::string_view> allowed,
                         std::string_view where);

}  // namespace mvforge

#endif  // MVFORGE_CONTEXT_HPP_
