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

// Frame-exact edit decision list binding selected clips to the song.

#ifndef MVFORGE_ASSEMBLER_HPP_
#define MVFORGE_ASSEMBLER_HPP_

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mvforge/generation.hpp"
#include "mvforge/planner.hpp"

namespace mvforge {

class AssemblyError : public Error {
 public:
  using Error::Error;
};

/// What generation settled on for one subclip: a clip, or a failure.
struct Selection {
  std::optional<ClipCandidate> clip;
  bool fallback_accepted = false;
  bool human_override = false;
  std::string failure;
};

struct ManifestEntry {
  enum class Kind { kClip, kGap };
  Kind kind = Kind::kClip;
  std::string subclip_id;
  FrameSpan span{0, 1};
  // Clip entries.
  std::string candidate_id;
  std::string artifact;
  BackendKind backend = BackendKind::kGeneralRender;
  bool fallback_accepted = false;
  bool human_override = false;
  // Gap entries.
  std::string failure;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

inline constexpr int kManifestSchemaVersion = 1;

struct AssemblyManifest {
  std::string song_id;
  std::vector<ManifestEntry> entries;
  AudioRecord audio;
  FrameTime total;

  std::vector<const ManifestEntry*> gaps() const;
  friend bool operator==(const AssemblyManifest&, const AssemblyManifest&) = default;
};

/// One entry per planned subclip in plan order. A subclip without a clip
/// (or missing from `selections`) becomes a gap entry. Throws
/// AssemblyError when a clip's duration differs from its planned span, and
/// InternalError if the entries fail to tile the song.
AssemblyManifest assemble(const ShotPlan& plan, const std::map<std::string, Selection>& selections,
                          const AudioRecord& audio);

nlohmann::json manifest_to_json(const AssemblyManifest& m);
AssemblyManifest manifest_from_json(const nlohmann::json& j);

/// Plain-text listing for an external concatenation tool:
///   clip <locator> <start_frame> <end_frame>   (one per entry)
///   audio <locator> 0 <total>
/// LF line endings. Refuses manifests with gaps (AssemblyError listing
/// them) and locators containing whitespace.
std::string export_concat_list(const AssemblyManifest& m);

}  // namespace mvforge

#endif  // MVFORGE_ASSEMBLER_HPP_
