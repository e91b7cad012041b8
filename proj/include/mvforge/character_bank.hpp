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

// Per-song character identities. Every prompt that references a character
// carries the same rendered descriptor block, which is what keeps a face and
// outfit stable from shot to shot.

#ifndef MVFORGE_CHARACTER_BANK_HPP_
#define MVFORGE_CHARACTER_BANK_HPP_

#include <array>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "mvforge/errors.hpp"
#include "mvforge/rational.hpp"

namespace mvforge {

/// Appearance keys in descriptor order.
inline constexpr std::array<std::string_view, 7> kAppearanceKeys = {
    "gender", "age", "nationality", "hair", "face", "skin_color", "outfit"};

/// Value used for an appearance key the screenwriter left out.
std::string_view default_appearance(std::string_view key);

/// Same display name with different values for one appearance field.
class CharacterConflictError : public ValidationError {
 public:
  CharacterConflictError(std::string name, std::string field, std::string a, std::string b);
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// The bank is frozen once built; a character first seen mid-run lands here.
class BankFrozenError : public ConflictError {
 public:
  using ConflictError::ConflictError;
};

class NoMatchError : public NotFoundError {
 public:
  using NotFoundError::NotFoundError;
};

class UnresolvedReferenceError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

struct CharacterProfile {
  std::string character_id;
  std::string display_name;
  std::vector<std::string> aliases;
  std::map<std::string, std::string> appearance;
  /// Appearance keys that were filled from defaults.
  std::vector<std::string> defaulted;
  std::string descriptor_block;

  friend bool operator==(const CharacterProfile&, const CharacterProfile&) = default;
};

/// Pure function of display name and appearance.
std::string render_descriptor(std::string_view display_name,
                              const std::map<std::string, std::string>& appearance);

/// A screenwriter cast entry; appearance may be partial.
struct CastRecord {
  std::string name;
  std::vector<std::string> aliases;
  std::map<std::string, std::string> appearance;
};

CastRecord cast_record_from_json(const nlohmann::json& j);
nlohmann::json cast_record_to_json(const CastRecord& record);

class CharacterBank {
 public:
  CharacterBank() = default;
  explicit CharacterBank(std::string song_id) : song_id_(std::move(song_id)) {}

  const std::string& song_id() const { return song_id_; }
  const std::map<std::string, CharacterProfile>& profiles() const { return profiles_; }
  bool empty() const { return profiles_.empty(); }
  bool frozen() const { return frozen_; }
  const CharacterProfile* find(std::string_view character_id) const;

  /// Throws BankFrozenError after freeze(), ValidationError on a duplicate
  /// id or display name.
  void add(CharacterProfile profile);
  void freeze() { frozen_ = true; }

  friend bool operator==(const CharacterBank& a, const CharacterBank& b) {
    return a.song_id_ == b.song_id_ && a.profiles_ == b.profiles_;
  }

 private:
  std::string song_id_;
  std::map<std::string, CharacterProfile> profiles_;
  bool frozen_ = false;
};

struct BankBuild {
  CharacterBank bank;
  std::vector<std::string> warnings;
};

/// One profile per distinct (case-insensitive) name; records sharing a name
/// merge field by field. The returned bank is frozen.
BankBuild build_bank(std::string song_id, const std::vector<CastRecord>& records);

inline const Rational kDefaultMatchThreshold{34, 100};

/// |tokens(mention) ∩ tokens(name+aliases)| / |tokens(name+aliases)|.
Rational token_overlap(std::string_view mention, const CharacterProfile& profile);

/// Exact id, then exact name/alias (case-insensitive), then best token
/// overlap with ties to the smaller id. NotFoundError on an empty bank,
/// NoMatchError below the threshold.
const CharacterProfile& match(const CharacterBank& bank, std::string_view mention,
                              const Rational& threshold = kDefaultMatchThreshold);

/// Marker form of a character reference inside prompt text.
std::string marker(std::string_view character_id);

inline constexpr std::string_view kCharactersOpen = "\n\n[characters]\n";
inline constexpr std::string_view kCharactersClose = "[/characters]";

/// Rewrites @{id} markers to display names and appends one descriptor block
/// per profile in a delimited section. A section already present is
/// replaced, so injecting twice equals injecting once. A marker naming a
/// profile not in `profiles` throws UnresolvedReferenceError.
std::string inject(std::string_view prompt_text, const std::vector<CharacterProfile>& profiles);

/// Whether the text names the profile (marker, display name or alias as
/// whole words, case-insensitive), ignoring any injected section.
bool references(std::string_view prompt_text, const CharacterProfile& profile);

/// Replaces @{id} markers with display names (no descriptors).
std::string resolve_markers(std::string_view prompt_text, const CharacterBank& bank);

inline constexpr int kBankSchemaVersion = 1;

nlohmann::json bank_to_json(const CharacterBank& bank);
/// Re-renders every descriptor and rejects a block that does not match.
CharacterBank bank_from_json(const nlohmann::json& j);

}  // namespace mvforge

#endif  // MVFORGE_CHARACTER_BANK_HPP_
