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

// Analyzer clients (captioning, structure, source separation, lyrics
// transcription) and the normalization that turns their second-valued raw
// output into a valid MusicContext.

#ifndef MVFORGE_INGEST_HPP_
#define MVFORGE_INGEST_HPP_

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "mvforge/context.hpp"
#include "mvforge/transport.hpp"

namespace mvforge {

enum class AnalyzerRole { kCaptioner, kStructureAnalyzer, kSourceSeparator, kLyricsTranscriber };

inline constexpr AnalyzerRole kAllAnalyzerRoles[] = {
    AnalyzerRole::kCaptioner, AnalyzerRole::kStructureAnalyzer, AnalyzerRole::kSourceSeparator,
    AnalyzerRole::kLyricsTranscriber};

std::string_view to_string(AnalyzerRole role);
AnalyzerRole parse_analyzer_role(std::string_view name);

/// Wire request: song id + audio locator. duration_frames lets synthetic
/// backends bound their output; real analyzers ignore it.
struct AnalysisRequest {
  std::string song_id;
  std::string audio_locator;
  std::int64_t duration_frames = 0;
};

class AnalyzerClient {
 public:
  virtual ~AnalyzerClient() = default;
  virtual AnalyzerRole role() const = 0;
  /// Returns the role-specific JSON record. Throws TransientClientError or
  /// PermanentClientError. Must be callable from several threads.
  virtual nlohmann::json analyze(const AnalysisRequest& request) const = 0;
};

struct RawSegment {
  double start = 0.0;
  double end = 0.0;
  std::string label;
};

struct RawLyric {
  std::string text;
  double start = 0.0;
  double end = 0.0;
  double confidence = 1.0;
};

struct StemRefs {
  std::string vocals;
  std::string accompaniment;
};

struct RoleFailure {
  bool retriable = false;
  std::string message;
  int attempts = 0;
};

struct RawAnalysisBundle {
  std::string song_id;
  std::optional<MusicCaption> caption;
  std::optional<std::vector<RawSegment>> structure;
  std::optional<std::vector<RawLyric>> lyrics;
  std::optional<StemRefs> stems;
  std::map<AnalyzerRole, RoleFailure> failures;
};

nlohmann::json bundle_to_json(const RawAnalysisBundle& bundle);

// Decoders for each role's payload; malformed input -> PermanentClientError.
MusicCaption decode_caption(const nlohmann::json& j);
std::vector<RawSegment> decode_structure(const nlohmann::json& j);
std::vector<RawLyric> decode_lyrics(const nlohmann::json& j);
StemRefs decode_stems(const nlohmann::json& j);

struct AnalyzerSet {
  std::shared_ptr<const AnalyzerClient> captioner;
  std::shared_ptr<const AnalyzerClient> structure;
  std::shared_ptr<const AnalyzerClient> separator;
  std::shared_ptr<const AnalyzerClient> lyrics;
};

struct FetchOptions {
  RetryPolicy retry{};
  /// Roles deliberately not run (e.g. lyrics in the lyrics ablation).
  std::set<AnalyzerRole> skip;
};

/// Runs the four analyzers concurrently. Per-role failures are recorded in
/// the bundle rather than thrown. A missing client for a role not in
/// options.skip is a ConfigError.
RawAnalysisBundle fetch_analysis(const SongMetadata& song, const AnalyzerSet& clients,
                                 const FetchOptions& options = {});

/// Quantizes, sorts, truncates the earlier of two overlapping segments to
/// the later start, fills gaps with `instrumental`, and tiles [0, duration)
/// exactly. Empty input gives a single instrumental segment.
std::vector<StructureSegment> normalize_structure(const std::vector<RawSegment>& raw,
                                                  FrameTime duration);

/// Maps analyzer labels onto SectionLabel ("Pre-Chorus" -> verse, unknown ->
/// instrumental).
SectionLabel map_raw_label(std::string_view raw_label);

inline constexpr double kMinLyricConfidence = 0.2;

/// Drops low-confidence and empty lines, quantizes, clamps to the song,
/// orders by start and truncates an earlier line at the next line's start.
std::vector<LyricLine> reconcile_lyrics(const std::vector<RawLyric>& raw, FrameTime duration,
                                        double min_confidence = kMinLyricConfidence);
std::vector<LyricLine> reconcile_lyrics(const std::vector<LyricLine>& lines, FrameTime duration,
                                        double min_confidence = kMinLyricConfidence);

struct NormalizedContext {
  MusicContext context;
  std::vector<std::string> warnings;
};

/// Failed roles degrade: no caption -> empty caption, no structure -> one
/// instrumental segment, no lyrics -> structure-only context.
NormalizedContext normalize_bundle(const RawAnalysisBundle& bundle, const SongMetadata& song);

// ---- analyzer backends -------------------------------------------------

/// Echoes `<song_dir>/raw/<role>.json`. A missing file is reported as a
/// transient failure (the "service" is unreachable).
class FixtureAnalyzerClient final : public AnalyzerClient {
 public:
  FixtureAnalyzerClient(AnalyzerRole role, std::filesystem::path song_dir);
  AnalyzerRole role() const override { return role_; }
  nlohmann::json analyze(const AnalysisRequest& request) const override;

 private:
  AnalyzerRole role_;
  std::filesystem::path song_dir_;
};

/// Deterministic pseudo analyzer: output is a pure function of
/// (role, song_id, duration, seed). Timestamps may overshoot the song end by
/// up to 10 s, like real analyzers sometimes do.
class SyntheticAnalyzerClient final : public AnalyzerClient {
 public:
  explicit SyntheticAnalyzerClient(AnalyzerRole role, std::uint64_t seed = 0)
      : role_(role), seed_(seed) {}
  AnalyzerRole role() const override { return role_; }
  nlohmann::json analyze(const AnalysisRequest& request) const override;

 private:
  AnalyzerRole role_;
  std::uint64_t seed_;
};

/// Always unreachable; used for fault injection.
class UnavailableAnalyzerClient final : public AnalyzerClient {
 public:
  explicit UnavailableAnalyzerClient(AnalyzerRole role) : role_(role) {}
  AnalyzerRole role() const override { return role_; }
  nlohmann::json analyze(const AnalysisRequest& request) const override;

 private:
  AnalyzerRole role_;
};

/// POST <base_url>/analyze/<role> with {song_id, audio_locator, duration_frames}.
class HttpAnalyzerClient final : public AnalyzerClient {
 public:
  HttpAnalyzerClient(AnalyzerRole role, std::string base_url)
      : role_(role), endpoint_(std::move(base_url)) {}
  AnalyzerRole role() const override { return role_; }
  nlohmann::json analyze(const AnalysisRequest& request) const override;

 private:
  AnalyzerRole role_;
  JsonHttpEndpoint endpoint_;
};

AnalyzerSet fixture_analyzers(const std::filesystem::path& song_dir);
AnalyzerSet synthetic_analyzers(std::uint64_t seed = 0);

/// Song metadata of a fixture directory: the `metadata` block of its
/// context.json, minus vocal_stem_ref (that comes from the separator).
SongMetadata load_song_metadata(const std::filesystem::path& song_dir);

}  // namespace mvforge

#endif  // MVFORGE_INGEST_HPP_
