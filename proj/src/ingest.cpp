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

#include "mvforge/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <random>

#include "mvforge/errors.hpp"
#include "mvforge/util.hpp"

namespace mvforge {
namespace {

using nlohmann::json;

struct Piece {
  std::int64_t start;
  std::int64_t end;
  std::size_t order;  // input position, for a stable tie-break
};

// Sorted by (start, end, input order); overlapping predecessors get their
// end cut back to the successor's start and vanish if that empties them.
template <typename T>
std::vector<T> resolve_overlaps(std::vector<T> items) {
  std::stable_sort(items.begin(), items.end(), [](const T& a, const T& b) {
    if (a.piece.start != b.piece.start) return a.piece.start < b.piece.start;
    return a.piece.end < b.piece.end;
  });
  std::vector<T> out;
  out.reserve(items.size());
  for (auto& item : items) {
    while (!out.empty() && out.back().piece.end > item.piece.start) {
      out.back().piece.end = item.piece.start;
      if (out.back().piece.end <= out.back().piece.start) {
        out.pop_back();
      } else {
        break;
      }
    }
    out.push_back(std::move(item));
  }
  return out;
}

struct LabeledPiece {
  Piece piece;
  SectionLabel label;
};

struct TextPiece {
  Piece piece;
  std::string text;
  double confidence;
};

double unit_from(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * unit_from(rng); }

template <typename T>
T get_field(const json& j, const char* key, std::string_view what) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw PermanentClientError("malformed " + std::string(what) + " payload: " + e.what());
  }
}

void require_object(const json& j, std::string_view what) {
  if (!j.is_object()) throw PermanentClientError("malformed " + std::string(what) + " payload");
}

}  // namespace

std::string_view to_string(AnalyzerRole role) {
  switch (role) {
    case AnalyzerRole::kCaptioner:
      return "captioner";
    case AnalyzerRole::kStructureAnalyzer:
      return "structure_analyzer";
    case AnalyzerRole::kSourceSeparator:
      return "source_separator";
    case AnalyzerRole::kLyricsTranscriber:
      return "lyrics_transcriber";
  }
  return "captioner";
}

AnalyzerRole parse_analyzer_role(std::string_view name) {
  for (const auto r : kAllAnalyzerRoles) {
    if (to_string(r) == name) return r;
  }
  throw ValidationError("unknown analyzer role '" + std::string(name) + "'");
}

MusicCaption decode_caption(const json& j) {
  require_object(j, "caption");
  MusicCaption c;
  c.genre = get_field<std::string>(j, "genre", "caption");
  c.mood = get_field<std::string>(j, "mood", "caption");
  c.instrumentation = get_field<std::vector<std::string>>(j, "instrumentation", "caption");
  if (j.contains("vocalist_attributes")) {
    c.vocalist_attributes =
        get_field<std::map<std::string, std::string>>(j, "vocalist_attributes", "caption");
  }
  return c;
}

std::vector<RawSegment> decode_structure(const json& j) {
  require_object(j, "structure");
  std::vector<RawSegment> out;
  const auto& segs = j.find("segments");
  if (segs == j.end() || !segs->is_array()) {
    throw PermanentClientError("malformed structure payload: missing 'segments' array");
  }
  for (const auto& s : *segs) {
    RawSegment r{get_field<double>(s, "start", "structure"), get_field<double>(s, "end", "structure"),
                 get_field<std::string>(s, "label", "structure")};
    if (!std::isfinite(r.start) || !std::isfinite(r.end) || r.start < 0 || r.end < 0) {
      throw PermanentClientError("structure payload has a non-finite or negative timestamp");
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<RawLyric> decode_lyrics(const json& j) {
  require_object(j, "lyrics");
  std::vector<RawLyric> out;
  const auto& lines = j.find("lines");
  if (lines == j.end() || !lines->is_array()) {
    throw PermanentClientError("malformed lyrics payload: missing 'lines' array");
  }
  for (const auto& l : *lines) {
    RawLyric r{get_field<std::string>(l, "text", "lyrics"), get_field<double>(l, "start", "lyrics"),
               get_field<double>(l, "end", "lyrics"),
               l.contains("confidence") ? get_field<double>(l, "confidence", "lyrics") : 1.0};
    if (!std::isfinite(r.start) || !std::isfinite(r.end) || r.start < 0 || r.end < 0) {
      throw PermanentClientError("lyrics payload has a non-finite or negative timestamp");
    }
    out.push_back(std::move(r));
  }
  return out;
}

StemRefs decode_stems(const json& j) {
  require_object(j, "stems");
  return {get_field<std::string>(j, "vocals", "stems"),
          get_field<std::string>(j, "accompaniment", "stems")};
}

json bundle_to_json(const RawAnalysisBundle& b) {
  json out{{"song_id", b.song_id}};
  if (b.caption) {
    out["caption"] = {{"genre", b.caption->genre},
                      {"mood", b.caption->mood},
                      {"instrumentation", b.caption->instrumentation},
                      {"vocalist_attributes", b.caption->vocalist_attributes}};
  }
  if (b.structure) {
    json segs = json::array();
    for (const auto& s : *b.structure) {
      segs.push_back({{"start", s.start}, {"end", s.end}, {"label", s.label}});
    }
    out["structure"] = {{"segments", std::move(segs)}};
  }
  if (b.lyrics) {
    json lines = json::array();
    for (const auto& l : *b.lyrics) {
      lines.push_back(
          {{"text", l.text}, {"start", l.start}, {"end", l.end}, {"confidence", l.confidence}});
    }
    out["lyrics"] = {{"lines", std::move(lines)}};
  }
  if (b.stems) {
    out["stems"] = {{"vocals", b.stems->vocals}, {"accompaniment", b.stems->accompaniment}};
  }
  json failures = json::object();
  for (const auto& [role, f] : b.failures) {
    failures[std::string(to_string(role))] = {
        {"retriable", f.retriable}, {"message", f.message}, {"attempts", f.attempts}};
  }
  out["failures"] = std::move(failures);
  return out;
}

RawAnalysisBundle fetch_analysis(const SongMetadata& song, const AnalyzerSet& clients,
                                 const FetchOptions& options) {
  const AnalysisRequest request{song.song_id, song.mix_audio_ref, song.duration.frames()};

  struct Outcome {
    std::optional<json> payload;
    std::optional<RoleFailure> failure;
  };
  auto call = [&](const AnalyzerClient& client,
                  const std::function<void(const json&)>& decode) -> Outcome {
    Outcome out;
    int attempts = 0;
    try {
      json payload =
          with_retries(options.retry, [&] { return client.analyze(request); }, &attempts);
      decode(payload);  // surface malformed payloads as permanent failures
      out.payload = std::move(payload);
    } catch (const TransientClientError& e) {
      out.failure = RoleFailure{true, e.what(), attempts};
    } catch (const std::exception& e) {
      out.failure = RoleFailure{false, e.what(), attempts};
    }
    return out;
  };

  auto client_for = [&](AnalyzerRole role) -> const AnalyzerClient* {
    const AnalyzerClient* c = nullptr;
    switch (role) {
      case AnalyzerRole::kCaptioner:
        c = clients.captioner.get();
        break;
      case AnalyzerRole::kStructureAnalyzer:
        c = clients.structure.get();
        break;
      case AnalyzerRole::kSourceSeparator:
        c = clients.separator.get();
        break;
      case AnalyzerRole::kLyricsTranscriber:
        c = clients.lyrics.get();
        break;
    }
    if (c != nullptr && c->role() != role) {
      throw ConfigError("client configured for " + std::string(to_string(role)) + " reports role " +
                        std::string(to_string(c->role())));
    }
    return c;
  };

  RawAnalysisBundle bundle;
  bundle.song_id = song.song_id;
  std::map<AnalyzerRole, std::future<Outcome>> pending;
  for (const auto role : kAllAnalyzerRoles) {
    if (options.skip.count(role) != 0) continue;
    const AnalyzerClient* client = client_for(role);
    if (client == nullptr) {
      throw ConfigError("no analyzer client configured for role " + std::string(to_string(role)));
    }
    std::function<void(const json&)> decode;
    switch (role) {
      case AnalyzerRole::kCaptioner:
        decode = [](const json& j) { decode_caption(j); };
        break;
      case AnalyzerRole::kStructureAnalyzer:
        decode = [](const json& j) { decode_structure(j); };
        break;
      case AnalyzerRole::kSourceSeparator:
        decode = [](const json& j) { decode_stems(j); };
        break;
      case AnalyzerRole::kLyricsTranscriber:
        decode = [](const json& j) { decode_lyrics(j); };
        break;
    }
    pending.emplace(role, std::async(std::launch::async, call, std::cref(*client), decode));
  }

  for (auto& [role, fut] : pending) {
    Outcome o = fut.get();
    if (o.failure) {
      bundle.failures.emplace(role, *o.failure);
      continue;
    }
    const json& p = *o.payload;
    switch (role) {
      case AnalyzerRole::kCaptioner:
        bundle.caption = decode_caption(p);
        break;
      case AnalyzerRole::kStructureAnalyzer:
        bundle.structure = decode_structure(p);
        break;
      case AnalyzerRole::kSourceSeparator:
        bundle.stems = decode_stems(p);
        break;
      case AnalyzerRole::kLyricsTranscriber:
        bundle.lyrics = decode_lyrics(p);
        break;
    }
  }
  return bundle;
}

SectionLabel map_raw_label(std::string_view raw_label) {
  std::string key;
  for (const char c : to_lower(trim(raw_label))) {
    if (c != '-' && c != '_' && c != ' ') key.push_back(c);
  }
  if (key == "intro") return SectionLabel::kIntro;
  if (key == "verse" || key == "prechorus") return SectionLabel::kVerse;
  if (key == "chorus" || key == "postchorus" || key == "refrain" || key == "hook") {
    return SectionLabel::kChorus;
  }
  if (key == "bridge") return SectionLabel::kBridge;
  if (key == "outro" || key == "ending") return SectionLabel::kOutro;
  return SectionLabel::kInstrumental;
}

std::vector<StructureSegment> normalize_structure(const std::vector<RawSegment>& raw,
                                                  FrameTime duration) {
  const std::int64_t total = duration.frames();
  if (total <= 0) throw DomainError("song duration must be positive");

  std::vector<LabeledPiece> pieces;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto& r = raw[i];
    if (!std::isfinite(r.start) || !std::isfinite(r.end) || r.start < 0 || r.end < 0) continue;
    const std::int64_t s = quantize(r.start).frames();
    const std::int64_t e = std::min(quantize(r.end).frames(), total);
    if (s >= e) continue;
    pieces.push_back({{s, e, i}, map_raw_label(r.label)});
  }
  pieces = resolve_overlaps(std::move(pieces));

  std::vector<StructureSegment> out;
  std::int64_t cursor = 0;
  for (const auto& p : pieces) {
    if (p.piece.start > cursor) {
      out.push_back({SectionLabel::kInstrumental, FrameSpan(cursor, p.piece.start)});
    }
    out.push_back({p.label, FrameSpan(p.piece.start, p.piece.end)});
    cursor = p.piece.end;
  }
  if (cursor < total) out.push_back({SectionLabel::kInstrumental, FrameSpan(cursor, total)});
  return out;
}

std::vector<LyricLine> reconcile_lyrics(const std::vector<RawLyric>& raw, FrameTime duration,
                                        double min_confidence) {
  const std::int64_t total = duration.frames();
  std::vector<TextPiece> pieces;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto& r = raw[i];
    if (!(r.confidence >= min_confidence)) continue;
    std::string text = trim(r.text);
    if (text.empty()) continue;
    if (!std::isfinite(r.start) || !std::isfinite(r.end) || r.start < 0 || r.end < 0) continue;
    const std::int64_t s = quantize(r.start).frames();
    const std::int64_t e = std::min(quantize(r.end).frames(), total);
    if (s >= e) continue;
    pieces.push_back({{s, e, i}, std::move(text), std::clamp(r.confidence, 0.0, 1.0)});
  }
  pieces = resolve_overlaps(std::move(pieces));

  std::vector<LyricLine> out;
  out.reserve(pieces.size());
  for (auto& p : pieces) {
    out.push_back({std::move(p.text), FrameSpan(p.piece.start, p.piece.end), p.confidence});
  }
  return out;
}

std::vector<LyricLine> reconcile_lyrics(const std::vector<LyricLine>& lines, FrameTime duration,
                                        double min_confidence) {
  std::vector<RawLyric> raw;
  raw.reserve(lines.size());
  for (const auto& l : lines) {
    raw.push_back({l.text, l.span.start().seconds(), l.span.end().seconds(), l.confidence});
  }
  return reconcile_lyrics(raw, duration, min_confidence);
}

NormalizedContext normalize_bundle(const RawAnalysisBundle& bundle, const SongMetadata& song) {
  NormalizedContext out;
  MusicContext& ctx = out.context;
  ctx.metadata = song;

  for (const auto& [role, f] : bundle.failures) {
    out.warnings.push_back(std::string(to_string(role)) + " failed after " +
                           std::to_string(f.attempts) + " attempt(s): " + f.message);
  }

  if (bundle.caption) {
    ctx.caption = *bundle.caption;
    for (auto it = ctx.caption.vocalist_attributes.begin();
         it != ctx.caption.vocalist_attributes.end();) {
      const bool known =
          std::find(std::begin(kVocalistAttributeKeys), std::end(kVocalistAttributeKeys),
                    it->first) != std::end(kVocalistAttributeKeys);
      if (known) {
        ++it;
      } else {
        out.warnings.push_back("dropped unknown vocalist attribute '" + it->first + "'");
        it = ctx.caption.vocalist_attributes.erase(it);
      }
    }
  }

  ctx.structure = normalize_structure(bundle.structure.value_or(std::vector<RawSegment>{}),
                                      song.duration);
  if (bundle.lyrics) {
    ctx.lyrics = reconcile_lyrics(*bundle.lyrics, song.duration);
  } else {
    out.warnings.push_back("no lyrics available; planning falls back to structure only");
  }
  if (bundle.stems) ctx.metadata.vocal_stem_ref = bundle.stems->vocals;
  return out;
}

// ---- backends ------------------------------------------------------------

FixtureAnalyzerClient::FixtureAnalyzerClient(AnalyzerRole role, std::filesystem::path song_dir)
    : role_(role), song_dir_(std::move(song_dir)) {}

json FixtureAnalyzerClient::analyze(const AnalysisRequest& request) const {
  (void)request;
  const auto path = song_dir_ / "raw" / (std::string(to_string(role_)) + ".json");
  std::string text;
  try {
    text = read_file(path);
  } catch (const NotFoundError& e) {
    throw TransientClientError(std::string("fixture analyzer unavailable: ") + e.what());
  }
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw PermanentClientError("fixture " + path.string() + " is not JSON: " + e.what());
  }
}

json SyntheticAnalyzerClient::analyze(const AnalysisRequest& request) const {
  std::mt19937_64 rng(hash_fields({request.song_id, to_string(role_)}, seed_));
  const double duration = static_cast<double>(request.duration_frames) / kFramesPerSecond;
  static constexpr const char* kGenres[] = {"pop", "rock", "ballad", "hip-hop", "folk", "electronic"};
  static constexpr const char* kMoods[] = {"wistful", "euphoric", "tense", "tender", "defiant"};
  static constexpr const char* kLabels[] = {"intro",  "verse",  "chorus", "verse",
                                            "chorus", "bridge", "chorus", "outro"};
  switch (role_) {
    case AnalyzerRole::kCaptioner:
      return {{"genre", kGenres[rng() % 6]},
              {"mood", kMoods[rng() % 5]},
              {"instrumentation", {"vocals", "drums", rng() % 2 ? "piano" : "synth"}},
              {"vocalist_attributes",
               {{"gender", rng() % 2 ? "female" : "male"}, {"count", rng() % 3 == 0 ? "2" : "1"}}}};
    case AnalyzerRole::kStructureAnalyzer: {
      json segs = json::array();
      double t = 0.0;
      std::size_t k = 0;
      while (t < duration) {
        double len = uniform(rng, 8.0, 40.0);
        double end = t + len;
        if (end >= duration) end = duration + uniform(rng, 0.0, 10.0);
        const double start = (k > 0 && rng() % 4 == 0) ? std::max(0.0, t - uniform(rng, 0.0, 1.5)) : t;
        segs.push_back({{"start", start}, {"end", end}, {"label", kLabels[std::min<std::size_t>(k, 7)]}});
        t = end;
        ++k;
      }
      return {{"segments", std::move(segs)}};
    }
    case AnalyzerRole::kLyricsTranscriber: {
      json lines = json::array();
      double t = uniform(rng, 2.0, 12.0);
      int n = 0;
      while (t < duration + 2.0) {
        const double len = uniform(rng, 1.5, 6.0);
        const double start = t - ((rng() % 5 == 0) ? uniform(rng, 0.0, 0.5) : 0.0);
        lines.push_back({{"text", "synthetic line " + std::to_string(++n)},
                         {"start", std::max(0.0, start)},
                         {"end", t + len},
                         {"confidence", uniform(rng, 0.1, 1.0)}});
        t += len + uniform(rng, 0.0, 4.0);
      }
      return {{"lines", std::move(lines)}};
    }
    case AnalyzerRole::kSourceSeparator:
      return {{"vocals", "synthetic://" + request.song_id + "/vocals.wav"},
              {"accompaniment", "synthetic://" + request.song_id + "/accompaniment.wav"}};
  }
  return json::object();
}

json UnavailableAnalyzerClient::analyze(const AnalysisRequest& request) const {
  throw TransientClientError(std::string(to_string(role_)) + " unreachable for " + request.song_id);
}

json HttpAnalyzerClient::analyze(const AnalysisRequest& request) const {
  return endpoint_.post("/analyze/" + std::string(to_string(role_)),
                        {{"song_id", request.song_id},
                         {"audio_locator", request.audio_locator},
                         {"duration_frames", request.duration_frames}});
}

AnalyzerSet fixture_analyzers(const std::filesystem::path& song_dir) {
  return {std::make_shared<FixtureAnalyzerClient>(AnalyzerRole::kCaptioner, song_dir),
          std::make_shared<FixtureAnalyzerClient>(AnalyzerRole::kStructureAnalyzer, song_dir),
          std::make_shared<FixtureAnalyzerClient>(AnalyzerRole::kSourceSeparator, song_dir),
          std::make_shared<FixtureAnalyzerClient>(AnalyzerRole::kLyricsTranscriber, song_dir)};
}

AnalyzerSet synthetic_analyzers(std::uint64_t seed) {
  return {std::make_shared<SyntheticAnalyzerClient>(AnalyzerRole::kCaptioner, seed),
          std::make_shared<SyntheticAnalyzerClient>(AnalyzerRole::kStructureAnalyzer, seed),
          std::make_shared<SyntheticAnalyzerClient>(AnalyzerRole::kSourceSeparator, seed),
          std::make_shared<SyntheticAnalyzerClient>(AnalyzerRole::kLyricsTranscriber, seed)};
}

SongMetadata load_song_metadata(const std::filesystem::path& song_dir) {
  json j;
  try {
    j = json::parse(read_file(song_dir / "context.json"));
  } catch (const json::exception& e) {
    throw ValidationError((song_dir / "context.json").string() + ": " + e.what());
  }
  SongMetadata md = context_from_json(j).metadata;
  md.vocal_stem_ref.reset();
  return md;
}

}  // namespace mvforge
