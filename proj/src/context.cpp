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

#include "mvforge/context.hpp"

#include <algorithm>
#include <array>

#include "mvforge/errors.hpp"

namespace mvforge {
namespace {

using nlohmann::json;

constexpr std::array<std::pair<SectionLabel, std::string_view>, 6> kLabelNames{{
    {SectionLabel::kIntro, "intro"},
    {SectionLabel::kVerse, "verse"},
    {SectionLabel::kChorus, "chorus"},
    {SectionLabel::kBridge, "bridge"},
    {SectionLabel::kInstrumental, "instrumental"},
    {SectionLabel::kOutro, "outro"},
}};

std::string indexed(std::string_view field, std::size_t i) {
  return std::string(field) + "[" + std::to_string(i) + "]";
}

std::string span_text(const FrameSpan& s) {
  return "[" + std::to_string(s.start().frames()) + ", " + std::to_string(s.end().frames()) + ")";
}

template <typename T>
T require(const json& j, std::string_view key, std::string_view where) {
  const auto it = j.find(key);
  if (it == j.end()) {
    throw ValidationError(std::string(where) + ": missing key '" + std::string(key) + "'");
  }
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string(where) + "." + std::string(key) + ": " + e.what());
  }
}

const json& member(const json& j, std::string_view key, std::string_view where) {
  const auto it = j.find(key);
  if (it == j.end()) {
    throw ValidationError(std::string(where) + ": missing key '" + std::string(key) + "'");
  }
  return *it;
}

std::int64_t require_frames(const json& j, std::string_view key, std::string_view where) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_number_integer()) {
    throw ValidationError(std::string(where) + "." + std::string(key) +
                          ": expected integer frame count");
  }
  const auto v = it->get<std::int64_t>();
  if (v < 0) {
    throw ValidationError(std::string(where) + "." + std::string(key) + ": negative frame count");
  }
  return v;
}

}  // namespace

std::string_view to_string(SectionLabel label) {
  for (const auto& [l, name] : kLabelNames) {
    if (l == label) return name;
  }
  return "instrumental";
}

SectionLabel parse_section_label(std::string_view name) {
  for (const auto& [l, n] : kLabelNames) {
    if (n == name) return l;
  }
  throw ValidationError("unknown section label '" + std::string(name) + "'");
}

std::vector<Violation> validate_context(const MusicContext& ctx) {
  std::vector<Violation> out;
  const auto& md = ctx.metadata;
  const std::int64_t duration = md.duration.frames();

  if (md.song_id.empty()) out.push_back({"metadata.song_id", "must be non-empty"});
  if (duration <= 0) out.push_back({"metadata.duration", "must be > 0 frames"});
  if (md.sample_rate <= 0) out.push_back({"metadata.sample_rate", "must be positive"});

  for (const auto& [key, value] : ctx.caption.vocalist_attributes) {
    const bool known = std::find(std::begin(kVocalistAttributeKeys), std::end(kVocalistAttributeKeys),
                                 key) != std::end(kVocalistAttributeKeys);
    if (!known) {
      out.push_back({"caption.vocalist_attributes." + key, "key not in the documented set"});
    }
  }

  const auto& segs = ctx.structure;
  if (segs.empty()) {
    out.push_back({"structure", "must cover [0, duration) but is empty"});
  } else {
    if (segs.front().span.start().frames() != 0) {
      out.push_back({indexed("structure", 0), "first segment must start at frame 0"});
    }
    for (std::size_t i = 1; i < segs.size(); ++i) {
      const auto prev_end = segs[i - 1].span.end();
      const auto start = segs[i].span.start();
      if (start < prev_end) {
        out.push_back({indexed("structure", i), "overlaps " + indexed("structure", i - 1) + " (" +
                                                    span_text(segs[i - 1].span) + " vs " +
                                                    span_text(segs[i].span) + ")"});
      } else if (start > prev_end) {
        out.push_back({indexed("structure", i), "gap after " + indexed("structure", i - 1) +
                                                    " at frames [" +
                                                    std::to_string(prev_end.frames()) + ", " +
                                                    std::to_string(start.frames()) + ")"});
      }
    }
    if (segs.back().span.end().frames() != duration) {
      out.push_back({indexed("structure", segs.size() - 1),
                     "last segment must end at song duration " + std::to_string(duration)});
    }
  }

  for (std::size_t i = 0; i < ctx.lyrics.size(); ++i) {
    const auto& line = ctx.lyrics[i];
    const std::string field = indexed("lyrics", i);
    if (line.span.end().frames() > duration) {
      out.push_back({field, "span " + span_text(line.span) + " extends past song duration " +
                                std::to_string(duration)});
    }
    if (!(line.confidence >= 0.0 && line.confidence <= 1.0)) {
      out.push_back({field, "confidence outside [0, 1]"});
    }
    if (line.text.empty()) out.push_back({field, "text must be non-empty"});
    if (i > 0) {
      const auto& prev = ctx.lyrics[i - 1];
      if (line.span.start() < prev.span.start()) {
        out.push_back({field, "not sorted by start"});
      } else if (line.span.start() < prev.span.end()) {
        out.push_back({field, "overlaps " + indexed("lyrics", i - 1)});
      }
    }
  }

  if (ctx.beat_grid) {
    for (std::size_t i = 0; i < ctx.beat_grid->size(); ++i) {
      const auto b = (*ctx.beat_grid)[i];
      if (b.frames() >= duration) out.push_back({indexed("beats", i), "beat at or past song end"});
      if (i > 0 && b < (*ctx.beat_grid)[i - 1]) out.push_back({indexed("beats", i), "not sorted"});
    }
  }
  return out;
}

void reject_unknown_keys(const json& j, std::initializer_list<std::string_view> allowed,
                         std::string_view where) {
  if (!j.is_object()) throw ValidationError(std::string(where) + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ValidationError(std::string(where) + ": unknown key '" + key + "'");
    }
  }
}

json span_to_json(const FrameSpan& span) {
  return json{{"start", span.start().frames()}, {"end", span.end().frames()}};
}

FrameSpan span_from_json(const json& j, std::string_view where) {
  reject_unknown_keys(j, {"start", "end"}, where);
  const auto s = require_frames(j, "start", where);
  const auto e = require_frames(j, "end", where);
  if (s >= e) {
    throw ValidationError(std::string(where) + ": span start " + std::to_string(s) +
                          " not before end " + std::to_string(e));
  }
  return FrameSpan(s, e);
}

json context_to_json(const MusicContext& ctx) {
  const auto& md = ctx.metadata;
  json metadata{{"song_id", md.song_id},
                {"duration", md.duration.frames()},
                {"sample_rate", md.sample_rate},
                {"language_tag", md.language_tag},
                {"mix_audio_ref", md.mix_audio_ref}};
  if (md.vocal_stem_ref) metadata["vocal_stem_ref"] = *md.vocal_stem_ref;

  json caption{{"genre", ctx.caption.genre},
               {"mood", ctx.caption.mood},
               {"instrumentation", ctx.caption.instrumentation},
               {"vocalist_attributes", ctx.caption.vocalist_attributes}};

  json structure = json::array();
  for (const auto& s : ctx.structure) {
    structure.push_back({{"label", to_string(s.label)}, {"span", span_to_json(s.span)}});
  }
  json lyrics = json::array();
  for (const auto& l : ctx.lyrics) {
    lyrics.push_back(
        {{"text", l.text}, {"span", span_to_json(l.span)}, {"confidence", l.confidence}});
  }

  json out{{"fps", kFramesPerSecond},
           {"metadata", std::move(metadata)},
           {"caption", std::move(caption)},
           {"structure", std::move(structure)},
           {"lyrics", std::move(lyrics)}};
  if (ctx.beat_grid) {
    json beats = json::array();
    for (const auto b : *ctx.beat_grid) beats.push_back(b.frames());
    out["beats"] = std::move(beats);
  }
  return out;
}

MusicContext context_from_json(const json& j) {
  reject_unknown_keys(j, {"fps", "metadata", "caption", "structure", "lyrics", "beats"}, "context");
  const auto fps = require<std::int64_t>(j, "fps", "context");
  if (fps != kFramesPerSecond) {
    throw ValidationError("context.fps must be " + std::to_string(kFramesPerSecond) + ", got " +
                          std::to_string(fps));
  }

  MusicContext ctx;
  const auto& mj = member(j, "metadata", "context");
  reject_unknown_keys(mj, {"song_id", "duration", "sample_rate", "language_tag", "mix_audio_ref",
                           "vocal_stem_ref"},
                      "metadata");
  ctx.metadata.song_id = require<std::string>(mj, "song_id", "metadata");
  ctx.metadata.duration = FrameTime(require_frames(mj, "duration", "metadata"));
  ctx.metadata.sample_rate = require<int>(mj, "sample_rate", "metadata");
  ctx.metadata.language_tag = require<std::string>(mj, "language_tag", "metadata");
  ctx.metadata.mix_audio_ref = require<std::string>(mj, "mix_audio_ref", "metadata");
  if (mj.contains("vocal_stem_ref") && !mj.at("vocal_stem_ref").is_null()) {
    ctx.metadata.vocal_stem_ref = require<std::string>(mj, "vocal_stem_ref", "metadata");
  }

  const auto& cj = member(j, "caption", "context");
  reject_unknown_keys(cj, {"genre", "mood", "instrumentation", "vocalist_attributes"}, "caption");
  ctx.caption.genre = require<std::string>(cj, "genre", "caption");
  ctx.caption.mood = require<std::string>(cj, "mood", "caption");
  ctx.caption.instrumentation = require<std::vector<std::string>>(cj, "instrumentation", "caption");
  ctx.caption.vocalist_attributes =
      require<std::map<std::string, std::string>>(cj, "vocalist_attributes", "caption");

  std::size_t i = 0;
  for (const auto& sj : member(j, "structure", "context")) {
    const std::string where = indexed("structure", i++);
    reject_unknown_keys(sj, {"label", "span"}, where);
    ctx.structure.push_back({parse_section_label(require<std::string>(sj, "label", where)),
                             span_from_json(member(sj, "span", where), where + ".span")});
  }

  i = 0;
  for (const auto& lj : member(j, "lyrics", "context")) {
    const std::string where = indexed("lyrics", i++);
    reject_unknown_keys(lj, {"text", "span", "confidence"}, where);
    ctx.lyrics.push_back({require<std::string>(lj, "text", where),
                          span_from_json(member(lj, "span", where), where + ".span"),
                          require<double>(lj, "confidence", where)});
  }

  if (j.contains("beats")) {
    std::vector<FrameTime> beats;
    for (const auto& b : j.at("beats")) {
      if (!b.is_number_integer() || b.get<std::int64_t>() < 0) {
        throw ValidationError("beats: expected non-negative integer frames");
      }
      beats.emplace_back(b.get<std::int64_t>());
    }
    ctx.beat_grid = std::move(beats);
  }
  return ctx;
}

}  // namespace mvforge
