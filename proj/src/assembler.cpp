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

#include "mvforge/assembler.hpp"

#include <algorithm>

#include "mvforge/errors.hpp"

namespace mvforge {
namespace {

using nlohmann::json;

bool has_space(std::string_view s) {
  return std::any_of(s.begin(), s.end(),
                     [](unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; });
}

}  // namespace

std::vector<const ManifestEntry*> AssemblyManifest::gaps() const {
  std::vector<const ManifestEntry*> out;
  for (const auto& e : entries) {
    if (e.kind == ManifestEntry::Kind::kGap) out.push_back(&e);
  }
  return out;
}

AssemblyManifest assemble(const ShotPlan& plan, const std::map<std::string, Selection>& selections,
                          const AudioRecord& audio) {
  AssemblyManifest m;
  m.song_id = plan.song_id;
  m.audio = audio;
  m.total = plan.duration;
  for (const auto& sc : plan.subclips) {
    ManifestEntry e;
    e.subclip_id = sc.subclip_id;
    e.span = sc.span;
    auto it = selections.find(sc.subclip_id);
    if (it == selections.end() || !it->second.clip) {
      e.kind = ManifestEntry::Kind::kGap;
      e.failure = it == selections.end() ? "no selection" : it->second.failure;
      if (e.failure.empty()) e.failure = "failed";
    } else {
      const auto& clip = *it->second.clip;
      if (clip.duration.frames() != sc.span.duration_frames()) {
        throw AssemblyError("clip " + clip.candidate_id + " for " + sc.subclip_id + " is " +
                            std::to_string(clip.duration.frames()) + " frames, planned " +
                            std::to_string(sc.span.duration_frames()));
      }
      e.candidate_id = clip.candidate_id;
      e.artifact = clip.artifact;
      e.backend = clip.backend;
      e.fallback_accepted = it->second.fallback_accepted;
      e.human_override = it->second.human_override;
    }
    m.entries.push_back(std::move(e));
  }

  std::int64_t cursor = 0;
  for (const auto& e : m.entries) {
    if (e.span.start().frames() != cursor) {
      throw InternalError("manifest entry " + e.subclip_id + " starts at " +
                          std::to_string(e.span.start().frames()) + ", expected " +
                          std::to_string(cursor));
    }
    cursor = e.span.end().frames();
  }
  if (cursor != m.total.frames()) {
    throw InternalError("manifest covers " + std::to_string(cursor) + " of " +
                        std::to_string(m.total.frames()) + " frames");
  }
  return m;
}

json manifest_to_json(const AssemblyManifest& m) {
  json entries = json::array();
  for (const auto& e : m.entries) {
    if (e.kind == ManifestEntry::Kind::kGap) {
      entries.push_back({{"kind", "gap"},
                         {"subclip_id", e.subclip_id},
                         {"span", span_to_json(e.span)},
                         {"failure", e.failure}});
    } else {
      entries.push_back({{"kind", "clip"},
                         {"subclip_id", e.subclip_id},
                         {"span", span_to_json(e.span)},
                         {"candidate_id", e.candidate_id},
                         {"artifact", e.artifact},
                         {"backend", to_string(e.backend)},
                         {"fallback_accepted", e.fallback_accepted},
                         {"human_override", e.human_override}});
    }
  }
  return {{"manifest_schema", kManifestSchemaVersion},
          {"fps", kFramesPerSecond},
          {"song_id", m.song_id},
          {"total", m.total.frames()},
          {"audio", audio_record_to_json(m.audio)},
          {"entries", std::move(entries)}};
}

AssemblyManifest manifest_from_json(const json& j) {
  reject_unknown_keys(j, {"manifest_schema", "fps", "song_id", "total", "audio", "entries"},
                      "manifest");
  try {
    if (j.at("manifest_schema").get<int>() != kManifestSchemaVersion) {
      throw ValidationError("unsupported manifest_schema " + j.at("manifest_schema").dump());
    }
    if (j.at("fps").get<std::int64_t>() != kFramesPerSecond) {
      throw ValidationError("manifest fps must be " + std::to_string(kFramesPerSecond));
    }
    AssemblyManifest m;
    m.song_id = j.at("song_id").get<std::string>();
    m.total = FrameTime(j.at("total").get<std::int64_t>());
    m.audio = audio_record_from_json(j.at("audio"));
    for (const auto& ej : j.at("entries")) {
      ManifestEntry e;
      const auto kind = ej.at("kind").get<std::string>();
      e.subclip_id = ej.at("subclip_id").get<std::string>();
      e.span = span_from_json(ej.at("span"), "manifest.entries.span");
      if (kind == "gap") {
        reject_unknown_keys(ej, {"kind", "subclip_id", "span", "failure"}, "gap entry");
        e.kind = ManifestEntry::Kind::kGap;
        e.failure = ej.at("failure").get<std::string>();
      } else if (kind == "clip") {
        reject_unknown_keys(ej,
                            {"kind", "subclip_id", "span", "candidate_id", "artifact", "backend",
                             "fallback_accepted", "human_override"},
                            "clip entry");
        e.candidate_id = ej.at("candidate_id").get<std::string>();
        e.artifact = ej.at("artifact").get<std::string>();
        e.backend = parse_backend_kind(ej.at("backend").get<std::string>());
        e.fallback_accepted = ej.at("fallback_accepted").get<bool>();
        e.human_override = ej.at("human_override").get<bool>();
      } else {
        throw ValidationError("unknown manifest entry kind '" + kind + "'");
      }
      m.entries.push_back(std::move(e));
    }
    return m;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("manifest: ") + e.what());
  }
}

std::string export_concat_list(const AssemblyManifest& m) {
  if (const auto gaps = m.gaps(); !gaps.empty()) {
    std::string msg = "manifest has " + std::to_string(gaps.size()) + " gap(s):";
    for (const auto* g : gaps) {
      msg += " " + g->subclip_id + " [" + std::to_string(g->span.start().frames()) + ", " +
             std::to_string(g->span.end().frames()) + ")";
    }
    throw AssemblyError(msg);
  }
  std::string out;
  for (const auto& e : m.entries) {
    if (e.artifact.empty() || has_space(e.artifact)) {
      throw AssemblyError("locator of " + e.subclip_id + " is empty or contains whitespace");
    }
    out += "clip " + e.artifact + " " + std::to_string(e.span.start().frames()) + " " +
           std::to_string(e.span.end().frames()) + "\n";
  }
  if (m.audio.mix_audio_ref.empty() || has_space(m.audio.mix_audio_ref)) {
    throw AssemblyError("audio locator is empty or contains whitespace");
  }
  out += "audio " + m.audio.mix_audio_ref + " 0 " + std::to_string(m.total.frames()) + "\n";
  return out;
}

}  // namespace mvforge
