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

#include "mvforge/generation.hpp"

#include <algorithm>
#include <set>

#include "mvforge/errors.hpp"
#include "mvforge/util.hpp"

namespace mvforge {
namespace {

using nlohmann::json;

// Stub files live beside the job; locators are relative so manifests do
// not depend on where the job directory sits.
void write_stub(const std::filesystem::path& dir, const std::string& locator, const json& body) {
  if (dir.empty()) return;
  const auto name = std::filesystem::path(locator).filename();
  std::filesystem::create_directories(dir);
  write_file_atomic(dir / name, body.dump(2) + "\n");
}

std::string seed_text(std::uint64_t seed) { return hex64(seed); }

}  // namespace

std::string_view to_string(BackendKind kind) {
  return kind == BackendKind::kLipSync ? "lip_sync" : "general_render";
}

BackendKind parse_backend_kind(std::string_view name) {
  if (name == "general_render") return BackendKind::kGeneralRender;
  if (name == "lip_sync") return BackendKind::kLipSync;
  throw ValidationError("unknown backend '" + std::string(name) + "'");
}

std::string_view to_string(JobState state) {
  switch (state) {
    case JobState::kPending: return "pending";
    case JobState::kBlocked: return "blocked";
    case JobState::kRunning: return "running";
    case JobState::kDone: return "done";
    case JobState::kFailed: return "failed";
  }
  return "pending";
}

JobState parse_job_state(std::string_view name) {
  for (auto s : {JobState::kPending, JobState::kBlocked, JobState::kRunning, JobState::kDone,
                 JobState::kFailed}) {
    if (to_string(s) == name) return s;
  }
  throw ValidationError("unknown job state '" + std::string(name) + "'");
}

std::string MockImageBackend::generate(const ImageRequest& request) const {
  const auto h = hash_fields({"image", request.prompt, seed_text(request.seed)});
  const std::string locator = "artifacts/image-" + hex64(h) + ".json";
  write_stub(dir_, locator,
             {{"kind", "image"}, {"prompt", request.prompt}, {"seed", seed_text(request.seed)}});
  return locator;
}

BackendCapability MockVideoBackend::capability() const {
  return {1, 0, kind_ == BackendKind::kLipSync};
}

VideoResult MockVideoBackend::render(const VideoRequest& request) const {
  if (request.duration_frames <= 0) throw PermanentClientError("duration_frames must be positive");
  if (request.audio && kind_ != BackendKind::kLipSync) {
    throw PermanentClientError("general render backend takes no audio");
  }
  const auto h = hash_fields({std::string(to_string(kind_)), request.prompt, request.keyframe,
                              std::to_string(request.duration_frames),
                              request.audio.value_or(""), seed_text(request.seed)});
  VideoResult r;
  r.artifact = "artifacts/clip-" + hex64(h) + ".json";
  r.last_frame = "artifacts/frame-" + hex64(h) + ".json";
  r.duration_frames = request.duration_frames;
  write_stub(dir_, r.artifact,
             {{"kind", to_string(kind_)},
              {"prompt", request.prompt},
              {"keyframe", request.keyframe},
              {"duration_frames", request.duration_frames},
              {"audio", request.audio ? json(*request.audio) : json(nullptr)},
              {"seed", seed_text(request.seed)},
              {"last_frame", r.last_frame}});
  write_stub(dir_, r.last_frame, {{"kind", "frame"}, {"clip", r.artifact}});
  return r;
}

std::string FaultyImageBackend::generate(const ImageRequest& request) const {
  if (auto err = rule_(request.job_id)) std::rethrow_exception(err);
  return inner_->generate(request);
}

VideoResult FaultyVideoBackend::render(const VideoRequest& request) const {
  if (auto err = rule_(request.job_id)) std::rethrow_exception(err);
  return inner_->render(request);
}

FaultRule fail_jobs_with_prefix(std::string prefix) {
  return [prefix = std::move(prefix)](const std::string& job_id) -> std::exception_ptr {
    if (!job_id.starts_with(prefix)) return nullptr;
    return std::make_exception_ptr(PermanentClientError("injected fault on " + job_id));
  };
}

std::string HttpImageBackend::generate(const ImageRequest& request) const {
  const json reply = endpoint_.post(
      "/image", {{"job_id", request.job_id}, {"prompt", request.prompt}, {"seed", request.seed}});
  if (!reply.contains("artifact") || !reply.at("artifact").is_string()) {
    throw PermanentClientError("image reply lacks 'artifact'");
  }
  return reply.at("artifact").get<std::string>();
}

VideoResult HttpVideoBackend::render(const VideoRequest& request) const {
  const json body = {{"job_id", request.job_id},
                     {"prompt", request.prompt},
                     {"keyframe", request.keyframe},
                     {"duration_frames", request.duration_frames},
                     {"audio", request.audio ? json(*request.audio) : json(nullptr)},
                     {"seed", request.seed}};
  const json reply = endpoint_.post("/render", body);
  try {
    return {reply.at("artifact").get<std::string>(), reply.at("last_frame").get<std::string>(),
            reply.at("duration_frames").get<std::int64_t>()};
  } catch (const json::exception& e) {
    throw PermanentClientError(std::string("render reply: ") + e.what());
  }
}

BackendKind route_backend(const Shot& shot, bool lipsync_enabled, bool has_vocal_stem,
                          std::vector<std::string>* warnings) {
  if (!shot.lipsync || !lipsync_enabled) return BackendKind::kGeneralRender;
  if (!has_vocal_stem) {
    if (warnings) warnings->push_back(shot.shot_id + ": lip-sync requested without a vocal stem");
    return BackendKind::kGeneralRender;
  }
  return BackendKind::kLipSync;
}

std::vector<std::string> DependencyGraph::roots() const {
  std::vector<std::string> out;
  for (const auto& n : nodes) {
    if (!upstream.count(n)) out.push_back(n);
  }
  return out;
}

std::vector<std::vector<std::string>> DependencyGraph::chains() const {
  std::vector<std::vector<std::string>> out;
  for (const auto& root : roots()) {
    std::vector<std::string> chain{root};
    for (auto it = downstream.find(root); it != downstream.end(); it = downstream.find(it->second)) {
      chain.push_back(it->second);
    }
    out.push_back(std::move(chain));
  }
  return out;
}

std::vector<std::string> DependencyGraph::topological_order() const {
  std::map<std::string, int> indegree;
  for (const auto& n : nodes) indegree[n] = upstream.count(n) ? 1 : 0;
  std::vector<std::string> order;
  std::set<std::string> emitted;
  // Plan order is itself topological when the graph is well formed; run
  // Kahn passes over it so malformed inputs are still detected.
  bool progressed = true;
  while (order.size() < nodes.size() && progressed) {
    progressed = false;
    for (const auto& n : nodes) {
      if (emitted.count(n) || indegree[n] != 0) continue;
      order.push_back(n);
      emitted.insert(n);
      progressed = true;
      if (auto it = downstream.find(n); it != downstream.end()) --indegree[it->second];
    }
  }
  if (order.size() != nodes.size()) throw InternalError("dependency graph has a cycle");
  return order;
}

std::vector<std::string> DependencyGraph::descendants(const std::string& id) const {
  std::vector<std::string> out;
  for (auto it = downstream.find(id); it != downstream.end(); it = downstream.find(it->second)) {
    out.push_back(it->second);
  }
  return out;
}

DependencyGraph build_dependency_graph(const ShotPlan& plan) {
  DependencyGraph g;
  for (std::size_t i = 0; i < plan.subclips.size(); ++i) {
    const auto& sc = plan.subclips[i];
    g.nodes.push_back(sc.subclip_id);
    if (i > 0 && sc.keyframe_source == KeyframeSource::kPreviousLastFrame) {
      const auto& prev = plan.subclips[i - 1].subclip_id;
      g.upstream[sc.subclip_id] = prev;
      g.downstream[prev] = sc.subclip_id;
    }
  }
  return g;
}

json keyframe_candidate_to_json(const KeyframeCandidate& c) {
  return {{"candidate_id", c.candidate_id}, {"subclip_id", c.subclip_id},
          {"artifact", c.artifact},         {"seed", hex64(c.seed)},
          {"attempt", c.attempt},           {"prompt", c.prompt}};
}

KeyframeCandidate keyframe_candidate_from_json(const json& j) {
  try {
    return {j.at("candidate_id").get<std::string>(), j.at("subclip_id").get<std::string>(),
            j.at("artifact").get<std::string>(),
            std::stoull(j.at("seed").get<std::string>(), nullptr, 16), j.at("attempt").get<int>(),
            j.at("prompt").get<std::string>()};
  } catch (const std::exception& e) {
    throw ValidationError(std::string("keyframe candidate: ") + e.what());
  }
}

json clip_candidate_to_json(const ClipCandidate& c) {
  return {{"candidate_id", c.candidate_id},
          {"subclip_id", c.subclip_id},
          {"artifact", c.artifact},
          {"last_frame", c.last_frame},
          {"duration", c.duration.frames()},
          {"backend", to_string(c.backend)},
          {"attempt", c.attempt},
          {"seed", hex64(c.seed)},
          {"keyframe", c.keyframe},
          {"prompt", c.prompt},
          {"audio", c.audio ? json(*c.audio) : json(nullptr)}};
}

ClipCandidate clip_candidate_from_json(const json& j) {
  try {
    ClipCandidate c;
    c.candidate_id = j.at("candidate_id").get<std::string>();
    c.subclip_id = j.at("subclip_id").get<std::string>();
    c.artifact = j.at("artifact").get<std::string>();
    c.last_frame = j.at("last_frame").get<std::string>();
    c.duration = FrameTime(j.at("duration").get<std::int64_t>());
    c.backend = parse_backend_kind(j.at("backend").get<std::string>());
    c.attempt = j.at("attempt").get<int>();
    c.seed = std::stoull(j.at("seed").get<std::string>(), nullptr, 16);
    c.keyframe = j.at("keyframe").get<std::string>();
    c.prompt = j.at("prompt").get<std::string>();
    if (!j.at("audio").is_null()) c.audio = j.at("audio").get<std::string>();
    return c;
  } catch (const std::exception& e) {
    throw ValidationError(std::string("clip candidate: ") + e.what());
  }
}

AudioRecord mux_plan(const ShotPlan& plan, const std::map<std::string, BackendKind>& routing,
                     const SongMetadata& song) {
  AudioRecord r;
  r.mix_audio_ref = song.mix_audio_ref;
  r.span = FrameSpan(FrameTime(0), plan.duration);
  r.vocal_stem_ref = song.vocal_stem_ref;
  for (const auto& sc : plan.subclips) {
    auto it = routing.find(sc.subclip_id);
    if (it != routing.end() && it->second == BackendKind::kLipSync) r.stem_driven.push_back(sc.subclip_id);
  }
  return r;
}

json audio_record_to_json(const AudioRecord& r) {
  return {{"final_audio", "mix"},
          {"mix_audio_ref", r.mix_audio_ref},
          {"span", span_to_json(r.span)},
          {"vocal_stem_ref", r.vocal_stem_ref ? json(*r.vocal_stem_ref) : json(nullptr)},
          {"stem_driven", r.stem_driven}};
}

AudioRecord audio_record_from_json(const json& j) {
  reject_unknown_keys(j, {"final_audio", "mix_audio_ref", "span", "vocal_stem_ref", "stem_driven"},
                      "audio");
  try {
    if (j.at("final_audio").get<std::string>() != "mix") {
      throw ValidationError("final audio must be the original mix");
    }
    AudioRecord r;
    r.mix_audio_ref = j.at("mix_audio_ref").get<std::string>();
    r.span = span_from_json(j.at("span"), "audio.span");
    if (!j.at("vocal_stem_ref").is_null()) r.vocal_stem_ref = j.at("vocal_stem_ref").get<std::string>();
    r.stem_driven = j.at("stem_driven").get<std::vector<std::string>>();
    return r;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("audio: ") + e.what());
  }
}

}  // namespace mvforge
