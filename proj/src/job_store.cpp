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

#include "mvforge/job_store.hpp"

#include <sstream>

#include "mvforge/errors.hpp"
#include "mvforge/util.hpp"

namespace mvforge {
namespace {

using nlohmann::json;

constexpr Stage kAllStages[] = {Stage::kAnalysis,   Stage::kPlanning, Stage::kGeneration,
                                Stage::kVerification, Stage::kAssembly, Stage::kEvaluation,
                                Stage::kDone,       Stage::kFailed};

SubclipRecord& record(JobSnapshot& s, const json& e) {
  const auto id = e.at("subclip").get<std::string>();
  auto it = s.subclips.find(id);
  if (it == s.subclips.end()) throw ValidationError("event references unknown subclip " + id);
  return it->second;
}

void clear_work(SubclipRecord& r) {
  r.keyframes.clear();
  r.image_verdicts.clear();
  r.keyframe.reset();
  r.keyframe_candidate.reset();
  r.keyframe_fallback = false;
  r.clips.clear();
  r.video_verdicts.clear();
  r.selected_clip.reset();
  r.fallback_accepted = false;
  r.human_override = false;
  r.failure.clear();
}

}  // namespace

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::kAnalysis: return "analysis";
    case Stage::kPlanning: return "planning";
    case Stage::kGeneration: return "generation";
    case Stage::kVerification: return "verification";
    case Stage::kAssembly: return "assembly";
    case Stage::kEvaluation: return "evaluation";
    case Stage::kDone: return "done";
    case Stage::kFailed: return "failed";
  }
  return "analysis";
}

Stage parse_stage(std::string_view name) {
  for (auto s : kAllStages) {
    if (to_string(s) == name) return s;
  }
  throw ValidationError("unknown stage '" + std::string(name) + "'");
}

const ClipCandidate* SubclipRecord::selected() const {
  if (!selected_clip) return nullptr;
  for (const auto& c : clips) {
    if (c.candidate_id == *selected_clip) return &c;
  }
  return nullptr;
}

json subclip_record_to_json(const SubclipRecord& r) {
  json keyframes = json::array(), image_verdicts = json::array(), clips = json::array(),
       video_verdicts = json::array();
  for (const auto& k : r.keyframes) keyframes.push_back(keyframe_candidate_to_json(k));
  for (const auto& v : r.image_verdicts) image_verdicts.push_back(verdict_to_json(v));
  for (const auto& c : r.clips) clips.push_back(clip_candidate_to_json(c));
  for (const auto& v : r.video_verdicts) video_verdicts.push_back(verdict_to_json(v));
  auto opt = [](const std::optional<std::string>& s) { return s ? json(*s) : json(nullptr); };
  return {{"subclip_id", r.subclip_id},
          {"state", to_string(r.state)},
          {"backend", to_string(r.backend)},
          {"epoch", r.epoch},
          {"attempts", r.attempts},
          {"keyframes", std::move(keyframes)},
          {"image_verdicts", std::move(image_verdicts)},
          {"keyframe", opt(r.keyframe)},
          {"keyframe_candidate", opt(r.keyframe_candidate)},
          {"keyframe_fallback", r.keyframe_fallback},
          {"clips", std::move(clips)},
          {"video_verdicts", std::move(video_verdicts)},
          {"selected_clip", opt(r.selected_clip)},
          {"fallback_accepted", r.fallback_accepted},
          {"human_override", r.human_override},
          {"failure", r.failure},
          {"updated_seq", r.updated_seq}};
}

void apply_event(JobSnapshot& s, const json& e) {
  try {
    const auto type = e.at("type").get<std::string>();
    s.seq = e.value("seq", s.seq + 1);

    if (type == "song") {
      s.song_id = e.at("song_id").get<std::string>();
    } else if (type == "stage") {
      const auto stage = parse_stage(e.at("stage").get<std::string>());
      const auto status = e.at("status").get<std::string>();
      if (status == "started") {
        // (Re)starting a stage reopens it and everything after it.
        s.stage = stage;
        for (auto it = s.completed.begin(); it != s.completed.end();) {
          it = *it >= stage ? s.completed.erase(it) : std::next(it);
        }
        s.failure.clear();
      } else if (status == "completed") {
        s.completed.insert(stage);
      } else if (status == "failed") {
        s.stage = Stage::kFailed;
        s.failure = std::string(to_string(stage)) + ": " + e.value("cause", std::string());
      } else {
        throw ValidationError("unknown stage status '" + status + "'");
      }
    } else if (type == "subclips_registered") {
      s.order.clear();
      s.subclips.clear();
      for (const auto& r : e.at("subclips")) {
        SubclipRecord rec;
        rec.subclip_id = r.at("subclip_id").get<std::string>();
        rec.backend = parse_backend_kind(r.at("backend").get<std::string>());
        rec.state = parse_job_state(r.at("state").get<std::string>());
        rec.updated_seq = s.seq;
        s.order.push_back(rec.subclip_id);
        s.subclips.emplace(rec.subclip_id, std::move(rec));
      }
    } else if (type == "subclip_started") {
      auto& r = record(s, e);
      clear_work(r);
      r.epoch = e.at("epoch").get<int>();
      r.state = JobState::kRunning;
      r.updated_seq = s.seq;
    } else if (type == "job_state") {
      auto& r = record(s, e);
      r.state = parse_job_state(e.at("state").get<std::string>());
      if (e.contains("failure")) r.failure = e.at("failure").get<std::string>();
      if (e.contains("attempts")) r.attempts = std::max(r.attempts, e.at("attempts").get<int>());
      r.updated_seq = s.seq;
    } else if (type == "invalidated") {
      auto& r = record(s, e);
      clear_work(r);
      r.epoch = e.at("epoch").get<int>();
      r.state = parse_job_state(e.at("state").get<std::string>());
      r.updated_seq = s.seq;
    } else if (type == "keyframe_candidates") {
      auto& r = record(s, e);
      for (const auto& c : e.at("candidates")) {
        r.keyframes.push_back(keyframe_candidate_from_json(c));
        r.attempts = std::max(r.attempts, r.keyframes.back().attempt);
      }
      r.updated_seq = s.seq;
    } else if (type == "image_verdicts") {
      auto& r = record(s, e);
      for (const auto& v : e.at("verdicts")) r.image_verdicts.push_back(verdict_from_json(v));
      r.updated_seq = s.seq;
    } else if (type == "keyframe_selected") {
      auto& r = record(s, e);
      r.keyframe = e.at("locator").get<std::string>();
      if (!e.at("candidate_id").is_null()) {
        r.keyframe_candidate = e.at("candidate_id").get<std::string>();
      }
      r.keyframe_fallback = e.value("fallback", false);
      r.updated_seq = s.seq;
    } else if (type == "clip_candidates") {
      auto& r = record(s, e);
      for (const auto& c : e.at("candidates")) {
        r.clips.push_back(clip_candidate_from_json(c));
        r.attempts = std::max(r.attempts, r.clips.back().attempt);
      }
      r.updated_seq = s.seq;
    } else if (type == "video_verdicts") {
      auto& r = record(s, e);
      for (const auto& v : e.at("verdicts")) r.video_verdicts.push_back(verdict_from_json(v));
      r.updated_seq = s.seq;
    } else if (type == "clip_selected") {
      auto& r = record(s, e);
      const auto id = e.at("candidate_id").get<std::string>();
      r.selected_clip = id;
      if (!r.selected()) throw ValidationError("clip_selected names unknown candidate " + id);
      r.fallback_accepted = e.value("fallback_accepted", false);
      r.human_override = e.value("human_override", false);
      r.state = JobState::kDone;
      r.failure.clear();
      r.updated_seq = s.seq;
    } else if (type == "warning") {
      s.warnings.push_back(e.at("message").get<std::string>());
    } else if (type == "artifact") {
      s.artifacts[e.at("name").get<std::string>()] = e.at("digest").get<std::string>();
    } else if (type == "token") {
      s.tokens[e.at("token").get<std::string>()] = e.at("response");
    } else {
      throw ValidationError("unknown event type '" + type + "'");
    }
  } catch (const json::exception& ex) {
    throw ValidationError(std::string("malformed event: ") + ex.what());
  }
}

JobSnapshot replay(const std::vector<json>& events) {
  JobSnapshot s;
  for (const auto& e : events) apply_event(s, e);
  return s;
}

std::vector<json> read_events(const std::filesystem::path& path) {
  std::vector<json> out;
  if (!std::filesystem::exists(path)) return out;
  std::istringstream in(read_file(path));
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!trim(line).empty()) lines.push_back(line);
  }
  for (std::size_t i = 0; i < lines.size(); ++i) {
    try {
      out.push_back(json::parse(lines[i]));
    } catch (const json::exception& e) {
      if (i + 1 == lines.size()) break;  // torn tail
      throw ValidationError(path.string() + ":" + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return out;
}

JobStore::JobStore(std::filesystem::path log, std::optional<std::uint64_t> crash_after)
    : log_(std::move(log)), crash_after_(crash_after) {
  if (log_.has_parent_path()) std::filesystem::create_directories(log_.parent_path());
  const auto events = read_events(log_);
  state_ = replay(events);
  // Rewrite the log without a torn tail so new events start on a clean line.
  std::string clean;
  for (const auto& e : events) clean += e.dump() + "\n";
  write_file_atomic(log_, clean);
  out_.open(log_, std::ios::app | std::ios::binary);
  if (!out_) throw Error("cannot open event log " + log_.string());
}

void JobStore::append(json event) {
  std::lock_guard lock(mu_);
  if (crashed_) throw SimulatedCrash("job store is down after a simulated crash");
  event["seq"] = state_.seq + 1;
  JobSnapshot next = state_;
  apply_event(next, event);  // validate before persisting
  if (out_.is_open()) {
    out_ << event.dump() << '\n';
    out_.flush();
  }
  state_ = std::move(next);
  ++appended_;
  if (crash_after_ && appended_ >= *crash_after_) {
    crashed_ = true;
    throw SimulatedCrash("simulated crash after event " + std::to_string(state_.seq));
  }
}

JobSnapshot JobStore::snapshot() const {
  std::lock_guard lock(mu_);
  return state_;
}

std::uint64_t JobStore::seq() const {
  std::lock_guard lock(mu_);
  return state_.seq;
}

bool JobStore::crashed() const {
  std::lock_guard lock(mu_);
  return crashed_;
}

}  // namespace mvforge
