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

// Event-sourced job state. Every state transition is one JSON line in
// events.ndjson; the in-memory snapshot is exactly the fold of the log, so
// a crashed run resumes by replaying it.

#ifndef MVFORGE_JOB_STORE_HPP_
#define MVFORGE_JOB_STORE_HPP_

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "mvforge/generation.hpp"
#include "mvforge/verifier.hpp"

namespace mvforge {

enum class Stage { kAnalysis, kPlanning, kGeneration, kVerification, kAssembly, kEvaluation, kDone, kFailed };

std::string_view to_string(Stage s);
Stage parse_stage(std::string_view name);

struct SubclipRecord {
  std::string subclip_id;
  JobState state = JobState::kPending;
  BackendKind backend = BackendKind::kGeneralRender;
  /// Bumped by every invalidation; candidate ids embed it.
  int epoch = 1;
  /// Highest backend attempt number issued so far (never decreases).
  int attempts = 0;
  std::vector<KeyframeCandidate> keyframes;
  std::vector<Verdict> image_verdicts;
  std::optional<std::string> keyframe;  // locator the clips were conditioned on
  std::optional<std::string> keyframe_candidate;
  bool keyframe_fallback = false;
  std::vector<ClipCandidate> clips;
  std::vector<Verdict> video_verdicts;
  std::optional<std::string> selected_clip;
  bool fallback_accepted = false;
  bool human_override = false;
  std::string failure;
  std::uint64_t updated_seq = 0;

  const ClipCandidate* selected() const;
  friend bool operator==(const SubclipRecord&, const SubclipRecord&) = default;
};

struct JobSnapshot {
  std::string song_id;
  Stage stage = Stage::kAnalysis;
  std::set<Stage> completed;
  std::string failure;
  std::vector<std::string> order;
  std::map<std::string, SubclipRecord> subclips;
  std::vector<std::string> warnings;
  /// Digests of stage outputs written beside the log (context, plan, ...).
  std::map<std::string, std::string> artifacts;
  /// Request token -> stored response of an idempotent API mutation.
  std::map<std::string, nlohmann::json> tokens;
  std::uint64_t seq = 0;

  friend bool operator==(const JobSnapshot&, const JobSnapshot&) = default;
};

nlohmann::json subclip_record_to_json(const SubclipRecord& r);

/// Folds one event into the snapshot. Throws ValidationError on an
/// unknown event type or a reference to an unregistered subclip.
void apply_event(JobSnapshot& s, const nlohmann::json& event);
JobSnapshot replay(const std::vector<nlohmann::json>& events);

/// Parsed lines of an event log. A torn (unparseable) final line — the
/// trace of a crash mid-write — is dropped; a bad line elsewhere throws.
std::vector<nlohmann::json> read_events(const std::filesystem::path& path);

/// Thrown by the store when a configured crash point is reached; the
/// triggering event is already durable.
class SimulatedCrash : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class JobStore {
 public:
  /// In-memory store (no log file).
  JobStore() = default;
  /// Opens (and replays) `log`, creating it if absent. With crash_after = n
  /// the n-th append of this session throws SimulatedCrash after being
  /// written, and every later append throws too.
  explicit JobStore(std::filesystem::path log, std::optional<std::uint64_t> crash_after = {});

  JobStore(const JobStore&) = delete;
  JobStore& operator=(const JobStore&) = delete;

  /// Stamps seq, persists and applies. Thread-safe.
  void append(nlohmann::json event);
  JobSnapshot snapshot() const;
  std::uint64_t seq() const;
  bool crashed() const;
  const std::filesystem::path& log_path() const { return log_; }

 private:
  mutable std::mutex mu_;
  std::filesystem::path log_;
  std::ofstream out_;
  JobSnapshot state_;
  std::optional<std::uint64_t> crash_after_;
  std::uint64_t appended_ = 0;
  bool crashed_ = false;
};

}  // namespace mvforge

#endif  // MVFORGE_JOB_STORE_HPP_
