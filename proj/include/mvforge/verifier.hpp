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

// Gate-then-rank candidate selection. A judge first decides whether an
// image is physically plausible (or a clip physically feasible); among the
// survivors the highest combined score wins, lowest index on ties.

#ifndef MVFORGE_VERIFIER_HPP_
#define MVFORGE_VERIFIER_HPP_

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mvforge/transport.hpp"

namespace mvforge {

enum class Modality { kImage, kVideo };

std::string_view to_string(Modality m);
Modality parse_modality(std::string_view name);

/// One judgment. Images use `adherence`; videos use `alignment` and
/// `identity`. Scores are integers 1-5 and are stored even when the gate
/// fails. judge_error marks a candidate the judge could not rate.
struct Verdict {
  std::string candidate_id;
  Modality modality = Modality::kImage;
  bool gate_pass = false;
  int adherence = 1;
  int alignment = 1;
  int identity = 1;
  std::string rationale;
  bool judge_error = false;

  friend bool operator==(const Verdict&, const Verdict&) = default;
};

nlohmann::json verdict_to_json(const Verdict& v);
Verdict verdict_from_json(const nlohmann::json& j);

struct JudgeRequest {
  Modality modality = Modality::kImage;
  std::string candidate_id;
  std::string prompt;
  std::string artifact;
  /// Character descriptor blocks the shot is expected to show.
  std::vector<std::string> descriptors;
};

class JudgeClient {
 public:
  virtual ~JudgeClient() = default;
  virtual std::string name() const = 0;
  /// May throw Transient/PermanentClientError. Must be thread-safe.
  virtual Verdict judge(const JudgeRequest& request) const = 0;
};

/// Verdicts looked up by candidate id. Keys ending in '*' match by prefix
/// (longest prefix wins); anything else gets the default verdict. A row
/// with "fail_times": n throws TransientClientError on its first n calls
/// per candidate; "error": "permanent" always throws.
class ScriptedJudge final : public JudgeClient {
 public:
  explicit ScriptedJudge(nlohmann::json table);
  static std::unique_ptr<ScriptedJudge> from_file(const std::string& path);

  std::string name() const override { return "scripted"; }
  Verdict judge(const JudgeRequest& request) const override;

 private:
  const nlohmann::json* row_for(const std::string& candidate_id) const;

  nlohmann::json table_;
  mutable std::mutex mu_;
  mutable std::map<std::string, int> calls_;
};

/// Deterministic pseudo-judge: verdict fields are a hash of (seed,
/// candidate id). Roughly 70% of candidates pass the gate.
class HashJudge final : public JudgeClient {
 public:
  explicit HashJudge(std::uint64_t seed = 0) : seed_(seed) {}
  std::string name() const override { return "hash"; }
  Verdict judge(const JudgeRequest& request) const override;

 private:
  std::uint64_t seed_;
};

/// POST <base>/judge/<modality> with the request; reply carries the verdict fields.
class HttpJudgeClient final : public JudgeClient {
 public:
  explicit HttpJudgeClient(std::string base_url) : endpoint_(std::move(base_url)) {}
  std::string name() const override { return "http"; }
  Verdict judge(const JudgeRequest& request) const override;

 private:
  JsonHttpEndpoint endpoint_;
};

enum class SelectionMode { kGateThenArgmax, kAcceptFirst };
enum class VideoScoring { kFull, kFeasibilityOnly };

struct SelectionPolicy {
  SelectionMode mode = SelectionMode::kGateThenArgmax;
  VideoScoring video_scoring = VideoScoring::kFull;
  int max_rounds = 2;
  /// Extra judge calls per candidate after a failure.
  int judge_retries = 1;
};

/// Image: adherence. Video: alignment + identity, or 0 in feasibility-only
/// mode (the gate alone decides, first passing candidate wins).
int combined_score(const Verdict& v, VideoScoring scoring);

/// Index of the gate-passing verdict with the largest combined score, ties
/// to the lowest index; nullopt when none pass.
std::optional<std::size_t> select_index(const std::vector<Verdict>& verdicts,
                                        VideoScoring scoring);

struct SelectionOutcome {
  std::optional<std::string> selected;
  int round = 0;
  bool exhausted = false;
  /// Selected by the all-fail fallback rather than the gate.
  bool fallback_accepted = false;
  /// Every verdict in judging order, across rounds.
  std::vector<Verdict> history;

  friend bool operator==(const SelectionOutcome&, const SelectionOutcome&) = default;
};

nlohmann::json outcome_to_json(const SelectionOutcome& o);

/// Judges every candidate (with retries; a judge that keeps failing yields
/// a gate-fail verdict flagged judge_error) and selects. Single round.
SelectionOutcome verify_and_select(const std::vector<JudgeRequest>& candidates,
                                   const JudgeClient& judge, const SelectionPolicy& policy);

/// Produces the candidates for round r (1-based); throwing aborts the loop.
using CandidateSource = std::function<std::vector<JudgeRequest>(int round)>;
/// Observes each finished round (used to persist verdicts as they land).
using RoundObserver = std::function<void(int round, const std::vector<Verdict>& verdicts)>;

/// Rounds of generate + verify until one selects or max_rounds is hit; then
/// the best-scoring candidate seen in any round is accepted as a fallback.
/// Accept-first mode takes round 1's first candidate without judging.
SelectionOutcome regeneration_loop(const CandidateSource& source, const JudgeClient& judge,
                                   const SelectionPolicy& policy,
                                   const RoundObserver& observer = {});

}  // namespace mvforge

#endif  // MVFORGE_VERIFIER_HPP_
