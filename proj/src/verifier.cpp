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

#include "mvforge/verifier.hpp"

#include "mvforge/context.hpp"
#include "mvforge/errors.hpp"
#include "mvforge/util.hpp"

namespace mvforge {
namespace {

using nlohmann::json;

int score_field(const json& j, const char* key) {
  if (!j.contains(key)) return 1;
  const auto& v = j.at(key);
  if (!v.is_number_integer()) throw ValidationError(std::string(key) + " must be an integer");
  const int s = v.get<int>();
  if (s < 1 || s > 5) {
    throw ValidationError(std::string(key) + " = " + std::to_string(s) + " outside [1, 5]");
  }
  return s;
}

// Verdict fields of a scripted row or wire reply; "pass" is accepted as an
// alias of "gate_pass" to keep fixtures short.
Verdict fields_from_json(const json& j, Verdict v) {
  if (j.contains("gate_pass")) {
    v.gate_pass = j.at("gate_pass").get<bool>();
  } else if (j.contains("pass")) {
    v.gate_pass = j.at("pass").get<bool>();
  }
  v.adherence = score_field(j, "adherence");
  v.alignment = score_field(j, "alignment");
  v.identity = score_field(j, "identity");
  if (j.contains("rationale")) v.rationale = j.at("rationale").get<std::string>();
  return v;
}

Verdict judged_with_retries(const JudgeRequest& req, const JudgeClient& judge,
                            const SelectionPolicy& policy) {
  std::string last_error;
  for (int attempt = 0; attempt <= policy.judge_retries; ++attempt) {
    try {
      Verdict v = judge.judge(req);
      v.candidate_id = req.candidate_id;
      v.modality = req.modality;
      return v;
    } catch (const Error& e) {
      last_error = e.what();
    }
  }
  Verdict v;
  v.candidate_id = req.candidate_id;
  v.modality = req.modality;
  v.gate_pass = false;
  v.judge_error = true;
  v.rationale = "judge error: " + last_error;
  return v;
}

}  // namespace

std::string_view to_string(Modality m) { return m == Modality::kImage ? "image" : "video"; }

Modality parse_modality(std::string_view name) {
  if (name == "image") return Modality::kImage;
  if (name == "video") return Modality::kVideo;
  throw ValidationError("unknown modality '" + std::string(name) + "'");
}

json verdict_to_json(const Verdict& v) {
  return {{"candidate_id", v.candidate_id}, {"modality", to_string(v.modality)},
          {"gate_pass", v.gate_pass},       {"adherence", v.adherence},
          {"alignment", v.alignment},       {"identity", v.identity},
          {"rationale", v.rationale},       {"judge_error", v.judge_error}};
}

Verdict verdict_from_json(const json& j) {
  reject_unknown_keys(j,
                      {"candidate_id", "modality", "gate_pass", "adherence", "alignment",
                       "identity", "rationale", "judge_error"},
                      "verdict");
  try {
    Verdict v;
    v.candidate_id = j.at("candidate_id").get<std::string>();
    v.modality = parse_modality(j.at("modality").get<std::string>());
    v = fields_from_json(j, v);
    v.judge_error = j.value("judge_error", false);
    return v;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("verdict: ") + e.what());
  }
}

ScriptedJudge::ScriptedJudge(json table) : table_(std::move(table)) {
  if (!table_.is_object()) throw ValidationError("scripted judge table must be an object");
  reject_unknown_keys(table_, {"default", "verdicts"}, "scripted judge");
  if (table_.contains("verdicts") && !table_.at("verdicts").is_object()) {
    throw ValidationError("scripted judge 'verdicts' must be an object");
  }
}

std::unique_ptr<ScriptedJudge> ScriptedJudge::from_file(const std::string& path) {
  try {
    return std::make_unique<ScriptedJudge>(json::parse(read_file(path)));
  } catch (const json::exception& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

const json* ScriptedJudge::row_for(const std::string& candidate_id) const {
  if (table_.contains("verdicts")) {
    const auto& rows = table_.at("verdicts");
    if (auto it = rows.find(candidate_id); it != rows.end()) return &*it;
    const json* best = nullptr;
    std::size_t best_len = 0;
    for (const auto& [key, row] : rows.items()) {
      if (key.empty() || key.back() != '*') continue;
      const std::string_view prefix(key.data(), key.size() - 1);
      if (candidate_id.starts_with(prefix) && (best == nullptr || prefix.size() > best_len)) {
        best = &row;
        best_len = prefix.size();
      }
    }
    if (best != nullptr) return best;
  }
  if (table_.contains("default")) return &table_.at("default");
  return nullptr;
}

Verdict ScriptedJudge::judge(const JudgeRequest& request) const {
  const json* row = row_for(request.candidate_id);
  Verdict v;
  v.candidate_id = request.candidate_id;
  v.modality = request.modality;
  if (row == nullptr) {
    v.gate_pass = true;
    v.adherence = v.alignment = v.identity = 3;
    v.rationale = "scripted default";
    return v;
  }
  if (row->value("error", "") == "permanent") {
    throw PermanentClientError("scripted judge refuses " + request.candidate_id);
  }
  if (const int fail_times = row->value("fail_times", 0); fail_times > 0) {
    std::lock_guard lock(mu_);
    if (calls_[request.candidate_id]++ < fail_times) {
      throw TransientClientError("scripted judge timeout on " + request.candidate_id);
    }
  }
  try {
    return fields_from_json(*row, v);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("scripted judge row: ") + e.what());
  }
}

Verdict HashJudge::judge(const JudgeRequest& request) const {
  const std::uint64_t h = hash_fields({"judge", request.candidate_id}, seed_);
  Verdict v;
  v.candidate_id = request.candidate_id;
  v.modality = request.modality;
  v.gate_pass = h % 10 < 7;
  v.adherence = 1 + static_cast<int>((h >> 8) % 5);
  v.alignment = 1 + static_cast<int>((h >> 16) % 5);
  v.identity = 1 + static_cast<int>((h >> 24) % 5);
  v.rationale = "hash judge";
  return v;
}

Verdict HttpJudgeClient::judge(const JudgeRequest& request) const {
  const json body = {{"candidate_id", request.candidate_id},
                     {"prompt", request.prompt},
                     {"artifact", request.artifact},
                     {"descriptors", request.descriptors}};
  const json reply = endpoint_.post("/judge/" + std::string(to_string(request.modality)), body);
  try {
    Verdict v;
    v.candidate_id = request.candidate_id;
    v.modality = request.modality;
    return fields_from_json(reply, v);
  } catch (const Error& e) {
    throw PermanentClientError(std::string("judge reply: ") + e.what());
  } catch (const json::exception& e) {
    throw PermanentClientError(std::string("judge reply: ") + e.what());
  }
}

int combined_score(const Verdict& v, VideoScoring scoring) {
  if (v.modality == Modality::kImage) return v.adherence;
  return scoring == VideoScoring::kFull ? v.alignment + v.identity : 0;
}

std::optional<std::size_t> select_index(const std::vector<Verdict>& verdicts,
                                        VideoScoring scoring) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < verdicts.size(); ++i) {
    if (!verdicts[i].gate_pass) continue;
    if (!best || combined_score(verdicts[i], scoring) > combined_score(verdicts[*best], scoring)) {
      best = i;
    }
  }
  return best;
}

json outcome_to_json(const SelectionOutcome& o) {
  json history = json::array();
  for (const auto& v : o.history) history.push_back(verdict_to_json(v));
  return {{"selected", o.selected ? json(*o.selected) : json(nullptr)},
          {"round", o.round},
          {"exhausted", o.exhausted},
          {"fallback_accepted", o.fallback_accepted},
          {"history", std::move(history)}};
}

SelectionOutcome verify_and_select(const std::vector<JudgeRequest>& candidates,
                                   const JudgeClient& judge, const SelectionPolicy& policy) {
  if (candidates.empty()) throw DomainError("verify_and_select needs at least one candidate");
  SelectionOutcome out;
  out.round = 1;
  if (policy.mode == SelectionMode::kAcceptFirst) {
    out.selected = candidates.front().candidate_id;
    return out;
  }
  for (const auto& c : candidates) out.history.push_back(judged_with_retries(c, judge, policy));
  if (const auto idx = select_index(out.history, policy.video_scoring)) {
    out.selected = out.history[*idx].candidate_id;
  }
  return out;
}

SelectionOutcome regeneration_loop(const CandidateSource& source, const JudgeClient& judge,
                                   const SelectionPolicy& policy, const RoundObserver& observer) {
  if (policy.max_rounds < 1) throw ConfigError("max_rounds must be >= 1");
  SelectionOutcome out;
  for (int round = 1; round <= policy.max_rounds; ++round) {
    const auto candidates = source(round);
    if (candidates.empty()) throw InternalError("candidate source produced nothing");
    auto r = verify_and_select(candidates, judge, policy);
    if (observer) observer(round, r.history);
    out.round = round;
    out.history.insert(out.history.end(), r.history.begin(), r.history.end());
    if (r.selected) {
      out.selected = r.selected;
      return out;
    }
  }

  // Nothing passed: best-scoring candidate seen, preferring rated ones.
  out.exhausted = true;
  const Verdict* best = nullptr;
  for (const auto& v : out.history) {
    if (best == nullptr) {
      best = &v;
      continue;
    }
    if (best->judge_error && !v.judge_error) {
      best = &v;
    } else if (best->judge_error == v.judge_error &&
               combined_score(v, policy.video_scoring) > combined_score(*best, policy.video_scoring)) {
      best = &v;
    }
  }
  if (best != nullptr) {
    out.selected = best->candidate_id;
    out.fallback_accepted = true;
  }
  return out;
}

}  // namespace mvforge
