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


// Helpers for tests that drive the whole pipeline on a fixture song.

#ifndef MVFORGE_TESTS_PIPELINE_SUPPORT_HPP_
#define MVFORGE_TESTS_PIPELINE_SUPPORT_HPP_

#include <memory>
#include <optional>
#include <string>

#include "mvforge/pipeline.hpp"
#include "mvforge/util.hpp"
#include "support.hpp"

namespace mvforge::testing {

inline std::unique_ptr<Pipeline> fixture_pipeline(const std::string& song,
                                                  const std::filesystem::path& job_dir,
                                                  PipelineConfig config = {},
                                                  std::optional<std::uint64_t> crash_after = {},
                                                  std::optional<Stage> stop_after = {}) {
  const auto dir = song_fixture(song);
  config.retry_delay_ms = 0;
  return std::make_unique<Pipeline>(load_song_metadata(dir), config,
                                    default_clients(dir, job_dir / "artifacts", config),
                                    RunOptions{job_dir, crash_after, stop_after});
}

/// Crashes once after `crash_at` appended events, then resumes to
/// completion. Returns whether the crash actually happened.
inline bool crash_once_then_resume(const std::string& song, const std::filesystem::path& job_dir,
                                   std::uint64_t crash_at, const PipelineConfig& config = {}) {
  bool crashed = false;
  try {
    fixture_pipeline(song, job_dir, config, crash_at)->run();
  } catch (const SimulatedCrash&) {
    crashed = true;
  }
  fixture_pipeline(song, job_dir, config)->run();
  return crashed;
}

/// Crashes after every `step` appended events until the run completes.
/// Stages that rewrite their outputs in one burst need step larger than
/// that burst to make progress. Returns the number of crashes.
inline int run_with_crashes(const std::string& song, const std::filesystem::path& job_dir,
                            std::uint64_t step, const PipelineConfig& config = {}) {
  int crashes = 0;
  for (;;) {
    auto p = fixture_pipeline(song, job_dir, config, step);
    try {
      p->run();
      return crashes;
    } catch (const SimulatedCrash&) {
      ++crashes;
    }
    if (crashes > 1000) throw InternalError("pipeline made no progress");
  }
}

inline std::string slurp(const std::filesystem::path& p) { return read_file(p); }

// Which shots mention which characters, resolved against a bank built from
// the script's own cast (so the answer does not depend on the bank switch).
inline std::map<std::string, std::vector<CharacterProfile>> shot_references(const Script& script,
                                                                             const std::string& song_id) {
  const auto bank = build_bank(song_id, script.cast).bank;
  std::map<std::string, std::vector<CharacterProfile>> out;
  for (const auto& s : script.shots) {
    for (const auto& m : s.mentions) out[s.shot_id].push_back(match(bank, m));
  }
  return out;
}

struct Coverage {
  std::size_t references = 0;
  std::size_t with_descriptor = 0;
};

// Every prompt actually sent to an image or video backend, checked for the
// descriptor block of every character its shot mentions.
inline Coverage descriptor_coverage(const Pipeline& p) {
  const auto script = script_from_json(nlohmann::json::parse(slurp(p.job_dir() / "script.json")));
  const auto refs = shot_references(script, p.song().song_id);
  const auto plan = *p.plan();
  const auto snap = p.store().snapshot();
  Coverage cov;
  for (const auto& sc : plan.subclips) {
    const auto it = refs.find(sc.parent_shot);
    if (it == refs.end()) continue;
    const auto& rec = snap.subclips.at(sc.subclip_id);
    std::vector<std::string> sent;
    for (const auto& k : rec.keyframes) sent.push_back(k.prompt);
    for (const auto& c : rec.clips) sent.push_back(c.prompt);
    for (const auto& prompt : sent) {
      for (const auto& profile : it->second) {
        ++cov.references;
        if (prompt.find(profile.descriptor_block) != std::string::npos) ++cov.with_descriptor;
      }
    }
  }
  return cov;
}

}  // namespace mvforge::testing

#endif  // MVFORGE_TESTS_PIPELINE_SUPPORT_HPP_
