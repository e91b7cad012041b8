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

// The song-level pipeline: analysis -> planning -> generation ->
// verification -> assembly -> evaluation, persisted through the job store
// so that any run can be resumed, plus the job-control operations a
// reviewer drives (regenerate, approve).

#ifndef MVFORGE_PIPELINE_HPP_
#define MVFORGE_PIPELINE_HPP_

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "mvforge/assembler.hpp"
#include "mvforge/character_bank.hpp"
#include "mvforge/evaluation.hpp"
#include "mvforge/generation.hpp"
#include "mvforge/ingest.hpp"
#include "mvforge/job_store.hpp"
#include "mvforge/planner.hpp"
#include "mvforge/verifier.hpp"

namespace mvforge {

struct PipelineConfig {
  PlannerConstraints constraints;
  bool use_lyrics = true;
  bool use_character_bank = true;
  bool use_verifier = true;
  bool lipsync_enabled = true;
  int candidates_per_item = 3;
  int max_rounds = 2;
  int parallelism = 4;
  std::uint64_t seed = 0;
  VideoScoring video_scoring = VideoScoring::kFull;
  int backend_retries = 2;
  int retry_delay_ms = 100;
  bool evaluate = true;
  /// Service base URLs by role: analyzer, screenwriter, image, video,
  /// lipsync, judge, rubric_judge. Absent roles use the built-in mocks.
  std::map<std::string, std::string> endpoints;

  void validate() const;
  friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

nlohmann::json config_to_json(const PipelineConfig& c);
/// Unknown keys are rejected; missing keys keep their defaults.
PipelineConfig config_from_json(const nlohmann::json& j);
PipelineConfig load_config(const std::filesystem::path& path);

/// Applies one of the component ablations: "lyrics", "bank", "verifier".
void apply_ablation(PipelineConfig& c, std::string_view name);

/// Screenwriter output: the cast and one description per shot. Mentions
/// are the character names as written in the description.
struct Script {
  std::vector<CastRecord> cast;
  std::vector<ShotScript> shots;
};

nlohmann::json script_to_json(const Script& s);
Script script_from_json(const nlohmann::json& j);

class ScriptClient {
 public:
  virtual ~ScriptClient() = default;
  virtual Script write(const ShotPlan& plan, const MusicContext& ctx) const = 0;
};

/// Deterministic templated screenwriter. The cast follows the caption's
/// vocalist attributes (gender, count, age range) plus one supporting
/// character; names come from a fixed pool picked by a hash of the song id.
class MockScreenwriter final : public ScriptClient {
 public:
  explicit MockScreenwriter(std::uint64_t seed = 0) : seed_(seed) {}
  Script write(const ShotPlan& plan, const MusicContext& ctx) const override;

 private:
  std::uint64_t seed_;
};

/// POST <base>/script with {plan, context}; reply is a serialized Script.
class HttpScriptClient final : public ScriptClient {
 public:
  explicit HttpScriptClient(std::string base_url) : endpoint_(std::move(base_url)) {}
  Script write(const ShotPlan& plan, const MusicContext& ctx) const override;

 private:
  JsonHttpEndpoint endpoint_;
};

struct PipelineClients {
  AnalyzerSet analyzers;
  std::shared_ptr<const ScriptClient> screenwriter;
  std::shared_ptr<const ImageBackendClient> image;
  std::shared_ptr<const VideoBackendClient> general_video;
  std::shared_ptr<const VideoBackendClient> lipsync_video;
  std::shared_ptr<const JudgeClient> judge;
  /// Optional; without it the evaluation stage is skipped.
  std::shared_ptr<const RubricJudgeClient> rubric_judge;
};

/// Mock clients for a fixture song directory: fixture analyzers when
/// `raw/` exists (synthetic otherwise), the mock screenwriter, mock
/// backends writing stubs under `artifact_dir`, a scripted judge from
/// `<fixture>/judge.json` when present (hash judge otherwise) and the hash
/// rubric judge. Endpoints configured in `config` replace the mocks.
PipelineClients default_clients(const std::filesystem::path& fixture_dir,
                                const std::filesystem::path& artifact_dir,
                                const PipelineConfig& config);

struct RunOptions {
  std::filesystem::path job_dir;
  std::optional<std::uint64_t> crash_after;
  /// Stop once this stage has completed.
  std::optional<Stage> stop_after;
};

/// One song's pipeline bound to a job directory:
///   events.ndjson  context.json  script.json  plan.json  bank.json
///   prompts.json   manifest.json concat.txt   scores.json artifacts/
class Pipeline {
 public:
  Pipeline(SongMetadata song, PipelineConfig config, PipelineClients clients, RunOptions options);

  /// Runs every stage not yet completed, up to options.stop_after. Stage
  /// failures are recorded and rethrown; SimulatedCrash propagates as is.
  void run();

  JobStore& store() { return *store_; }
  const JobStore& store() const { return *store_; }
  const PipelineConfig& config() const { return config_; }
  const SongMetadata& song() const { return song_; }
  const std::filesystem::path& job_dir() const { return options_.job_dir; }

  /// Outputs of completed stages (loaded lazily from the job directory).
  std::optional<MusicContext> context() const;
  std::optional<ShotPlan> plan() const;
  std::optional<CharacterBank> bank() const;
  std::optional<AssemblyManifest> manifest() const;
  std::optional<nlohmann::json> scores() const;
  /// subclip_id -> {"image": prompt, "video": prompt, "descriptors": [...]}.
  std::optional<nlohmann::json> prompts() const;

  /// Invalidates `subclip_id` (state pending) and everything chained after
  /// it (state blocked) and reopens the generation stage.
  std::vector<std::string> invalidate(const std::string& subclip_id, bool include_self);

 private:
  void stage_analysis();
  void stage_planning();
  void stage_generation();
  void stage_verification();
  void stage_assembly();
  void stage_evaluation();

  /// Processes a chain in order, skipping finished subclips.
  void run_chain(const std::vector<std::string>& chain, const ShotPlan& plan,
                 const nlohmann::json& prompts);
  bool process_subclip(const SubClip& sc, const std::optional<std::string>& upstream_frame,
                       const nlohmann::json& prompt);

  std::filesystem::path path(std::string_view name) const { return options_.job_dir / name; }
  void write_artifact(std::string_view name, const std::string& content);
  SelectionPolicy selection_policy() const;

  SongMetadata song_;
  PipelineConfig config_;
  PipelineClients clients_;
  RunOptions options_;
  std::unique_ptr<JobStore> store_;
};

/// Convenience: build the pipeline, run it, return the final snapshot.
JobSnapshot run_pipeline(const SongMetadata& song, const PipelineConfig& config,
                         const PipelineClients& clients, const RunOptions& options);

/// Status document served to the review UI.
nlohmann::json status_to_json(const JobSnapshot& s);

inline constexpr int kPollIntervalMs = 1000;

/// Job-control operations over one song. The pipeline runs on a background
/// thread; mutations are refused with ConflictError while work is in
/// flight. Mutations carrying a request token are idempotent: replaying a
/// token returns the stored response without acting again.
class JobService {
 public:
  JobService(SongMetadata song, PipelineConfig config, PipelineClients clients, RunOptions options);
  ~JobService();

  JobService(const JobService&) = delete;
  JobService& operator=(const JobService&) = delete;

  /// Starts (or resumes) the pipeline in the background.
  void start();
  /// Blocks until background work is finished.
  void wait();
  bool busy() const { return busy_.load(); }

  const std::string& song_id() const { return pipeline_.song().song_id; }
  nlohmann::json status() const;
  nlohmann::json plan() const;
  nlohmann::json shots() const;
  nlohmann::json candidates(const std::string& subclip_id) const;
  nlohmann::json manifest() const;
  nlohmann::json scores() const;

  nlohmann::json regenerate(const std::string& subclip_id, const std::string& request_token);
  nlohmann::json approve(const std::string& subclip_id, const std::string& candidate_id,
                         const std::string& request_token);

  Pipeline& pipeline() { return pipeline_; }

 private:
  void launch();
  void require_subclip(const std::string& subclip_id) const;

  Pipeline pipeline_;
  mutable std::mutex mu_;
  std::thread worker_;
  std::atomic<bool> busy_{false};
  std::string last_error_;
};

}  // namespace mvforge

#endif  // MVFORGE_PIPELINE_HPP_
