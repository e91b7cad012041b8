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

// Image/video backend contracts, backend routing, the keyframe-chaining
// dependency graph and the final audio routing record.

#ifndef MVFORGE_GENERATION_HPP_
#define MVFORGE_GENERATION_HPP_

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mvforge/context.hpp"
#include "mvforge/planner.hpp"
#include "mvforge/transport.hpp"

namespace mvforge {

enum class BackendKind { kGeneralRender, kLipSync };

std::string_view to_string(BackendKind kind);
BackendKind parse_backend_kind(std::string_view name);

enum class JobState { kPending, kBlocked, kRunning, kDone, kFailed };

std::string_view to_string(JobState state);
JobState parse_job_state(std::string_view name);

struct ImageRequest {
  std::string job_id;
  std::string prompt;
  std::uint64_t seed = 0;
};

/// Wire request of a video backend.
struct VideoRequest {
  std::string job_id;
  std::string prompt;
  std::string keyframe;
  std::int64_t duration_frames = 0;
  /// Vocal stem for lip-sync renders; absent for general renders.
  std::optional<std::string> audio;
  std::uint64_t seed = 0;
};

struct VideoResult {
  std::string artifact;
  std::string last_frame;
  std::int64_t duration_frames = 0;
};

struct BackendCapability {
  std::int64_t min_frames = 1;
  std::int64_t max_frames = 0;  // 0 = unbounded
  bool accepts_audio = false;
};

class ImageBackendClient {
 public:
  virtual ~ImageBackendClient() = default;
  /// Returns the keyframe image locator. Thread-safe.
  virtual std::string generate(const ImageRequest& request) const = 0;
};

class VideoBackendClient {
 public:
  virtual ~VideoBackendClient() = default;
  virtual BackendCapability capability() const = 0;
  /// Thread-safe; throws Transient/PermanentClientError.
  virtual VideoResult render(const VideoRequest& request) const = 0;
};

/// Deterministic stand-ins. Locators are content hashes of the request
/// (excluding job_id); when an artifact directory is given a small JSON
/// stub describing the request is written there under the locator name.
class MockImageBackend final : public ImageBackendClient {
 public:
  explicit MockImageBackend(std::filesystem::path artifact_dir = {})
      : dir_(std::move(artifact_dir)) {}
  std::string generate(const ImageRequest& request) const override;

 private:
  std::filesystem::path dir_;
};

class MockVideoBackend final : public VideoBackendClient {
 public:
  MockVideoBackend(BackendKind kind, std::filesystem::path artifact_dir = {})
      : kind_(kind), dir_(std::move(artifact_dir)) {}
  BackendCapability capability() const override;
  VideoResult render(const VideoRequest& request) const override;

 private:
  BackendKind kind_;
  std::filesystem::path dir_;
};

/// Predicate deciding whether a request should fail; returns the error to
/// throw (nullptr = pass through).
using FaultRule = std::function<std::exception_ptr(const std::string& job_id)>;

/// Wraps a backend and injects failures chosen by `rule`.
class FaultyImageBackend final : public ImageBackendClient {
 public:
  FaultyImageBackend(std::shared_ptr<const ImageBackendClient> inner, FaultRule rule)
      : inner_(std::move(inner)), rule_(std::move(rule)) {}
  std::string generate(const ImageRequest& request) const override;

 private:
  std::shared_ptr<const ImageBackendClient> inner_;
  FaultRule rule_;
};

class FaultyVideoBackend final : public VideoBackendClient {
 public:
  FaultyVideoBackend(std::shared_ptr<const VideoBackendClient> inner, FaultRule rule)
      : inner_(std::move(inner)), rule_(std::move(rule)) {}
  BackendCapability capability() const override { return inner_->capability(); }
  VideoResult render(const VideoRequest& request) const override;

 private:
  std::shared_ptr<const VideoBackendClient> inner_;
  FaultRule rule_;
};

/// Fails every job whose id starts with `prefix` with a permanent error.
FaultRule fail_jobs_with_prefix(std::string prefix);

/// POST <base>/image -> {"artifact"}; POST <base>/render -> {"artifact", "last_frame", "duration_frames"}.
class HttpImageBackend final : public ImageBackendClient {
 public:
  explicit HttpImageBackend(std::string base_url) : endpoint_(std::move(base_url)) {}
  std::string generate(const ImageRequest& request) const override;

 private:
  JsonHttpEndpoint endpoint_;
};

class HttpVideoBackend final : public VideoBackendClient {
 public:
  HttpVideoBackend(std::string base_url, BackendCapability capability)
      : endpoint_(std::move(base_url)), capability_(capability) {}
  BackendCapability capability() const override { return capability_; }
  VideoResult render(const VideoRequest& request) const override;

 private:
  JsonHttpEndpoint endpoint_;
  BackendCapability capability_;
};

/// lip_sync iff the shot asks for it, lip-sync is enabled and a vocal stem
/// exists. A request that cannot be honoured for lack of a stem downgrades
/// to general_render and appends a warning.
BackendKind route_backend(const Shot& shot, bool lipsync_enabled, bool has_vocal_stem,
                          std::vector<std::string>* warnings = nullptr);

/// Keyframe chaining: B depends on A iff A immediately precedes B and B
/// takes its keyframe from the previous last frame. Every node has at most
/// one upstream and one downstream, so the graph is a set of chains.
struct DependencyGraph {
  std::vector<std::string> nodes;  // plan order
  std::map<std::string, std::string> upstream;
  std::map<std::string, std::string> downstream;

  std::vector<std::string> roots() const;
  /// Chains in root order; each chain in dependency order.
  std::vector<std::vector<std::string>> chains() const;
  /// Kahn's algorithm; ties broken by plan order. Throws InternalError on a cycle.
  std::vector<std::string> topological_order() const;
  /// Every node transitively downstream of `id`, nearest first.
  std::vector<std::string> descendants(const std::string& id) const;
};

DependencyGraph build_dependency_graph(const ShotPlan& plan);

struct KeyframeCandidate {
  std::string candidate_id;
  std::string subclip_id;
  std::string artifact;
  std::uint64_t seed = 0;
  int attempt = 0;
  std::string prompt;

  friend bool operator==(const KeyframeCandidate&, const KeyframeCandidate&) = default;
};

struct ClipCandidate {
  std::string candidate_id;
  std::string subclip_id;
  std::string artifact;
  std::string last_frame;
  FrameTime duration;
  BackendKind backend = BackendKind::kGeneralRender;
  int attempt = 0;
  std::uint64_t seed = 0;
  std::string keyframe;
  std::string prompt;
  std::optional<std::string> audio;

  friend bool operator==(const ClipCandidate&, const ClipCandidate&) = default;
};

nlohmann::json keyframe_candidate_to_json(const KeyframeCandidate& c);
KeyframeCandidate keyframe_candidate_from_json(const nlohmann::json& j);
nlohmann::json clip_candidate_to_json(const ClipCandidate& c);
ClipCandidate clip_candidate_from_json(const nlohmann::json& j);

/// Final audio routing: the original mix covers the whole timeline; stems
/// only drove lip-sync renders.
struct AudioRecord {
  std::string mix_audio_ref;
  FrameSpan span{0, 1};
  std::optional<std::string> vocal_stem_ref;
  /// Subclips rendered with the vocal stem, plan order.
  std::vector<std::string> stem_driven;

  friend bool operator==(const AudioRecord&, const AudioRecord&) = default;
};

AudioRecord mux_plan(const ShotPlan& plan, const std::map<std::string, BackendKind>& routing,
                     const SongMetadata& song);

nlohmann::json audio_record_to_json(const AudioRecord& r);
AudioRecord audio_record_from_json(const nlohmann::json& j);

}  // namespace mvforge

#endif  // MVFORGE_GENERATION_HPP_
