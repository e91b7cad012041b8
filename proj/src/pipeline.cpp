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

#include "mvforge/pipeline.hpp"

#include <algorithm>
#include <array>

#include "mvforge/errors.hpp"
#include "mvforge/util.hpp"

namespace mvforge {
namespace {

using nlohmann::json;

constexpr std::string_view kEndpointRoles[] = {"analyzer", "screenwriter", "image",       "video",
                                               "lipsync",  "judge",        "rubric_judge"};

template <typename T>
void read_key(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

PlannerConstraints constraints_from(const json& j, PlannerConstraints c) {
  reject_unknown_keys(j,
                      {"min_shot", "max_shot", "min_subclip", "max_subclip",
                       "max_subclips_per_shot", "target_shot", "section_boundary_bonus"},
                      "config.constraints");
  auto frames = [&](const char* key, FrameTime& out) {
    if (j.contains(key)) out = FrameTime(j.at(key).get<std::int64_t>());
  };
  frames("min_shot", c.min_shot);
  frames("max_shot", c.max_shot);
  frames("min_subclip", c.min_subclip);
  frames("max_subclip", c.max_subclip);
  frames("target_shot", c.target_shot);
  read_key(j, "max_subclips_per_shot", c.max_subclips_per_shot);
  read_key(j, "section_boundary_bonus", c.section_boundary_bonus);
  return c;
}

std::string digest(std::string_view content) { return hex64(fnv1a64(content)); }

std::optional<json> read_json_file(const std::filesystem::path& p) {
  if (!std::filesystem::exists(p)) return std::nullopt;
  try {
    return json::parse(read_file(p));
  } catch (const json::exception& e) {
    throw ValidationError(p.string() + ": " + e.what());
  }
}

// Stable pick from a pool.
template <std::size_t N>
std::string_view pick(const std::array<std::string_view, N>& pool, std::uint64_t h) {
  return pool[h % N];
}

constexpr std::array<std::string_view, 8> kNames = {
    "Mira Chen", "Tomas Reyes", "Ayla Stone", "Jun Park",
    "Nadia Holt", "Elias Ward", "Sofia Lind", "Ravi Das"};
constexpr std::array<std::string_view, 6> kNationalities = {
    "Chinese", "Mexican", "Irish", "Korean", "Canadian", "Indian"};
constexpr std::array<std::string_view, 6> kHair = {
    "long straight black hair", "short curly brown hair", "shoulder-length auburn hair",
    "cropped silver hair", "wavy chestnut hair in a low ponytail", "buzzed dark hair"};
constexpr std::array<std::string_view, 5> kFaces = {
    "narrow face with high cheekbones", "round face with freckles", "angular jaw and thick brows",
    "soft oval face with dimples", "long face with a small scar on the chin"};
constexpr std::array<std::string_view, 5> kSkin = {"fair", "olive", "light brown", "deep brown",
                                                  "pale with warm undertones"};
constexpr std::array<std::string_view, 6> kOutfits = {
    "oversized denim jacket over a white tee", "long black trench coat",
    "red silk shirt and dark trousers", "yellow raincoat and rubber boots",
    "grey hoodie and cargo pants", "sequined stage jacket"};

int cast_size(const MusicCaption& caption) {
  auto it = caption.vocalist_attributes.find("count");
  if (it == caption.vocalist_attributes.end()) return 1;
  const auto v = to_lower(it->second);
  if (v == "duet" || v == "2" || v == "two") return 2;
  if (v == "group" || v == "choir" || v == "band") return 3;
  try {
    return std::clamp(std::stoi(v), 1, 3);
  } catch (const std::exception&) {
    return 1;
  }
}

std::string scene_for(SectionLabel label, const std::string& lead, const std::string& support,
                      std::size_t index) {
  switch (label) {
    case SectionLabel::kIntro:
      return "Wide establishing shot of a quiet harbor town at dawn; " + lead +
             " watches the boats from a pier.";
    case SectionLabel::kVerse:
      return index % 2 == 0 ? lead + " walks through a narrow rain-soaked street, singing softly."
                            : "Close-up of " + lead + " in a dim kitchen, singing to the window.";
    case SectionLabel::kChorus:
      return lead + " performs the chorus on a rooftop under neon light, arms open to the skyline.";
    case SectionLabel::kBridge:
      return lead + " and " + support + " share a silent moment in an empty night train.";
    case SectionLabel::kOutro:
      return lead + " walks away along the shoreline as the lights fade.";
    case SectionLabel::kInstrumental:
      return index % 2 == 0 ? "Slow tracking shot over the river at night, lanterns drifting."
                            : support + " cycles across an empty bridge in the early light.";
  }
  return "Abstract light patterns.";
}

}  // namespace

// ---- config ----------------------------------------------------------------

void PipelineConfig::validate() const {
  constraints.validate();
  if (candidates_per_item < 1) throw ConfigError("candidates_per_item must be >= 1");
  if (max_rounds < 1) throw ConfigError("max_rounds must be >= 1");
  if (parallelism < 1) throw ConfigError("parallelism must be >= 1");
  if (backend_retries < 0) throw ConfigError("backend_retries must be >= 0");
  if (retry_delay_ms < 0) throw ConfigError("retry_delay_ms must be >= 0");
  for (const auto& [role, url] : endpoints) {
    if (std::find(std::begin(kEndpointRoles), std::end(kEndpointRoles), role) ==
        std::end(kEndpointRoles)) {
      throw ConfigError("unknown endpoint role '" + role + "'");
    }
    if (url.empty()) throw ConfigError("endpoint '" + role + "' is empty");
  }
}

json config_to_json(const PipelineConfig& c) {
  return {{"constraints",
           {{"min_shot", c.constraints.min_shot.frames()},
            {"max_shot", c.constraints.max_shot.frames()},
            {"min_subclip", c.constraints.min_subclip.frames()},
            {"max_subclip", c.constraints.max_subclip.frames()},
            {"max_subclips_per_shot", c.constraints.max_subclips_per_shot},
            {"target_shot", c.constraints.target_shot.frames()},
            {"section_boundary_bonus", c.constraints.section_boundary_bonus}}},
          {"use_lyrics", c.use_lyrics},
          {"use_character_bank", c.use_character_bank},
          {"use_verifier", c.use_verifier},
          {"lipsync_enabled", c.lipsync_enabled},
          {"candidates_per_item", c.candidates_per_item},
          {"max_rounds", c.max_rounds},
          {"parallelism", c.parallelism},
          {"seed", c.seed},
          {"video_scoring", c.video_scoring == VideoScoring::kFull ? "full" : "feasibility_only"},
          {"backend_retries", c.backend_retries},
          {"retry_delay_ms", c.retry_delay_ms},
          {"evaluate", c.evaluate},
          {"endpoints", c.endpoints}};
}

PipelineConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  try {
    reject_unknown_keys(j,
                        {"constraints", "use_lyrics", "use_character_bank", "use_verifier",
                         "lipsync_enabled", "candidates_per_item", "max_rounds", "parallelism",
                         "seed", "video_scoring", "backend_retries", "retry_delay_ms", "evaluate",
                         "endpoints"},
                        "config");
    PipelineConfig c;
    if (j.contains("constraints")) c.constraints = constraints_from(j.at("constraints"), c.constraints);
    read_key(j, "use_lyrics", c.use_lyrics);
    read_key(j, "use_character_bank", c.use_character_bank);
    read_key(j, "use_verifier", c.use_verifier);
    read_key(j, "lipsync_enabled", c.lipsync_enabled);
    read_key(j, "candidates_per_item", c.candidates_per_item);
    read_key(j, "max_rounds", c.max_rounds);
    read_key(j, "parallelism", c.parallelism);
    read_key(j, "seed", c.seed);
    if (j.contains("video_scoring")) {
      const auto v = j.at("video_scoring").get<std::string>();
      if (v == "full") {
        c.video_scoring = VideoScoring::kFull;
      } else if (v == "feasibility_only") {
        c.video_scoring = VideoScoring::kFeasibilityOnly;
      } else {
        throw ConfigError("video_scoring must be 'full' or 'feasibility_only'");
      }
    }
    read_key(j, "backend_retries", c.backend_retries);
    read_key(j, "retry_delay_ms", c.retry_delay_ms);
    read_key(j, "evaluate", c.evaluate);
    if (j.contains("endpoints")) c.endpoints = j.at("endpoints").get<std::map<std::string, std::string>>();
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }
}

PipelineConfig load_config(const std::filesystem::path& path) {
  try {
    return config_from_json(json::parse(read_file(path)));
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void apply_ablation(PipelineConfig& c, std::string_view name) {
  if (name == "lyrics") {
    c.use_lyrics = false;
  } else if (name == "bank") {
    c.use_character_bank = false;
  } else if (name == "verifier") {
    c.use_verifier = false;
  } else if (name == "lipsync") {
    c.lipsync_enabled = false;
  } else {
    throw ConfigError("unknown ablation '" + std::string(name) +
                      "' (expected lyrics, bank, verifier or lipsync)");
  }
}

// ---- script ----------------------------------------------------------------

json script_to_json(const Script& s) {
  json cast = json::array(), shots = json::array();
  for (const auto& r : s.cast) cast.push_back(cast_record_to_json(r));
  for (const auto& sh : s.shots) {
    shots.push_back({{"shot_id", sh.shot_id}, {"description", sh.description}, {"mentions", sh.mentions}});
  }
  return {{"cast", std::move(cast)}, {"shots", std::move(shots)}};
}

Script script_from_json(const json& j) {
  reject_unknown_keys(j, {"cast", "shots"}, "script");
  try {
    Script s;
    for (const auto& r : j.at("cast")) s.cast.push_back(cast_record_from_json(r));
    for (const auto& sj : j.at("shots")) {
      reject_unknown_keys(sj, {"shot_id", "description", "mentions"}, "script shot");
      s.shots.push_back({sj.at("shot_id").get<std::string>(), sj.at("description").get<std::string>(),
                         sj.value("mentions", std::vector<std::string>{})});
    }
    return s;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("script: ") + e.what());
  }
}

Script MockScreenwriter::write(const ShotPlan& plan, const MusicContext& ctx) const {
  const auto base = hash_fields({"screenwriter", ctx.metadata.song_id}, seed_);
  const int leads = cast_size(ctx.caption);
  const auto& vocal = ctx.caption.vocalist_attributes;

  Script script;
  for (int i = 0; i <= leads; ++i) {
    const bool supporting = i == leads;
    CastRecord r;
    r.name = std::string(kNames[(base + static_cast<std::uint64_t>(i)) % kNames.size()]);
    const auto h = hash_fields({r.name}, base);
    if (!supporting) {
      if (auto g = vocal.find("gender"); g != vocal.end() && g->second != "mixed") {
        r.appearance["gender"] = g->second;
      }
      if (auto a = vocal.find("age_range"); a != vocal.end()) r.appearance["age"] = a->second;
      r.appearance["outfit"] = std::string(pick(kOutfits, h >> 5));
    } else {
      r.appearance["age"] = "late 60s";
      r.appearance["gender"] = (h >> 40) % 2 ? "male" : "female";
    }
    r.appearance["nationality"] = std::string(pick(kNationalities, h));
    r.appearance["hair"] = std::string(pick(kHair, h >> 11));
    r.appearance["face"] = std::string(pick(kFaces, h >> 17));
    r.appearance["skin_color"] = std::string(pick(kSkin, h >> 23));
    script.cast.push_back(std::move(r));
  }
  const std::string support = script.cast.back().name;

  for (std::size_t i = 0; i < plan.shots.size(); ++i) {
    const auto& shot = plan.shots[i];
    const std::string lead = script.cast[i % static_cast<std::size_t>(leads)].name;
    std::string text = scene_for(shot.section_label, lead, support, i);
    if (!shot.lyric_lines.empty()) text += " Lyric cue: \"" + shot.lyric_lines.front().text + "\".";
    std::vector<std::string> mentions;
    for (const auto& member : script.cast) {
      if (text.find(member.name) != std::string::npos) mentions.push_back(member.name);
    }
    script.shots.push_back({shot.shot_id, std::move(text), std::move(mentions)});
  }
  return script;
}

Script HttpScriptClient::write(const ShotPlan& plan, const MusicContext& ctx) const {
  const json reply = endpoint_.post("/script", {{"plan", plan_to_json(plan)}, {"context", context_to_json(ctx)}});
  try {
    return script_from_json(reply);
  } catch (const Error& e) {
    throw PermanentClientError(std::string("script reply: ") + e.what());
  }
}

PipelineClients default_clients(const std::filesystem::path& fixture_dir,
                                const std::filesystem::path& artifact_dir,
                                const PipelineConfig& config) {
  const auto& ep = config.endpoints;
  auto endpoint = [&](std::string_view role) -> const std::string* {
    auto it = ep.find(std::string(role));
    return it == ep.end() ? nullptr : &it->second;
  };
  PipelineClients c;
  if (const auto* url = endpoint("analyzer")) {
    c.analyzers = {std::make_shared<HttpAnalyzerClient>(AnalyzerRole::kCaptioner, *url),
                   std::make_shared<HttpAnalyzerClient>(AnalyzerRole::kStructureAnalyzer, *url),
                   std::make_shared<HttpAnalyzerClient>(AnalyzerRole::kSourceSeparator, *url),
                   std::make_shared<HttpAnalyzerClient>(AnalyzerRole::kLyricsTranscriber, *url)};
  } else if (!fixture_dir.empty() && std::filesystem::is_directory(fixture_dir / "raw")) {
    c.analyzers = fixture_analyzers(fixture_dir);
  } else {
    c.analyzers = synthetic_analyzers(config.seed);
  }
  if (const auto* url = endpoint("screenwriter")) {
    c.screenwriter = std::make_shared<HttpScriptClient>(*url);
  } else {
    c.screenwriter = std::make_shared<MockScreenwriter>(config.seed);
  }
  if (const auto* url = endpoint("image")) {
    c.image = std::make_shared<HttpImageBackend>(*url);
  } else {
    c.image = std::make_shared<MockImageBackend>(artifact_dir);
  }
  if (const auto* url = endpoint("video")) {
    c.general_video = std::make_shared<HttpVideoBackend>(*url, BackendCapability{1, 0, false});
  } else {
    c.general_video = std::make_shared<MockVideoBackend>(BackendKind::kGeneralRender, artifact_dir);
  }
  if (const auto* url = endpoint("lipsync")) {
    c.lipsync_video = std::make_shared<HttpVideoBackend>(*url, BackendCapability{1, 0, true});
  } else {
    c.lipsync_video = std::make_shared<MockVideoBackend>(BackendKind::kLipSync, artifact_dir);
  }
  if (const auto* url = endpoint("judge")) {
    c.judge = std::make_shared<HttpJudgeClient>(*url);
  } else if (!fixture_dir.empty() && std::filesystem::exists(fixture_dir / "judge.json")) {
    c.judge = ScriptedJudge::from_file((fixture_dir / "judge.json").string());
  } else {
    c.judge = std::make_shared<HashJudge>(config.seed);
  }
  if (const auto* url = endpoint("rubric_judge")) {
    c.rubric_judge = std::make_shared<HttpRubricJudge>("remote", *url);
  } else {
    c.rubric_judge = std::make_shared<HashRubricJudge>(config.seed);
  }
  return c;
}

// ---- pipeline --------------------------------------------------------------

Pipeline::Pipeline(SongMetadata song, PipelineConfig config, PipelineClients clients,
                   RunOptions options)
    : song_(std::move(song)),
      config_(std::move(config)),
      clients_(std::move(clients)),
      options_(std::move(options)) {
  config_.validate();
  if (options_.job_dir.empty()) throw ConfigError("a job directory is required");
  std::filesystem::create_directories(options_.job_dir);
  store_ = std::make_unique<JobStore>(path("events.ndjson"), options_.crash_after);
  const auto snap = store_->snapshot();
  if (snap.song_id.empty()) {
    store_->append({{"type", "song"}, {"song_id", song_.song_id}});
  } else if (snap.song_id != song_.song_id) {
    throw ConflictError("job directory belongs to song '" + snap.song_id + "'");
  }
}

void Pipeline::write_artifact(std::string_view name, const std::string& content) {
  write_file_atomic(path(name), content);
  store_->append({{"type", "artifact"}, {"name", name}, {"digest", digest(content)}});
}

SelectionPolicy Pipeline::selection_policy() const {
  SelectionPolicy p;
  p.mode = config_.use_verifier ? SelectionMode::kGateThenArgmax : SelectionMode::kAcceptFirst;
  p.video_scoring = config_.video_scoring;
  p.max_rounds = config_.max_rounds;
  return p;
}

void Pipeline::run() {
  using Step = void (Pipeline::*)();
  const std::pair<Stage, Step> steps[] = {
      {Stage::kAnalysis, &Pipeline::stage_analysis},
      {Stage::kPlanning, &Pipeline::stage_planning},
      {Stage::kGeneration, &Pipeline::stage_generation},
      {Stage::kVerification, &Pipeline::stage_verification},
      {Stage::kAssembly, &Pipeline::stage_assembly},
      {Stage::kEvaluation, &Pipeline::stage_evaluation},
  };
  for (const auto& [stage, step] : steps) {
    if (!store_->snapshot().completed.count(stage)) {
      store_->append({{"type", "stage"}, {"stage", to_string(stage)}, {"status", "started"}});
      try {
        (this->*step)();
      } catch (const Error& e) {
        store_->append({{"type", "stage"},
                        {"stage", to_string(stage)},
                        {"status", "failed"},
                        {"cause", e.what()}});
        throw;
      }
      store_->append({{"type", "stage"}, {"stage", to_string(stage)}, {"status", "completed"}});
    }
    if (options_.stop_after && *options_.stop_after == stage) return;
  }
  if (store_->snapshot().stage != Stage::kDone) {
    store_->append({{"type", "stage"}, {"stage", "done"}, {"status", "started"}});
  }
}

void Pipeline::stage_analysis() {
  FetchOptions opts;
  opts.retry = RetryPolicy{config_.backend_retries, std::chrono::milliseconds(config_.retry_delay_ms)};
  if (!config_.use_lyrics) opts.skip.insert(AnalyzerRole::kLyricsTranscriber);
  const auto bundle = fetch_analysis(song_, clients_.analyzers, opts);
  auto norm = normalize_bundle(bundle, song_);
  if (!config_.use_lyrics) {
    norm.context.lyrics.clear();
    norm.warnings.erase(std::remove_if(norm.warnings.begin(), norm.warnings.end(),
                                       [](const std::string& w) { return w.starts_with("no lyrics"); }),
                        norm.warnings.end());
    norm.warnings.push_back("lyrics ablation: planning from structure only");
  }
  for (const auto& w : norm.warnings) store_->append({{"type", "warning"}, {"message", "analysis: " + w}});
  const auto violations = validate_context(norm.context);
  if (!violations.empty()) {
    throw ValidationError("normalized context is invalid: " + violations.front().field + " " +
                          violations.front().rule);
  }
  write_file_atomic(path("raw_analysis.json"), bundle_to_json(bundle).dump(2) + "\n");
  write_artifact("context.json", context_to_json(norm.context).dump(2) + "\n");
}

void Pipeline::stage_planning() {
  const auto ctx = context();
  if (!ctx) throw InternalError("planning without a context");
  auto plan = segment_song(*ctx, config_.constraints);
  plan = assign_lipsync_flags(plan, *ctx,
                              config_.lipsync_enabled ? default_lipsync_policy() : never_lipsync_policy());
  const Script script = clients_.screenwriter->write(plan, *ctx);
  std::vector<std::string> warnings;
  if (plan.undersized) warnings.push_back("song is shorter than the minimum shot; planned one undersized shot");

  std::optional<CharacterBank> bank;
  std::vector<ShotScript> shot_scripts;
  for (const auto& s : script.shots) {
    if (!plan.find_shot(s.shot_id)) throw ValidationError("script names unknown shot " + s.shot_id);
  }
  if (config_.use_character_bank) {
    auto built = build_bank(song_.song_id, script.cast);
    for (const auto& w : built.warnings) warnings.push_back("bank: " + w);
    bank = std::move(built.bank);
    for (const auto& s : script.shots) {
      ShotScript mapped{s.shot_id, s.description, {}};
      for (const auto& m : s.mentions) mapped.mentions.push_back(match(*bank, m).character_id);
      shot_scripts.push_back(std::move(mapped));
    }
  } else {
    shot_scripts = script.shots;
  }
  plan = attach_script(plan, shot_scripts);

  const bool has_stem = ctx->metadata.vocal_stem_ref.has_value();
  json prompts = json::object();
  json registered = json::array();
  for (const auto& shot : plan.shots) {
    std::string description = shot.description.value_or("");
    if (description.empty()) {
      description = "Shot " + shot.shot_id + " (" + std::string(to_string(shot.section_label)) + ").";
      warnings.push_back(shot.shot_id + ": screenwriter left no description");
    }
    std::string shot_prompt = description;
    json descriptors = json::array();
    if (bank) {
      std::vector<CharacterProfile> profiles;
      for (const auto& id : shot.cast) {
        profiles.push_back(*bank->find(id));
        descriptors.push_back(profiles.back().descriptor_block);
      }
      shot_prompt = inject(description, profiles);
    }
    const auto backend = route_backend(shot, config_.lipsync_enabled, has_stem, &warnings);
    std::vector<const SubClip*> parts;
    for (const auto& sc : plan.subclips) {
      if (sc.parent_shot == shot.shot_id) parts.push_back(&sc);
    }
    for (std::size_t i = 0; i < parts.size(); ++i) {
      const auto& sc = *parts[i];
      prompts[sc.subclip_id] = {
          {"image", shot_prompt},
          {"video", "Motion segment " + std::to_string(i + 1) + " of " + std::to_string(parts.size()) +
                        ", continuous camera movement. " + shot_prompt},
          {"descriptors", descriptors}};
      registered.push_back({{"subclip_id", sc.subclip_id},
                            {"backend", to_string(backend)},
                            {"state", sc.keyframe_source == KeyframeSource::kGeneratedImage ? "pending"
                                                                                            : "blocked"}});
    }
  }

  for (const auto& w : warnings) store_->append({{"type", "warning"}, {"message", "planning: " + w}});
  write_artifact("script.json", script_to_json(script).dump(2) + "\n");
  if (bank) {
    write_artifact("bank.json", bank_to_json(*bank).dump(2) + "\n");
  } else {
    std::filesystem::remove(path("bank.json"));
  }
  write_artifact("prompts.json", prompts.dump(2) + "\n");
  write_artifact("plan.json", plan_to_json(plan).dump(2) + "\n");
  store_->append({{"type", "subclips_registered"}, {"subclips", std::move(registered)}});
}

void Pipeline::stage_generation() {
  const auto plan = this->plan();
  const auto prompts = this->prompts();
  if (!plan || !prompts) throw InternalError("generation without a plan");
  const auto chains = build_dependency_graph(*plan).chains();

  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr first_error;
  auto worker = [&] {
    for (std::size_t i = next++; i < chains.size(); i = next++) {
      try {
        run_chain(chains[i], *plan, *prompts);
      } catch (...) {
        std::lock_guard lock(err_mu);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  const int n = std::max(1, std::min(config_.parallelism, static_cast<int>(chains.size())));
  std::vector<std::thread> pool;
  for (int i = 0; i < n; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);

  const auto snap = store_->snapshot();
  for (const auto& [id, rec] : snap.subclips) {
    if (rec.state != JobState::kDone && rec.state != JobState::kFailed) {
      throw InternalError("subclip " + id + " left in state " + std::string(to_string(rec.state)));
    }
  }
}

void Pipeline::run_chain(const std::vector<std::string>& chain, const ShotPlan& plan,
                         const json& prompts) {
  std::optional<std::string> upstream_frame;
  std::string failed_upstream;
  for (const auto& id : chain) {
    const auto rec = store_->snapshot().subclips.at(id);
    const SubClip* sc = plan.find_subclip(id);
    if (!sc) throw InternalError("subclip " + id + " missing from plan");
    if (rec.state == JobState::kDone) {
      upstream_frame = rec.selected()->last_frame;
      failed_upstream.clear();
      continue;
    }
    if (rec.state == JobState::kFailed) {
      upstream_frame.reset();
      failed_upstream = id;
      continue;
    }
    if (!failed_upstream.empty() && sc->keyframe_source == KeyframeSource::kPreviousLastFrame) {
      store_->append({{"type", "job_state"},
                      {"subclip", id},
                      {"state", "failed"},
                      {"failure", "upstream " + failed_upstream + " failed"}});
      continue;
    }
    if (process_subclip(*sc, upstream_frame, prompts.at(id))) {
      upstream_frame = store_->snapshot().subclips.at(id).selected()->last_frame;
    } else {
      upstream_frame.reset();
      failed_upstream = id;
    }
  }
}

bool Pipeline::process_subclip(const SubClip& sc, const std::optional<std::string>& upstream_frame,
                               const json& prompt) {
  const auto rec = store_->snapshot().subclips.at(sc.subclip_id);
  const int epoch = rec.epoch;
  int attempt = rec.attempts;
  const int k = config_.candidates_per_item;
  const auto policy = selection_policy();
  const RetryPolicy retry{config_.backend_retries, std::chrono::milliseconds(config_.retry_delay_ms)};
  const std::string stem = "e" + std::to_string(epoch);
  const auto image_prompt = prompt.at("image").get<std::string>();
  const auto video_prompt = prompt.at("video").get<std::string>();
  const auto descriptors = prompt.at("descriptors").get<std::vector<std::string>>();
  const std::string& id = sc.subclip_id;

  store_->append({{"type", "subclip_started"}, {"subclip", id}, {"epoch", epoch}});
  auto observe = [&](const char* type) {
    return [this, &id, type](int round, const std::vector<Verdict>& verdicts) {
      if (verdicts.empty()) return;
      json vs = json::array();
      for (const auto& v : verdicts) vs.push_back(verdict_to_json(v));
      store_->append({{"type", type}, {"subclip", id}, {"round", round}, {"verdicts", std::move(vs)}});
    };
  };

  try {
    std::string keyframe;
    if (sc.keyframe_source == KeyframeSource::kGeneratedImage) {
      std::map<std::string, std::string> artifact_of;
      auto source = [&](int round) {
        std::vector<JudgeRequest> reqs;
        json cands = json::array();
        for (int i = 0; i < k; ++i) {
          const std::string cid = id + ":" + stem + ":k" + std::to_string(round) + ":" + std::to_string(i);
          const ImageRequest req{cid, image_prompt, hash_fields({cid}, config_.seed)};
          const std::string art = with_retries(retry, [&] {
            ++attempt;
            return clients_.image->generate(req);
          });
          cands.push_back(keyframe_candidate_to_json({cid, id, art, req.seed, attempt, image_prompt}));
          artifact_of[cid] = art;
          reqs.push_back({Modality::kImage, cid, image_prompt, art, descriptors});
        }
        store_->append({{"type", "keyframe_candidates"}, {"subclip", id}, {"round", round}, {"candidates", cands}});
        return reqs;
      };
      const auto outcome = regeneration_loop(source, *clients_.judge, policy, observe("image_verdicts"));
      keyframe = artifact_of.at(*outcome.selected);
      store_->append({{"type", "keyframe_selected"},
                      {"subclip", id},
                      {"candidate_id", *outcome.selected},
                      {"locator", keyframe},
                      {"fallback", outcome.fallback_accepted}});
    } else {
      if (!upstream_frame) throw InternalError(id + " is chained but has no upstream frame");
      keyframe = *upstream_frame;
      store_->append({{"type", "keyframe_selected"},
                      {"subclip", id},
                      {"candidate_id", nullptr},
                      {"locator", keyframe},
                      {"fallback", false}});
    }

    const bool lipsync = rec.backend == BackendKind::kLipSync;
    const auto& client = lipsync ? clients_.lipsync_video : clients_.general_video;
    std::optional<std::string> audio;
    if (lipsync) {
      const auto ctx = context();
      audio = ctx ? ctx->metadata.vocal_stem_ref : std::nullopt;
      if (!audio) throw InternalError(id + " routed to lip-sync without a vocal stem");
    }
    const std::int64_t frames = sc.span.duration_frames();
    auto source = [&](int round) {
      std::vector<JudgeRequest> reqs;
      json cands = json::array();
      for (int i = 0; i < k; ++i) {
        const std::string cid = id + ":" + stem + ":v" + std::to_string(round) + ":" + std::to_string(i);
        const VideoRequest req{cid, video_prompt, keyframe, frames, audio, hash_fields({cid}, config_.seed)};
        const VideoResult res = with_retries(retry, [&] {
          ++attempt;
          return client->render(req);
        });
        if (res.duration_frames != frames) {
          throw PermanentClientError(cid + " rendered " + std::to_string(res.duration_frames) +
                                     " frames, planned " + std::to_string(frames));
        }
        ClipCandidate c{cid,      id,      res.artifact, res.last_frame, FrameTime(frames), rec.backend,
                        attempt,  req.seed, keyframe,    video_prompt,   audio};
        cands.push_back(clip_candidate_to_json(c));
        reqs.push_back({Modality::kVideo, cid, video_prompt, res.artifact, descriptors});
      }
      store_->append({{"type", "clip_candidates"}, {"subclip", id}, {"round", round}, {"candidates", cands}});
      return reqs;
    };
    const auto outcome = regeneration_loop(source, *clients_.judge, policy, observe("video_verdicts"));
    store_->append({{"type", "clip_selected"},
                    {"subclip", id},
                    {"candidate_id", *outcome.selected},
                    {"fallback_accepted", outcome.fallback_accepted},
                    {"human_override", false}});
    return true;
  } catch (const Error& e) {
    store_->append({{"type", "job_state"},
                    {"subclip", id},
                    {"state", "failed"},
                    {"failure", e.what()},
                    {"attempts", attempt}});
    return false;
  }
}

void Pipeline::stage_verification() {
  const auto plan = this->plan();
  const auto snap = store_->snapshot();
  for (const auto& id : snap.order) {
    const auto& rec = snap.subclips.at(id);
    if (rec.state == JobState::kFailed) {
      store_->append({{"type", "warning"}, {"message", "verification: " + id + " failed: " + rec.failure}});
      continue;
    }
    const auto* sel = rec.selected();
    if (!sel) throw InternalError(id + " is done without a selected clip");
    const auto* sc = plan->find_subclip(id);
    if (sel->duration.frames() != sc->span.duration_frames()) {
      throw InternalError(id + ": selected clip duration differs from the plan");
    }
    if (config_.use_verifier && !rec.fallback_accepted && !rec.human_override) {
      const bool gated = std::any_of(rec.video_verdicts.begin(), rec.video_verdicts.end(), [&](const Verdict& v) {
        return v.candidate_id == sel->candidate_id && v.gate_pass;
      });
      if (!gated) throw InternalError(id + ": selected clip never passed the gate");
    }
    if (rec.fallback_accepted) {
      store_->append({{"type", "warning"},
                      {"message", "verification: " + id + " accepted best-seen fallback " + sel->candidate_id}});
    }
  }
}

void Pipeline::stage_assembly() {
  const auto plan = this->plan();
  const auto ctx = context();
  const auto snap = store_->snapshot();
  std::map<std::string, Selection> selections;
  std::map<std::string, BackendKind> routing;
  for (const auto& [id, rec] : snap.subclips) {
    routing[id] = rec.backend;
    Selection s;
    if (rec.state == JobState::kDone && rec.selected()) {
      s.clip = *rec.selected();
      s.fallback_accepted = rec.fallback_accepted;
      s.human_override = rec.human_override;
    } else {
      s.failure = rec.failure.empty() ? std::string(to_string(rec.state)) : rec.failure;
    }
    selections.emplace(id, std::move(s));
  }
  const auto audio = mux_plan(*plan, routing, ctx->metadata);
  const auto manifest = assemble(*plan, selections, audio);
  write_artifact("manifest.json", manifest_to_json(manifest).dump(2) + "\n");
  if (manifest.gaps().empty()) {
    write_artifact("concat.txt", export_concat_list(manifest));
  } else {
    std::filesystem::remove(path("concat.txt"));
    store_->append({{"type", "warning"},
                    {"message", "assembly: " + std::to_string(manifest.gaps().size()) +
                                    " gap(s); concat listing not exported"}});
  }
}

void Pipeline::stage_evaluation() {
  if (!config_.evaluate || !clients_.rubric_judge) {
    store_->append({{"type", "warning"}, {"message", "evaluation: skipped"}});
    return;
  }
  std::vector<std::string> warnings;
  try {
    const auto card = judge_video(song_.song_id, "manifest.json", song_.mix_audio_ref, default_rubric(),
                                  *clients_.rubric_judge, &warnings);
    write_scorecards(path("scorecards.ndjson"), {card});
    json doc = {{"card", card_to_json(card)},
                {"categories", category_scores_to_json(aggregate(card))},
                {"warnings", warnings}};
    write_artifact("scores.json", doc.dump(2) + "\n");
  } catch (const JudgingError& e) {
    warnings.push_back(e.what());
  }
  for (const auto& w : warnings) store_->append({{"type", "warning"}, {"message", "evaluation: " + w}});
}

std::optional<MusicContext> Pipeline::context() const {
  auto j = read_json_file(path("context.json"));
  return j ? std::optional(context_from_json(*j)) : std::nullopt;
}

std::optional<ShotPlan> Pipeline::plan() const {
  auto j = read_json_file(path("plan.json"));
  return j ? std::optional(plan_from_json(*j)) : std::nullopt;
}

std::optional<CharacterBank> Pipeline::bank() const {
  auto j = read_json_file(path("bank.json"));
  return j ? std::optional(bank_from_json(*j)) : std::nullopt;
}

std::optional<AssemblyManifest> Pipeline::manifest() const {
  auto j = read_json_file(path("manifest.json"));
  return j ? std::optional(manifest_from_json(*j)) : std::nullopt;
}

std::optional<json> Pipeline::scores() const { return read_json_file(path("scores.json")); }

std::optional<json> Pipeline::prompts() const { return read_json_file(path("prompts.json")); }

std::vector<std::string> Pipeline::invalidate(const std::string& subclip_id, bool include_self) {
  const auto plan = this->plan();
  if (!plan) throw NotFoundError("no plan yet");
  const auto snap = store_->snapshot();
  if (!snap.subclips.count(subclip_id)) throw NotFoundError("unknown subclip " + subclip_id);
  std::vector<std::string> touched;
  if (include_self) {
    store_->append({{"type", "invalidated"},
                    {"subclip", subclip_id},
                    {"epoch", snap.subclips.at(subclip_id).epoch + 1},
                    {"state", "pending"}});
    touched.push_back(subclip_id);
  }
  for (const auto& d : build_dependency_graph(*plan).descendants(subclip_id)) {
    store_->append({{"type", "invalidated"},
                    {"subclip", d},
                    {"epoch", snap.subclips.at(d).epoch + 1},
                    {"state", "blocked"}});
    touched.push_back(d);
  }
  store_->append({{"type", "stage"}, {"stage", "generation"}, {"status", "started"}});
  return touched;
}

JobSnapshot run_pipeline(const SongMetadata& song, const PipelineConfig& config,
                         const PipelineClients& clients, const RunOptions& options) {
  Pipeline p(song, config, clients, options);
  p.run();
  return p.store().snapshot();
}

json status_to_json(const JobSnapshot& s) {
  json subclips = json::array();
  std::map<std::string, int> counts;
  for (const auto& id : s.order) {
    const auto& r = s.subclips.at(id);
    ++counts[std::string(to_string(r.state))];
    subclips.push_back({{"subclip_id", id},
                        {"state", to_string(r.state)},
                        {"backend", to_string(r.backend)},
                        {"epoch", r.epoch},
                        {"attempts", r.attempts},
                        {"selected_clip", r.selected_clip ? json(*r.selected_clip) : json(nullptr)},
                        {"fallback_accepted", r.fallback_accepted},
                        {"human_override", r.human_override},
                        {"failure", r.failure},
                        {"updated_seq", r.updated_seq}});
  }
  json completed = json::array();
  for (auto st : s.completed) completed.push_back(to_string(st));
  return {{"song_id", s.song_id},
          {"stage", to_string(s.stage)},
          {"completed", std::move(completed)},
          {"failure", s.failure},
          {"seq", s.seq},
          {"poll_interval_ms", kPollIntervalMs},
          {"counts", counts},
          {"subclips", std::move(subclips)},
          {"warnings", s.warnings}};
}

// ---- job control -----------------------------------------------------------

JobService::JobService(SongMetadata song, PipelineConfig config, PipelineClients clients,
                       RunOptions options)
    : pipeline_(std::move(song), std::move(config), std::move(clients), std::move(options)) {}

JobService::~JobService() { wait(); }

void JobService::launch() {
  if (worker_.joinable()) worker_.join();
  busy_ = true;
  worker_ = std::thread([this] {
    try {
      pipeline_.run();
    } catch (const std::exception& e) {
      std::lock_guard lock(mu_);
      last_error_ = e.what();
    }
    busy_ = false;
  });
}

void JobService::start() {
  std::lock_guard lock(mu_);
  if (busy_) return;
  launch();
}

void JobService::wait() {
  std::thread t;
  {
    std::lock_guard lock(mu_);
    t = std::move(worker_);
  }
  if (t.joinable()) t.join();
}

json JobService::status() const {
  json j = status_to_json(pipeline_.store().snapshot());
  j["busy"] = busy_.load();
  std::lock_guard lock(mu_);
  if (!last_error_.empty()) j["error"] = last_error_;
  return j;
}

json JobService::plan() const {
  const auto p = pipeline_.plan();
  if (!p) throw NotFoundError("no plan yet");
  return plan_to_json(*p);
}

json JobService::shots() const {
  const auto p = pipeline_.plan();
  if (!p) throw NotFoundError("no plan yet");
  const auto snap = pipeline_.store().snapshot();
  json out = json::array();
  for (const auto& shot : p->shots) {
    json subs = json::array();
    for (const auto& sc : p->subclips) {
      if (sc.parent_shot != shot.shot_id) continue;
      auto it = snap.subclips.find(sc.subclip_id);
      subs.push_back({{"subclip_id", sc.subclip_id},
                      {"span", span_to_json(sc.span)},
                      {"keyframe_source", to_string(sc.keyframe_source)},
                      {"state", it == snap.subclips.end() ? "pending" : to_string(it->second.state)}});
    }
    json lyrics = json::array();
    for (const auto& l : shot.lyric_lines) lyrics.push_back({{"text", l.text}, {"span", span_to_json(l.span)}});
    out.push_back({{"shot_id", shot.shot_id},
                   {"span", span_to_json(shot.span)},
                   {"section_label", to_string(shot.section_label)},
                   {"lyric_lines", std::move(lyrics)},
                   {"description", shot.description ? json(*shot.description) : json(nullptr)},
                   {"lipsync", shot.lipsync},
                   {"continuity_from_previous", shot.continuity_from_previous},
                   {"cast", shot.cast},
                   {"subclips", std::move(subs)}});
  }
  return out;
}

void JobService::require_subclip(const std::string& subclip_id) const {
  if (!pipeline_.store().snapshot().subclips.count(subclip_id)) {
    throw NotFoundError("unknown subclip " + subclip_id);
  }
}

json JobService::candidates(const std::string& subclip_id) const {
  const auto snap = pipeline_.store().snapshot();
  auto it = snap.subclips.find(subclip_id);
  if (it == snap.subclips.end()) throw NotFoundError("unknown subclip " + subclip_id);
  return subclip_record_to_json(it->second);
}

json JobService::manifest() const {
  const auto m = pipeline_.manifest();
  if (!m) throw NotFoundError("no manifest yet");
  return manifest_to_json(*m);
}

json JobService::scores() const {
  const auto s = pipeline_.scores();
  if (!s) throw NotFoundError("no scores yet");
  return *s;
}

json JobService::regenerate(const std::string& subclip_id, const std::string& request_token) {
  std::lock_guard lock(mu_);
  const auto snap = pipeline_.store().snapshot();
  if (!request_token.empty()) {
    if (auto it = snap.tokens.find(request_token); it != snap.tokens.end()) return it->second;
  }
  require_subclip(subclip_id);
  if (busy_) throw ConflictError("generation in progress; retry once the song is idle");
  const auto touched = pipeline_.invalidate(subclip_id, true);
  json response = {{"accepted", true},
                   {"action", "regenerate"},
                   {"subclip_id", subclip_id},
                   {"epoch", snap.subclips.at(subclip_id).epoch + 1},
                   {"invalidated", touched}};
  if (!request_token.empty()) {
    pipeline_.store().append({{"type", "token"}, {"token", request_token}, {"response", response}});
  }
  launch();
  return response;
}

json JobService::approve(const std::string& subclip_id, const std::string& candidate_id,
                         const std::string& request_token) {
  std::lock_guard lock(mu_);
  const auto snap = pipeline_.store().snapshot();
  if (!request_token.empty()) {
    if (auto it = snap.tokens.find(request_token); it != snap.tokens.end()) return it->second;
  }
  require_subclip(subclip_id);
  if (busy_) throw ConflictError("generation in progress; retry once the song is idle");
  const auto& rec = snap.subclips.at(subclip_id);
  const bool known = std::any_of(rec.clips.begin(), rec.clips.end(),
                                 [&](const ClipCandidate& c) { return c.candidate_id == candidate_id; });
  if (!known) throw NotFoundError("subclip " + subclip_id + " has no candidate " + candidate_id);
  pipeline_.store().append({{"type", "clip_selected"},
                            {"subclip", subclip_id},
                            {"candidate_id", candidate_id},
                            {"fallback_accepted", false},
                            {"human_override", true}});
  const auto touched = pipeline_.invalidate(subclip_id, false);
  json response = {{"accepted", true},
                   {"action", "approve"},
                   {"subclip_id", subclip_id},
                   {"candidate_id", candidate_id},
                   {"human_override", true},
                   {"invalidated", touched}};
  if (!request_token.empty()) {
    pipeline_.store().append({{"type", "token"}, {"token", request_token}, {"response", response}});
  }
  launch();
  return response;
}

}  // namespace mvforge
