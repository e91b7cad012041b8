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

// mvforge command-line entry point.
//
//   mvforge run --fixture tests/fixtures/songs/neon-harbor --job jobs/neon
//   mvforge plan --fixture ... --job ...          (stops after planning)
//   mvforge evaluate --videos out/ --judge scripted:cards.json --out eval/
//   mvforge correlate --human human.ndjson --model model.ndjson --out eval/
//   mvforge serve --fixture ... --job ... --port 8080
//
// Exit status: 0 success, 1 runtime error, 2 usage or configuration error,
// 3 the song finished with gaps (failed subclips).

#include <csignal>
#include <iostream>
#include <memory>
#include <optional>

#include "CLI11.hpp"
#include "mvforge/api_server.hpp"
#include "mvforge/errors.hpp"
#include "mvforge/pipeline.hpp"
#include "mvforge/util.hpp"

namespace {

using nlohmann::json;
using namespace mvforge;

struct SongArgs {
  std::string config;
  std::string fixture;
  std::string song_id;
  double duration_s = 0;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> ablate;
  std::string job;
  std::optional<std::uint64_t> crash_after;
};

void add_song_options(CLI::App* cmd, SongArgs& a) {
  cmd->add_option("--config", a.config, "pipeline config (JSON)")->check(CLI::ExistingFile);
  cmd->add_option("--fixture", a.fixture, "fixture song directory (context.json + raw/)")
      ->check(CLI::ExistingDirectory);
  cmd->add_option("--song-id", a.song_id, "song id when running on synthetic analyzers");
  cmd->add_option("--duration", a.duration_s, "song duration in seconds (synthetic analyzers)");
  cmd->add_option("--seed", a.seed, "seed for mocks and candidate generation");
  cmd->add_option("--ablate", a.ablate, "disable a component: lyrics, bank, verifier, lipsync")
      ->check(CLI::IsMember({"lyrics", "bank", "verifier", "lipsync"}));
  cmd->add_option("--job", a.job, "job directory (default: jobs/<song_id>)");
  cmd->add_option("--crash-after", a.crash_after, "simulate a crash after N logged events")
      ->group("");
}

PipelineConfig make_config(const SongArgs& a) {
  PipelineConfig c = a.config.empty() ? PipelineConfig{} : load_config(a.config);
  if (a.seed) c.seed = *a.seed;
  for (const auto& x : a.ablate) apply_ablation(c, x);
  c.validate();
  return c;
}

SongMetadata make_song(const SongArgs& a) {
  if (!a.fixture.empty()) return load_song_metadata(a.fixture);
  if (a.song_id.empty() || a.duration_s <= 0) {
    throw ConfigError("either --fixture or --song-id with --duration is required");
  }
  SongMetadata s;
  s.song_id = a.song_id;
  s.duration = quantize(a.duration_s);
  s.language_tag = "en";
  s.mix_audio_ref = "audio/" + a.song_id + ".wav";
  return s;
}

std::filesystem::path job_dir(const SongArgs& a, const SongMetadata& s) {
  return a.job.empty() ? std::filesystem::path("jobs") / s.song_id : std::filesystem::path(a.job);
}

int run_song(const SongArgs& a, std::optional<Stage> stop_after) {
  const auto config = make_config(a);
  const auto song = make_song(a);
  const auto dir = job_dir(a, song);
  auto clients = default_clients(a.fixture, dir / "artifacts", config);
  Pipeline p(song, config, std::move(clients), {dir, a.crash_after, stop_after});
  p.run();
  const auto snap = p.store().snapshot();
  json st = status_to_json(snap);
  st.erase("subclips");
  std::cout << st.dump(2) << "\n";
  if (const auto m = p.manifest(); m && !stop_after && !m->gaps().empty()) return 3;
  return 0;
}

std::unique_ptr<RubricJudgeClient> make_rubric_judge(const std::string& spec, std::uint64_t seed,
                                                     const PipelineConfig& config) {
  if (spec == "hash") return std::make_unique<HashRubricJudge>(seed);
  if (spec.starts_with("scripted:")) {
    return std::make_unique<ScriptedRubricJudge>(ScriptedRubricJudge::from_file(spec.substr(9)));
  }
  if (auto it = config.endpoints.find("rubric_judge"); it != config.endpoints.end()) {
    return std::make_unique<HttpRubricJudge>(spec, it->second);
  }
  throw ConfigError("judge '" + spec + "' needs endpoints.rubric_judge in the config "
                    "(or use 'hash' / 'scripted:<file>')");
}

// Every regular file in `dir` except audio is a video; audio pairs by stem.
std::vector<VideoInput> scan_videos(const std::filesystem::path& dir) {
  static const std::set<std::string> kAudio = {".wav", ".mp3", ".flac", ".m4a", ".ogg"};
  std::vector<VideoInput> out;
  std::map<std::string, std::string> audio;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && kAudio.count(to_lower(e.path().extension().string()))) {
      audio[e.path().stem().string()] = e.path().string();
    }
  }
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (!e.is_regular_file() || kAudio.count(to_lower(e.path().extension().string()))) continue;
    const auto stem = e.path().stem().string();
    out.push_back({stem, e.path().string(), audio.count(stem) ? audio[stem] : std::string()});
  }
  std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) { return x.video_id < y.video_id; });
  return out;
}

ApiServer* g_server = nullptr;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mvforge: music-video generation pipeline"};
  app.require_subcommand(1);

  SongArgs song_args;
  std::vector<std::pair<CLI::App*, std::optional<Stage>>> stage_cmds;
  const std::pair<const char*, std::optional<Stage>> verbs[] = {
      {"analyze", Stage::kAnalysis},     {"plan", Stage::kPlanning},
      {"generate", Stage::kGeneration},  {"verify", Stage::kVerification},
      {"assemble", Stage::kAssembly},    {"run", std::nullopt}};
  for (const auto& [name, stage] : verbs) {
    auto* cmd = app.add_subcommand(name, stage ? "run the pipeline through the " +
                                                     std::string(to_string(*stage)) + " stage"
                                               : std::string("run every stage"));
    add_song_options(cmd, song_args);
    stage_cmds.emplace_back(cmd, stage);
  }

  auto* eval = app.add_subcommand("evaluate", "score videos against the 12-criterion rubric");
  std::string videos, judge = "hash", eval_out, eval_config;
  std::uint64_t eval_seed = 0;
  int eval_parallel = 4;
  eval->add_option("--videos", videos, "directory of videos (audio paired by file stem)")
      ->required()
      ->check(CLI::ExistingDirectory);
  eval->add_option("--judge", judge, "hash | scripted:<file> | <name> (HTTP, see config)");
  eval->add_option("--out", eval_out, "output directory")->required();
  eval->add_option("--config", eval_config, "pipeline config with endpoints")->check(CLI::ExistingFile);
  eval->add_option("--seed", eval_seed, "seed for the hash judge");
  eval->add_option("--parallelism", eval_parallel, "concurrent judge calls")->check(CLI::PositiveNumber);

  auto* corr = app.add_subcommand("correlate", "Pearson correlation of model vs human scorecards");
  std::string human, model, corr_out;
  corr->add_option("--human", human, "human scorecards (ndjson)")->required()->check(CLI::ExistingFile);
  corr->add_option("--model", model, "model scorecards (ndjson)")->required()->check(CLI::ExistingFile);
  corr->add_option("--out", corr_out, "directory for correlations.json / correlations.txt");

  auto* serve = app.add_subcommand("serve", "run the pipeline and serve the /v1/ job-control API");
  add_song_options(serve, song_args);
  std::string host = "127.0.0.1";
  int port = 8080;
  serve->add_option("--host", host, "bind address");
  serve->add_option("--port", port, "port (0 = any)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    for (const auto& [cmd, stage] : stage_cmds) {
      if (*cmd) return run_song(song_args, stage);
    }
    if (*eval) {
      const PipelineConfig config = eval_config.empty() ? PipelineConfig{} : load_config(eval_config);
      const auto client = make_rubric_judge(judge, eval_seed, config);
      const auto inputs = scan_videos(videos);
      if (inputs.empty()) throw ConfigError("no videos in " + videos);
      const auto batch = evaluate_batch(inputs, default_rubric(), *client, eval_parallel);
      std::filesystem::create_directories(eval_out);
      write_scorecards(std::filesystem::path(eval_out) / "scorecards.ndjson", batch.cards);
      json cats = json::object();
      for (const auto& c : batch.cards) cats[c.video_id] = category_scores_to_json(aggregate(c));
      write_file_atomic(std::filesystem::path(eval_out) / "categories.json",
                        json({{"categories", cats}, {"errors", batch.errors}, {"warnings", batch.warnings}})
                                .dump(2) +
                            "\n");
      for (const auto& w : batch.warnings) std::cerr << "warning: " << w << "\n";
      for (const auto& [id, err] : batch.errors) std::cerr << "error: " << id << ": " << err << "\n";
      std::cout << batch.cards.size() << " card(s), " << batch.errors.size() << " error(s) -> "
                << eval_out << "\n";
      return batch.errors.empty() ? 0 : 1;
    }
    if (*corr) {
      const auto report = correlation_report(read_scorecards(human), read_scorecards(model));
      const auto text = report_to_text(report);
      if (!corr_out.empty()) {
        std::filesystem::create_directories(corr_out);
        write_file_atomic(std::filesystem::path(corr_out) / "correlations.json",
                          report_to_json(report).dump(2) + "\n");
        write_file_atomic(std::filesystem::path(corr_out) / "correlations.txt", text);
      }
      std::cout << text;
      return 0;
    }
    if (*serve) {
      const auto config = make_config(song_args);
      const auto song = make_song(song_args);
      const auto dir = job_dir(song_args, song);
      JobService service(song, config, default_clients(song_args.fixture, dir / "artifacts", config),
                         {dir, std::nullopt, std::nullopt});
      ApiServer server;
      server.add(service);
      const int bound = server.bind(host, port);
      g_server = &server;
      std::signal(SIGINT, [](int) {
        if (g_server) g_server->stop();
      });
      std::signal(SIGTERM, [](int) {
        if (g_server) g_server->stop();
      });
      service.start();
      std::cout << "serving " << song.song_id << " on http://" << host << ":" << bound << "/v1/" << std::endl;
      server.listen();
      g_server = nullptr;
      service.wait();
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const SimulatedCrash& e) {
    std::cerr << "crashed: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
