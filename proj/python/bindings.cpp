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


// Python bindings. Structured values cross the boundary as JSON text; the
// package's __init__ turns them into dicts.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mvforge/errors.hpp"
#include "mvforge/evaluation.hpp"
#include "mvforge/frame.hpp"
#include "mvforge/pipeline.hpp"
#include "mvforge/planner.hpp"
#include "mvforge/verifier.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

using namespace mvforge;

Rounding parse_rounding(const std::string& mode) {
  if (mode == "nearest") return Rounding::kNearest;
  if (mode == "floor") return Rounding::kFloor;
  if (mode == "ceil") return Rounding::kCeil;
  throw ConfigError("rounding must be nearest, floor or ceil");
}

VideoScoring parse_scoring(const std::string& mode) {
  if (mode == "full") return VideoScoring::kFull;
  if (mode == "feasibility") return VideoScoring::kFeasibilityOnly;
  throw ConfigError("scoring must be full or feasibility");
}

std::vector<ScoreCard> cards_from(const std::string& text) {
  std::vector<ScoreCard> out;
  for (const auto& j : json::parse(text)) out.push_back(card_from_json(j));
  return out;
}

std::string plan(const std::string& context) {
  return plan_to_json(segment_song(context_from_json(json::parse(context)))).dump();
}

std::string category_means(const std::map<std::string, std::string>& means) {
  std::map<std::string, Rational> exact;
  for (const auto& [code, value] : means) exact[code] = Rational::parse(value);
  return category_scores_to_json(aggregate_means(exact)).dump();
}

std::string category_scores(const std::string& card) {
  return category_scores_to_json(aggregate(card_from_json(json::parse(card)))).dump();
}

std::string correlate(const std::string& human, const std::string& model) {
  return report_to_json(correlation_report(cards_from(human), cards_from(model))).dump();
}

std::optional<std::size_t> select_verdict(const std::string& verdicts, const std::string& scoring) {
  std::vector<Verdict> vs;
  for (const auto& j : json::parse(verdicts)) vs.push_back(verdict_from_json(j));
  return select_index(vs, parse_scoring(scoring));
}

std::string run_fixture(const std::string& fixture, const std::string& job_dir, const std::string& config) {
  const auto cfg = config.empty() ? PipelineConfig{} : config_from_json(json::parse(config));
  cfg.validate();
  const auto song = load_song_metadata(fixture);
  const std::filesystem::path dir(job_dir);
  const auto clients = default_clients(fixture, dir / "artifacts", cfg);
  py::gil_scoped_release release;
  return status_to_json(run_pipeline(song, cfg, clients, {dir, std::nullopt, std::nullopt})).dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "mvforge native core";

  // Translators run most-recent first, so the base goes in before its subclasses.
  const auto base = py::register_exception<mvforge::Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<mvforge::ConfigError>(m, "ConfigError", base);
  py::register_exception<mvforge::ValidationError>(m, "ValidationError", base);
  py::register_exception<mvforge::DomainError>(m, "DomainError", base);

  m.attr("FPS") = mvforge::kFramesPerSecond;
  m.def("quantize", [](double seconds, const std::string& rounding) {
    return mvforge::quantize(seconds, parse_rounding(rounding)).frames();
  }, py::arg("seconds"), py::arg("rounding") = "nearest");
  m.def("plan_json", &plan, py::arg("context"));
  m.def("category_means_json", &category_means, py::arg("means"));
  m.def("category_scores_json", &category_scores, py::arg("card"));
  m.def("pearson", &mvforge::pearson, py::arg("x"), py::arg("y"));
  m.def("correlate_json", &correlate, py::arg("human"), py::arg("model"));
  m.def("select_index_json", &select_verdict, py::arg("verdicts"), py::arg("scoring") = "full");
  m.def("run_fixture_json", &run_fixture, py::arg("fixture"), py::arg("job_dir"), py::arg("config") = "");
}
