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

// Twelve-criterion rubric scoring: category aggregation in exact
// arithmetic, model-judge orchestration, and human-vs-model correlation.

#ifndef MVFORGE_EVALUATION_HPP_
#define MVFORGE_EVALUATION_HPP_

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mvforge/rational.hpp"
#include "mvforge/transport.hpp"

namespace mvforge {

inline constexpr std::array<std::string_view, 12> kCriterionCodes = {
    "CC", "PA", "LS", "VH", "SC", "AC", "MT", "ST", "EM", "VQ", "CR", "AN"};

enum class Category { kTechnical, kPostProduction, kContent, kArt };

inline constexpr std::array<Category, 4> kCategories = {
    Category::kTechnical, Category::kPostProduction, Category::kContent, Category::kArt};

std::string_view to_string(Category c);
Category category_of(std::string_view code);
std::vector<std::string_view> members(Category c);
/// 1/5, 1/5, 3/10, 3/10.
Rational category_weight(Category c);
/// Category weight spread evenly over its members (CC..VH 1/20, the rest 1/10).
Rational criterion_weight(std::string_view code);

struct RubricCriterion {
  std::string code;
  std::string name;
  Category category = Category::kTechnical;
  std::string summary;
  std::array<std::string, 5> levels;
};

struct Rubric {
  std::vector<RubricCriterion> criteria;  // kCriterionCodes order

  const RubricCriterion& at(std::string_view code) const;
};

/// Parses the TOML rubric file and checks it against the fixed category
/// structure (membership and weights). Throws ValidationError.
Rubric load_rubric(const std::filesystem::path& path);
/// The rubric shipped in the data directory.
const Rubric& default_rubric();
std::filesystem::path default_rubric_path();

/// "human" or "model:<name>".
struct ScoreCard {
  std::string video_id;
  std::string rater = "human";
  std::map<std::string, int> scores;

  friend bool operator==(const ScoreCard&, const ScoreCard&) = default;
};

/// All twelve criteria present, each an integer in [1, 5].
void validate_card(const ScoreCard& card);

nlohmann::json card_to_json(const ScoreCard& card);
ScoreCard card_from_json(const nlohmann::json& j);
std::vector<ScoreCard> read_scorecards(const std::filesystem::path& ndjson);
void write_scorecards(const std::filesystem::path& ndjson, const std::vector<ScoreCard>& cards);

struct CategoryScores {
  Rational technical;
  Rational post_production;
  Rational content;
  Rational art;
  Rational weighted_total;

  Rational of(Category c) const;
  friend bool operator==(const CategoryScores&, const CategoryScores&) = default;
};

nlohmann::json category_scores_to_json(const CategoryScores& s);

/// Category means, then the weighted category sum.
CategoryScores aggregate(const ScoreCard& card);
/// Same over per-criterion means (e.g. published averages such as "3.07").
CategoryScores aggregate_means(const std::map<std::string, Rational>& means);
/// Σ criterion_weight(c) · score(c), without going through categories.
Rational weighted_total_direct(const std::map<std::string, Rational>& means);

/// A multimodal judge rating a whole video. The reply is expected to hold
/// {"scores": {"CC": <number>, ...}}.
class RubricJudgeClient {
 public:
  virtual ~RubricJudgeClient() = default;
  virtual std::string name() const = 0;
  virtual nlohmann::json rate(const std::string& video, const std::string& audio,
                              const std::string& prompt) const = 0;
};

/// Replies from a table keyed by video locator ("default" as fallback).
class ScriptedRubricJudge final : public RubricJudgeClient {
 public:
  ScriptedRubricJudge(std::string name, nlohmann::json table)
      : name_(std::move(name)), table_(std::move(table)) {}
  static ScriptedRubricJudge from_file(const std::filesystem::path& path);

  std::string name() const override { return name_; }
  nlohmann::json rate(const std::string& video, const std::string& audio,
                      const std::string& prompt) const override;

 private:
  std::string name_;
  nlohmann::json table_;
};

/// Deterministic hash scores in [1, 5].
class HashRubricJudge final : public RubricJudgeClient {
 public:
  explicit HashRubricJudge(std::uint64_t seed = 0) : seed_(seed) {}
  std::string name() const override { return "hash"; }
  nlohmann::json rate(const std::string& video, const std::string& audio,
                      const std::string& prompt) const override;

 private:
  std::uint64_t seed_;
};

/// POST <base>/rate with {video, audio, prompt}.
class HttpRubricJudge final : public RubricJudgeClient {
 public:
  HttpRubricJudge(std::string name, std::string base_url)
      : name_(std::move(name)), endpoint_(std::move(base_url)) {}
  std::string name() const override { return name_; }
  nlohmann::json rate(const std::string& video, const std::string& audio,
                      const std::string& prompt) const override;

 private:
  std::string name_;
  JsonHttpEndpoint endpoint_;
};

/// Prompt listing every criterion with its five level descriptors verbatim.
std::string rubric_prompt(const Rubric& rubric);

class JudgingError : public Error {
 public:
  using Error::Error;
};

/// Rates one video. Fractional scores are rounded half-up, then clamped to
/// [1, 5]; both adjustments are reported in `warnings`. A reply that cannot
/// be parsed is retried once, then JudgingError.
ScoreCard judge_video(const std::string& video_id, const std::string& video,
                      const std::string& audio, const Rubric& rubric,
                      const RubricJudgeClient& judge,
                      std::vector<std::string>* warnings = nullptr);

struct VideoInput {
  std::string video_id;
  std::string video;
  std::string audio;
};

struct BatchResult {
  std::vector<ScoreCard> cards;  // sorted by video_id
  std::map<std::string, std::string> errors;
  std::vector<std::string> warnings;
};

/// Judges videos concurrently; the result does not depend on input order.
BatchResult evaluate_batch(const std::vector<VideoInput>& videos, const Rubric& rubric,
                           const RubricJudgeClient& judge, int parallelism = 4);

/// Sample Pearson r; nullopt when either side has zero variance. Throws
/// DomainError on length mismatch or fewer than two points.
std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y);

/// The twelve criteria, four categories, then the weighted total.
const std::vector<std::string>& metric_names();
/// Values of metric_names() for one card.
std::vector<Rational> metric_values(const ScoreCard& card);

struct CorrelationReport {
  std::vector<std::string> metrics;
  /// Model rater -> one cell per metric; nullopt = undefined.
  std::map<std::string, std::vector<std::optional<double>>> rows;
  /// Model rater -> number of paired videos.
  std::map<std::string, std::size_t> paired;
};

/// Pairs cards by video_id (several cards for one video are averaged per
/// metric) and correlates each model rater with the human mean.
CorrelationReport correlation_report(const std::vector<ScoreCard>& human,
                                     const std::vector<ScoreCard>& model);

nlohmann::json report_to_json(const CorrelationReport& r);
std::string report_to_text(const CorrelationReport& r);

/// Objective metric computed by an external model (e.g. an audio-visual
/// embedding similarity), reported as a percentage. Interface only.
class ExternalMetricClient {
 public:
  virtual ~ExternalMetricClient() = default;
  virtual std::string name() const = 0;
  virtual double percentage(const std::string& video, const std::string& audio) const = 0;
};

}  // namespace mvforge

#endif  // MVFORGE_EVALUATION_HPP_
