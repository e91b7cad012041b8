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

#include "mvforge/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <sstream>
#include <thread>

#include "mvforge/context.hpp"
#include "mvforge/errors.hpp"
#include "mvforge/util.hpp"
#include "toml.hpp"

namespace mvforge {
namespace {

using nlohmann::json;

std::string_view category_key(Category c) {
  switch (c) {
    case Category::kTechnical: return "technical";
    case Category::kPostProduction: return "post_production";
    case Category::kContent: return "content";
    case Category::kArt: return "art";
  }
  return "technical";
}

Category parse_category_key(std::string_view key) {
  for (auto c : kCategories) {
    if (category_key(c) == key) return c;
  }
  throw ValidationError("unknown category '" + std::string(key) + "'");
}

bool is_code(std::string_view code) {
  return std::find(kCriterionCodes.begin(), kCriterionCodes.end(), code) != kCriterionCodes.end();
}

Rational mean_of(const std::vector<Rational>& xs) {
  Rational sum;
  for (const auto& x : xs) sum += x;
  return sum / Rational(static_cast<std::int64_t>(xs.size()));
}

// Parses {"scores": {...}} into integer scores; throws on malformed input.
ScoreCard parse_judge_reply(const json& reply, const std::string& video_id,
                            const std::string& rater, std::vector<std::string>* warnings) {
  if (!reply.is_object() || !reply.contains("scores") || !reply.at("scores").is_object()) {
    throw ValidationError("judge reply lacks a 'scores' object");
  }
  ScoreCard card{video_id, rater, {}};
  std::vector<std::string> notes;
  for (const auto code : kCriterionCodes) {
    const std::string key(code);
    if (!reply.at("scores").contains(key)) throw ValidationError("judge reply lacks " + key);
    const auto& v = reply.at("scores").at(key);
    if (!v.is_number()) throw ValidationError(key + " is not a number");
    const double raw = v.get<double>();
    if (!std::isfinite(raw)) throw ValidationError(key + " is not finite");
    double rounded = std::floor(raw + 0.5);
    if (rounded != raw) notes.push_back(video_id + ": " + key + " " + v.dump() + " rounded");
    if (rounded > 5.0 || rounded < 1.0) {
      notes.push_back(video_id + ": " + key + " " + v.dump() + " clamped to [1, 5]");
      rounded = std::clamp(rounded, 1.0, 5.0);
    }
    card.scores[key] = static_cast<int>(rounded);
  }
  if (warnings) warnings->insert(warnings->end(), notes.begin(), notes.end());
  return card;
}

}  // namespace

std::string_view to_string(Category c) {
  switch (c) {
    case Category::kTechnical: return "Technical";
    case Category::kPostProduction: return "PostProduction";
    case Category::kContent: return "Content";
    case Category::kArt: return "Art";
  }
  return "Technical";
}

Category category_of(std::string_view code) {
  for (auto c : kCategories) {
    const auto m = members(c);
    if (std::find(m.begin(), m.end(), code) != m.end()) return c;
  }
  throw ValidationError("unknown criterion '" + std::string(code) + "'");
}

std::vector<std::string_view> members(Category c) {
  switch (c) {
    case Category::kTechnical: return {"CC", "PA", "LS", "VH"};
    case Category::kPostProduction: return {"SC", "AC"};
    case Category::kContent: return {"MT", "ST", "EM"};
    case Category::kArt: return {"VQ", "CR", "AN"};
  }
  return {};
}

Rational category_weight(Category c) {
  switch (c) {
    case Category::kTechnical:
    case Category::kPostProduction: return Rational(1, 5);
    case Category::kContent:
    case Category::kArt: return Rational(3, 10);
  }
  return Rational(0);
}

Rational criterion_weight(std::string_view code) {
  const auto c = category_of(code);
  return category_weight(c) / Rational(static_cast<std::int64_t>(members(c).size()));
}

const RubricCriterion& Rubric::at(std::string_view code) const {
  for (const auto& c : criteria) {
    if (c.code == code) return c;
  }
  throw NotFoundError("rubric has no criterion '" + std::string(code) + "'");
}

Rubric load_rubric(const std::filesystem::path& path) {
  toml::table root;
  try {
    root = toml::parse_file(path.string());
  } catch (const toml::parse_error& e) {
    throw ValidationError(path.string() + ": " + std::string(e.description()));
  }
  const std::string where = path.string() + ": ";

  const auto* cats = root["categories"].as_table();
  if (!cats) throw ValidationError(where + "missing [categories]");
  if (cats->size() != kCategories.size()) throw ValidationError(where + "expected 4 categories");
  for (const auto& [key, node] : *cats) {
    const auto c = parse_category_key(key.str());
    const auto* t = node.as_table();
    if (!t) throw ValidationError(where + "category entry must be a table");
    const auto weight = (*t)["weight"].value<std::string>();
    if (!weight || Rational::parse(*weight) != category_weight(c)) {
      throw ValidationError(where + "weight of " + std::string(key.str()) + " must be " +
                            to_string(category_weight(c)));
    }
    const auto* arr = (*t)["members"].as_array();
    std::vector<std::string> listed;
    if (arr) {
      for (const auto& m : *arr) listed.push_back(m.value<std::string>().value_or(""));
    }
    const auto expected = members(c);
    if (!std::equal(listed.begin(), listed.end(), expected.begin(), expected.end())) {
      throw ValidationError(where + "members of " + std::string(key.str()) + " differ from the fixed set");
    }
  }

  const auto* crits = root["criterion"].as_array();
  if (!crits) throw ValidationError(where + "missing [[criterion]] entries");
  Rubric rubric;
  for (const auto& node : *crits) {
    const auto* t = node.as_table();
    if (!t) throw ValidationError(where + "criterion must be a table");
    RubricCriterion rc;
    rc.code = (*t)["code"].value<std::string>().value_or("");
    if (!is_code(rc.code)) throw ValidationError(where + "unknown criterion code '" + rc.code + "'");
    rc.name = (*t)["name"].value<std::string>().value_or("");
    rc.summary = (*t)["summary"].value<std::string>().value_or("");
    rc.category = parse_category_key((*t)["category"].value<std::string>().value_or(""));
    if (rc.category != category_of(rc.code)) {
      throw ValidationError(where + rc.code + " is filed under the wrong category");
    }
    const auto* levels = (*t)["levels"].as_array();
    if (!levels || levels->size() != 5) {
      throw ValidationError(where + rc.code + " needs exactly 5 level descriptors");
    }
    for (std::size_t i = 0; i < 5; ++i) {
      auto s = (*levels)[i].value<std::string>();
      if (!s || trim(*s).empty()) throw ValidationError(where + rc.code + " has an empty level");
      rc.levels[i] = *s;
    }
    if (rc.name.empty()) throw ValidationError(where + rc.code + " has no name");
    rubric.criteria.push_back(std::move(rc));
  }
  if (rubric.criteria.size() != kCriterionCodes.size()) {
    throw ValidationError(where + "expected 12 criteria, found " +
                          std::to_string(rubric.criteria.size()));
  }
  for (std::size_t i = 0; i < kCriterionCodes.size(); ++i) {
    if (rubric.criteria[i].code != kCriterionCodes[i]) {
      throw ValidationError(where + "criteria must appear in the order CC, PA, LS, VH, SC, AC, MT, "
                                    "ST, EM, VQ, CR, AN");
    }
  }
  return rubric;
}

std::filesystem::path default_rubric_path() {
  return std::filesystem::path(MVFORGE_DATA_DIR) / "rubric.toml";
}

const Rubric& default_rubric() {
  static const Rubric rubric = load_rubric(default_rubric_path());
  return rubric;
}

void validate_card(const ScoreCard& card) {
  for (const auto code : kCriterionCodes) {
    auto it = card.scores.find(std::string(code));
    if (it == card.scores.end()) {
      throw ValidationError("score card '" + card.video_id + "' is missing " + std::string(code));
    }
    if (it->second < 1 || it->second > 5) {
      throw ValidationError("score card '" + card.video_id + "': " + std::string(code) + " = " +
                            std::to_string(it->second) + " outside [1, 5]");
    }
  }
  for (const auto& [code, v] : card.scores) {
    if (!is_code(code)) throw ValidationError("score card has unknown criterion '" + code + "'");
  }
  if (card.rater != "human" && !card.rater.starts_with("model:")) {
    throw ValidationError("rater must be 'human' or 'model:<name>', got '" + card.rater + "'");
  }
}

json card_to_json(const ScoreCard& card) {
  return {{"video_id", card.video_id}, {"rater", card.rater}, {"scores", card.scores}};
}

ScoreCard card_from_json(const json& j) {
  reject_unknown_keys(j, {"video_id", "rater", "scores"}, "score card");
  ScoreCard card;
  try {
    card.video_id = j.at("video_id").get<std::string>();
    card.rater = j.at("rater").get<std::string>();
    for (const auto& [k, v] : j.at("scores").items()) {
      if (!v.is_number_integer()) throw ValidationError("score " + k + " must be an integer");
      card.scores[k] = v.get<int>();
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("score card: ") + e.what());
  }
  validate_card(card);
  return card;
}

std::vector<ScoreCard> read_scorecards(const std::filesystem::path& ndjson) {
  std::vector<ScoreCard> out;
  std::istringstream in(read_file(ndjson));
  std::string line;
  for (int n = 1; std::getline(in, line); ++n) {
    if (trim(line).empty()) continue;
    try {
      out.push_back(card_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ValidationError(ndjson.string() + ":" + std::to_string(n) + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(ndjson.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

void write_scorecards(const std::filesystem::path& ndjson, const std::vector<ScoreCard>& cards) {
  std::string out;
  for (const auto& c : cards) out += card_to_json(c).dump() + "\n";
  write_file_atomic(ndjson, out);
}

Rational CategoryScores::of(Category c) const {
  switch (c) {
    case Category::kTechnical: return technical;
    case Category::kPostProduction: return post_production;
    case Category::kContent: return content;
    case Category::kArt: return art;
  }
  return Rational(0);
}

json category_scores_to_json(const CategoryScores& s) {
  json j;
  for (auto c : kCategories) {
    j[std::string(category_key(c))] = {{"exact", to_string(s.of(c))}, {"value", s.of(c).to_fixed(2)}};
  }
  j["weighted_total"] = {{"exact", to_string(s.weighted_total)},
                         {"value", s.weighted_total.to_fixed(2)}};
  return j;
}

CategoryScores aggregate_means(const std::map<std::string, Rational>& means) {
  for (const auto code : kCriterionCodes) {
    if (!means.count(std::string(code))) {
      throw ValidationError("missing criterion " + std::string(code));
    }
  }
  auto cat = [&](Category c) {
    std::vector<Rational> xs;
    for (const auto code : members(c)) xs.push_back(means.at(std::string(code)));
    return mean_of(xs);
  };
  CategoryScores s{cat(Category::kTechnical), cat(Category::kPostProduction),
                   cat(Category::kContent), cat(Category::kArt), Rational(0)};
  for (auto c : kCategories) s.weighted_total += category_weight(c) * s.of(c);
  return s;
}

CategoryScores aggregate(const ScoreCard& card) {
  validate_card(card);
  std::map<std::string, Rational> means;
  for (const auto& [k, v] : card.scores) means[k] = Rational(v);
  return aggregate_means(means);
}

Rational weighted_total_direct(const std::map<std::string, Rational>& means) {
  Rational total;
  for (const auto code : kCriterionCodes) {
    auto it = means.find(std::string(code));
    if (it == means.end()) throw ValidationError("missing criterion " + std::string(code));
    total += criterion_weight(code) * it->second;
  }
  return total;
}

ScriptedRubricJudge ScriptedRubricJudge::from_file(const std::filesystem::path& path) {
  try {
    const json j = json::parse(read_file(path));
    reject_unknown_keys(j, {"name", "videos"}, "scripted rubric judge");
    return ScriptedRubricJudge(j.value("name", "scripted"), j.at("videos"));
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

json ScriptedRubricJudge::rate(const std::string& video, const std::string&,
                               const std::string&) const {
  if (auto it = table_.find(video); it != table_.end()) return *it;
  const auto base = std::filesystem::path(video).filename().string();
  if (auto it = table_.find(base); it != table_.end()) return *it;
  if (auto it = table_.find("default"); it != table_.end()) return *it;
  throw PermanentClientError("scripted rubric judge has no entry for " + video);
}

json HashRubricJudge::rate(const std::string& video, const std::string& audio,
                           const std::string&) const {
  json scores = json::object();
  for (const auto code : kCriterionCodes) {
    const auto h = hash_fields({"rubric", video, audio, code}, seed_);
    scores[std::string(code)] = 1 + static_cast<int>(h % 5);
  }
  return {{"scores", scores}};
}

json HttpRubricJudge::rate(const std::string& video, const std::string& audio,
                           const std::string& prompt) const {
  return endpoint_.post("/rate", {{"video", video}, {"audio", audio}, {"prompt", prompt}});
}

std::string rubric_prompt(const Rubric& rubric) {
  std::string out =
      "Watch the full music video with its original audio and rate each criterion on a 1-5 "
      "integer scale. Reply as JSON: {\"scores\": {\"CC\": n, ...}}.\n";
  for (const auto& c : rubric.criteria) {
    out += "\n" + c.code + " - " + c.name + " (" + std::string(to_string(c.category)) + "): " +
           c.summary + "\n";
    for (std::size_t i = 0; i < c.levels.size(); ++i) {
      out += "  " + std::to_string(i + 1) + ": " + c.levels[i] + "\n";
    }
  }
  return out;
}

ScoreCard judge_video(const std::string& video_id, const std::string& video,
                      const std::string& audio, const Rubric& rubric,
                      const RubricJudgeClient& judge, std::vector<std::string>* warnings) {
  const std::string prompt = rubric_prompt(rubric);
  std::string last_error;
  for (int attempt = 0; attempt < 2; ++attempt) {
    try {
      return parse_judge_reply(judge.rate(video, audio, prompt), video_id,
                               "model:" + judge.name(), warnings);
    } catch (const Error& e) {
      last_error = e.what();
    } catch (const json::exception& e) {
      last_error = e.what();
    }
  }
  throw JudgingError("judging " + video_id + " failed: " + last_error);
}

BatchResult evaluate_batch(const std::vector<VideoInput>& videos, const Rubric& rubric,
                           const RubricJudgeClient& judge, int parallelism) {
  BatchResult result;
  std::mutex mu;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < videos.size(); i = next++) {
      const auto& v = videos[i];
      std::vector<std::string> notes;
      try {
        auto card = judge_video(v.video_id, v.video, v.audio, rubric, judge, &notes);
        std::lock_guard lock(mu);
        result.cards.push_back(std::move(card));
        result.warnings.insert(result.warnings.end(), notes.begin(), notes.end());
      } catch (const Error& e) {
        std::lock_guard lock(mu);
        result.errors[v.video_id] = e.what();
      }
    }
  };
  const int n = std::max(1, std::min<int>(parallelism, static_cast<int>(videos.size())));
  std::vector<std::thread> pool;
  for (int i = 0; i < n; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  std::sort(result.cards.begin(), result.cards.end(),
            [](const ScoreCard& a, const ScoreCard& b) { return a.video_id < b.video_id; });
  std::sort(result.warnings.begin(), result.warnings.end());
  return result;
}

std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) {
    throw DomainError("pearson: length mismatch (" + std::to_string(x.size()) + " vs " +
                      std::to_string(y.size()) + ")");
  }
  if (x.size() < 2) throw DomainError("pearson needs at least two points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v(kCriterionCodes.begin(), kCriterionCodes.end());
    for (auto c : kCategories) v.emplace_back(to_string(c));
    v.emplace_back("Total");
    return v;
  }();
  return names;
}

std::vector<Rational> metric_values(const ScoreCard& card) {
  const auto s = aggregate(card);
  std::vector<Rational> out;
  for (const auto code : kCriterionCodes) out.emplace_back(card.scores.at(std::string(code)));
  for (auto c : kCategories) out.push_back(s.of(c));
  out.push_back(s.weighted_total);
  return out;
}

CorrelationReport correlation_report(const std::vector<ScoreCard>& human,
                                     const std::vector<ScoreCard>& model) {
  // Mean metric vector per video for a set of cards.
  auto per_video = [](const std::vector<const ScoreCard*>& cards) {
    std::map<std::string, std::vector<std::vector<Rational>>> grouped;
    for (const auto* c : cards) grouped[c->video_id].push_back(metric_values(*c));
    std::map<std::string, std::vector<double>> out;
    for (const auto& [vid, rows] : grouped) {
      std::vector<double> means;
      for (std::size_t m = 0; m < metric_names().size(); ++m) {
        std::vector<Rational> col;
        for (const auto& r : rows) col.push_back(r[m]);
        means.push_back(mean_of(col).to_double());
      }
      out[vid] = std::move(means);
    }
    return out;
  };

  std::vector<const ScoreCard*> human_ptrs;
  for (const auto& c : human) {
    if (c.rater != "human") throw ValidationError("human card with rater '" + c.rater + "'");
    human_ptrs.push_back(&c);
  }
  std::map<std::string, std::vector<const ScoreCard*>> by_rater;
  for (const auto& c : model) {
    if (!c.rater.starts_with("model:")) throw ValidationError("model card with rater '" + c.rater + "'");
    by_rater[c.rater].push_back(&c);
  }
  const auto human_means = per_video(human_ptrs);

  CorrelationReport report;
  report.metrics = metric_names();
  if (by_rater.empty()) throw DomainError("no model cards to correlate");
  for (const auto& [rater, cards] : by_rater) {
    const auto model_means = per_video(cards);
    std::vector<std::string> common;
    for (const auto& [vid, _] : model_means) {
      if (human_means.count(vid)) common.push_back(vid);
    }
    if (common.size() < 2) {
      throw DomainError(rater + " shares " + std::to_string(common.size()) +
                        " video(s) with the human cards; need at least 2");
    }
    std::vector<std::optional<double>> row;
    for (std::size_t m = 0; m < report.metrics.size(); ++m) {
      std::vector<double> hx, my;
      for (const auto& vid : common) {
        hx.push_back(human_means.at(vid)[m]);
        my.push_back(model_means.at(vid)[m]);
      }
      row.push_back(pearson(hx, my));
    }
    report.rows[rater] = std::move(row);
    report.paired[rater] = common.size();
  }
  return report;
}

json report_to_json(const CorrelationReport& r) {
  json rows = json::object();
  for (const auto& [rater, cells] : r.rows) {
    json row = json::object();
    for (std::size_t m = 0; m < r.metrics.size(); ++m) {
      row[r.metrics[m]] = cells[m] ? json(*cells[m]) : json(nullptr);
    }
    rows[rater] = {{"paired_videos", r.paired.at(rater)}, {"r", std::move(row)}};
  }
  return {{"metrics", r.metrics}, {"raters", std::move(rows)}};
}

std::string report_to_text(const CorrelationReport& r) {
  std::size_t width = 5;
  for (const auto& [rater, _] : r.rows) width = std::max(width, rater.size());
  std::string out = "Pearson r, model vs human (n/a = zero variance)\n";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%-*s", static_cast<int>(width), "rater");
  out += buf;
  for (const auto& m : r.metrics) {
    std::snprintf(buf, sizeof(buf), " %8s", m.c_str());
    out += buf;
  }
  out += "\n";
  for (const auto& [rater, cells] : r.rows) {
    std::snprintf(buf, sizeof(buf), "%-*s", static_cast<int>(width), rater.c_str());
    out += buf;
    for (const auto& c : cells) {
      if (c) {
        std::snprintf(buf, sizeof(buf), " %8.3f", *c);
      } else {
        std::snprintf(buf, sizeof(buf), " %8s", "n/a");
      }
      out += buf;
    }
    out += "\n";
  }
  return out;
}

}  // namespace mvforge
