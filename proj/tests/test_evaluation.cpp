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


#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "mvforge/evaluation.hpp"
#include "mvforge/util.hpp"
#include "support.hpp"

using namespace mvforge;
using namespace mvforge::testing;
using nlohmann::json;

namespace {

std::map<std::string, Rational> row(const std::string& text) {
  std::istringstream in(text);
  std::map<std::string, Rational> out;
  for (const auto code : kCriterionCodes) {
    std::string v;
    in >> v;
    out[std::string(code)] = Rational::parse(v);
  }
  return out;
}

Rational half_cent() { return Rational(5, 1000); }

bool near(const Rational& a, const std::string& published) {
  const auto d = a - Rational::parse(published);
  return (d < Rational(0) ? Rational(0) - d : d) <= half_cent();
}

// Published sub-criterion rows and the category / total columns they feed.
struct PublishedRow {
  const char* name;
  const char* criteria;
  const char* categories[5];
};

const PublishedRow kRows[] = {
    {"Revid.ai-base", "1.00 2.00 1.00 1.00 1.03 1.03 1.03 1.00 1.00 1.00 1.00 1.00",
     {"1.25", "1.03", "1.01", "1.00", "1.06"}},
    {"OpenArt-story", "2.95 2.69 1.55 2.48 1.68 1.23 1.16 1.11 1.04 1.29 1.05 1.10",
     {"2.42", "1.45", "1.10", "1.15", "1.45"}},
    {"pipeline (full)", "3.07 2.95 2.67 3.07 2.00 2.10 3.08 2.18 2.60 3.28 1.23 1.83",
     {"2.94", "2.05", "2.62", "2.12", "2.42"}},
    {"pipeline (w/o lyrics info)", "2.00 2.93 2.64 3.00 2.00 1.14 2.11 1.29 2.11 2.07 1.07 1.07",
     {"2.64", "1.57", "1.83", "1.40", "1.81"}},
    {"pipeline (w/o character bank)", "1.22 2.37 2.70 2.85 2.00 1.15 2.54 1.33 2.57 2.04 1.11 1.07",
     {"2.29", "1.57", "2.15", "1.41", "1.84"}},
    {"pipeline (w/o verifier)", "2.33 2.30 2.33 2.00 2.00 2.22 2.52 2.11 2.54 2.61 1.06 1.22",
     {"2.24", "2.11", "2.39", "1.63", "2.08"}},
    {"Human (experts)", "3.79 4.14 3.48 3.86 2.95 3.02 3.17 2.71 2.98 3.40 2.06 1.05",
     {"3.82", "2.99", "2.95", "2.17", "2.90"}},
};

ScoreCard card_of(const std::string& video, const std::string& rater, std::initializer_list<int> s) {
  ScoreCard c{video, rater, {}};
  auto it = s.begin();
  for (const auto code : kCriterionCodes) c.scores[std::string(code)] = *it++;
  return c;
}

}  // namespace

TEST_CASE("weights: categories sum to one and spread evenly over members") {
  Rational sum(0), direct(0);
  for (auto c : kCategories) sum = sum + category_weight(c);
  CHECK(sum == Rational(1));
  for (const auto code : kCriterionCodes) direct = direct + criterion_weight(code);
  CHECK(direct == Rational(1));
  for (const auto* code : {"CC", "PA", "LS", "VH"}) CHECK(criterion_weight(code) == Rational(1, 20));
  for (const auto* code : {"SC", "AC", "MT", "ST", "EM", "VQ", "CR", "AN"}) {
    CHECK(criterion_weight(code) == Rational(1, 10));
  }
  CHECK(members(Category::kContent) == std::vector<std::string_view>{"MT", "ST", "EM"});
  CHECK_THROWS_AS(criterion_weight("XX"), ValidationError);
}

TEST_CASE("human experts row: exact category means and the published values") {
  const auto s = aggregate_means(row(kRows[6].criteria));
  // Hand arithmetic: 15.27/4, 5.97/2, 8.86/3, 6.51/3.
  CHECK(s.technical == Rational(1527, 400));
  CHECK(s.post_production == Rational(597, 200));
  CHECK(s.content == Rational(886, 300));
  CHECK(s.art == Rational(651, 300));
  CHECK(s.weighted_total == Rational(28975, 10000));
  CHECK(near(s.technical, "3.82"));
  CHECK(near(s.post_production, "2.99"));  // 2.985 sits exactly on the tolerance edge
  CHECK(near(s.content, "2.95"));
  CHECK(near(s.art, "2.17"));
  CHECK(near(s.weighted_total, "2.90"));
}

TEST_CASE("full-system row: exact means; the published Art value is 0.0067 above them") {
  const auto s = aggregate_means(row(kRows[2].criteria));
  CHECK(s.technical == Rational(1176, 400));
  CHECK(s.post_production == Rational(410, 200));
  CHECK(s.content == Rational(786, 300));
  CHECK(s.art == Rational(634, 300));  // 2.1133...
  CHECK(s.weighted_total == Rational(2418, 1000));
  CHECK(near(s.technical, "2.94"));
  CHECK(near(s.post_production, "2.05"));
  CHECK(near(s.content, "2.62"));
  CHECK(near(s.weighted_total, "2.42"));
  // (3.28 + 1.23 + 1.83) / 3 does not round to 2.12; the published cell
  // disagrees with its own printed sub-scores.
  CHECK_FALSE(near(s.art, "2.12"));
  CHECK(s.art.to_fixed(2) == "2.11");
}

TEST_CASE("every published row: mismatching cells are exactly the two known ones") {
  std::vector<std::string> mismatches;
  for (const auto& r : kRows) {
    const auto s = aggregate_means(row(r.criteria));
    const Rational got[5] = {s.technical, s.post_production, s.content, s.art, s.weighted_total};
    static const char* kCols[5] = {"Tech", "Post", "Content", "Art", "Total"};
    for (int i = 0; i < 5; ++i) {
      if (!near(got[i], r.categories[i])) mismatches.push_back(std::string(r.name) + " " + kCols[i]);
    }
  }
  CHECK(mismatches ==
        std::vector<std::string>{"pipeline (full) Art", "pipeline (w/o lyrics info) Content"});
}

TEST_CASE("every published cell is reachable from unrounded sub-scores") {
  // Printed sub-scores carry up to 0.005 of rounding each. Any mean or
  // convex combination of them moves by at most 0.005 too, so a category
  // value is reachable iff it lies within 0.01 of the printed-input mean.
  // Both known mismatches are explained this way.
  const Rational reach(1, 100);
  int cells = 0;
  for (const auto& r : kRows) {
    const auto s = aggregate_means(row(r.criteria));
    const Rational got[5] = {s.technical, s.post_production, s.content, s.art, s.weighted_total};
    for (int i = 0; i < 5; ++i) {
      auto d = got[i] - Rational::parse(r.categories[i]);
      if (d < Rational(0)) d = Rational(0) - d;
      CHECK(d <= reach);
      ++cells;
    }
  }
  CHECK(cells == 5 * static_cast<int>(std::size(kRows)));
  // Full-system Art: the unrounded mean spans [6.325, 6.355] / 3, which
  // straddles 2.115, so 2.12 is attainable only before input rounding.
  CHECK(Rational(6355, 3000) > Rational::parse("2.115"));
  CHECK(Rational(6325, 3000) < Rational::parse("2.115"));
}

TEST_CASE("property: both aggregation routes agree exactly on 10,000 random cards") {
  std::mt19937_64 rng(12345);
  for (int i = 0; i < 10000; ++i) {
    const auto card = random_card(rng, "v" + std::to_string(i), "human");
    std::map<std::string, Rational> means;
    for (const auto& [k, v] : card.scores) means[k] = Rational(v);
    const auto s = aggregate(card);
    REQUIRE(s.weighted_total == weighted_total_direct(means));
    REQUIRE(s == aggregate_means(means));
    REQUIRE(s.weighted_total >= Rational(1));
    REQUIRE(s.weighted_total <= Rational(5));
  }
}

TEST_CASE("aggregate: uniform card and missing criterion") {
  const auto s = aggregate(card_of("v", "human", {3, 3, 3, 3, 3, 3, 3, 3, 3, 3, 3, 3}));
  CHECK(s.weighted_total == Rational(3));
  auto bad = card_of("v", "human", {3, 3, 3, 3, 3, 3, 3, 3, 3, 3, 3, 3});
  bad.scores.erase("AN");
  CHECK_THROWS_AS(aggregate(bad), ValidationError);
  bad = card_of("v", "human", {3, 3, 3, 3, 3, 3, 3, 3, 3, 3, 3, 6});
  CHECK_THROWS_AS(validate_card(bad), ValidationError);
  bad = card_of("v", "critic", {3, 3, 3, 3, 3, 3, 3, 3, 3, 3, 3, 3});
  CHECK_THROWS_AS(validate_card(bad), ValidationError);
}

TEST_CASE("scorecards: JSON and ndjson round trip") {
  std::mt19937_64 rng(1);
  std::vector<ScoreCard> cards;
  for (int i = 0; i < 5; ++i) cards.push_back(random_card(rng, "v" + std::to_string(i), "model:x"));
  CHECK(card_from_json(card_to_json(cards[0])) == cards[0]);
  TempDir dir("cards");
  write_scorecards(dir.path() / "c.ndjson", cards);
  CHECK(read_scorecards(dir.path() / "c.ndjson") == cards);
  auto j = card_to_json(cards[0]);
  j["scores"]["CC"] = 2.5;
  CHECK_THROWS_AS(card_from_json(j), ValidationError);
}

TEST_CASE("rubric: shipped file loads with 60 descriptors; structure is enforced") {
  const auto& r = default_rubric();
  REQUIRE(r.criteria.size() == 12);
  std::size_t descriptors = 0;
  for (const auto& c : r.criteria) {
    descriptors += static_cast<std::size_t>(std::count_if(c.levels.begin(), c.levels.end(),
                                                          [](const auto& l) { return !l.empty(); }));
    CHECK(c.category == category_of(c.code));
  }
  CHECK(descriptors == 60);
  CHECK(r.at("CC").name == "Character Consistency");
  const auto prompt = rubric_prompt(r);
  for (const auto& c : r.criteria) {
    for (const auto& l : c.levels) REQUIRE(prompt.find(l) != std::string::npos);
  }

  TempDir dir("rubric");
  auto text = read_file(default_rubric_path());
  const auto write = [&](const std::string& body) {
    write_file_atomic(dir.path() / "r.toml", body);
    return dir.path() / "r.toml";
  };
  auto wrong_weight = text;
  wrong_weight.replace(wrong_weight.find("weight = \"1/5\""), 14, "weight = \"1/4\"");
  CHECK_THROWS_AS(load_rubric(write(wrong_weight)), ValidationError);
  auto wrong_member = text;
  wrong_member.replace(wrong_member.find("[\"SC\", \"AC\"]"), 12, "[\"SC\", \"MT\"]");
  CHECK_THROWS_AS(load_rubric(write(wrong_member)), ValidationError);
  CHECK_THROWS_AS(load_rubric(write("not = [valid")), ValidationError);
  CHECK_NOTHROW(load_rubric(write(text)));
}

TEST_CASE("judge_video: fractional scores round half up, out-of-range scores clamp, with warnings") {
  json scores = json::object();
  for (const auto code : kCriterionCodes) scores[std::string(code)] = 3;
  scores["CC"] = 6;
  scores["PA"] = 2.5;
  scores["LS"] = 0;
  scores["VH"] = 4.49;
  ScriptedRubricJudge judge("gem", json{{"vid.mp4", {{"scores", scores}}}});
  std::vector<std::string> warnings;
  const auto card = judge_video("v1", "vid.mp4", "", default_rubric(), judge, &warnings);
  CHECK(card.rater == "model:gem");
  CHECK(card.scores.at("CC") == 5);
  CHECK(card.scores.at("PA") == 3);
  CHECK(card.scores.at("LS") == 1);
  CHECK(card.scores.at("VH") == 4);
  CHECK(warnings.size() == 4);

  ScriptedRubricJudge broken("b", json{{"vid.mp4", {{"scores", {{"CC", 3}}}}}});
  CHECK_THROWS_AS(judge_video("v1", "vid.mp4", "", default_rubric(), broken), JudgingError);
  CHECK_THROWS_AS(judge_video("v1", "other.mp4", "", default_rubric(), broken), JudgingError);
}

TEST_CASE("evaluate_batch: result does not depend on input order or parallelism") {
  std::vector<VideoInput> inputs;
  for (int i = 0; i < 30; ++i) {
    inputs.push_back({"v" + std::to_string(100 + i), "videos/v" + std::to_string(i) + ".mp4", ""});
  }
  inputs.push_back({"missing", "", ""});
  HashRubricJudge hash(4);
  ScriptedRubricJudge scripted("s", json::object());
  const auto base = evaluate_batch(inputs, default_rubric(), hash, 1);
  CHECK(base.cards.size() == 31);
  std::mt19937_64 rng(3);
  for (int k = 0; k < 5; ++k) {
    auto shuffled = inputs;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const auto again = evaluate_batch(shuffled, default_rubric(), hash, 1 + k * 3);
    REQUIRE(again.cards == base.cards);
    REQUIRE(again.warnings == base.warnings);
  }
  const auto failing = evaluate_batch(inputs, default_rubric(), scripted, 4);
  CHECK(failing.cards.empty());
  CHECK(failing.errors.size() == 31);
}

TEST_CASE("pearson: reference values and argument errors") {
  CHECK(*pearson({1, 2, 3, 4}, {2, 4, 6, 8}) == doctest::Approx(1.0));
  CHECK(*pearson({1, 2, 3, 4}, {-1, -2, -3, -4}) == doctest::Approx(-1.0));
  // Worked by hand: Sxy = 4, Sxx = 5, Syy = 6.
  CHECK(*pearson({1, 2, 3, 4}, {2, 3, 2, 5}) == doctest::Approx(4.0 / std::sqrt(30.0)).epsilon(1e-15));
  CHECK(std::abs(*pearson({1, 2, 3, 4}, {2, 3, 2, 5}) - 0.7302967433402214) < 1e-15);
  CHECK_FALSE(pearson({1, 2, 3}, {5, 5, 5}).has_value());
  CHECK_THROWS_AS(pearson({1, 2}, {1, 2, 3}), DomainError);
  CHECK_THROWS_AS(pearson({1}, {1}), DomainError);
}

TEST_CASE("property: pearson matches the closed form, is symmetric and scale/shift invariant") {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> g(0.0, 3.0);
  std::uniform_int_distribution<int> len(2, 60);
  for (int i = 0; i < 50; ++i) {
    const int n = len(rng);
    std::vector<double> x(n), y(n);
    for (int k = 0; k < n; ++k) {
      x[k] = g(rng);
      y[k] = 0.4 * x[k] + g(rng);
    }
    const auto r = pearson(x, y);
    const auto oracle = closed_form_pearson(x, y);
    REQUIRE(r.has_value());
    REQUIRE(oracle.has_value());
    REQUIRE(std::abs(*r - static_cast<double>(*oracle)) <= 1e-12 * std::abs(static_cast<double>(*oracle)) + 1e-15);
    REQUIRE(*pearson(y, x) == doctest::Approx(*r).epsilon(1e-12));
    std::vector<double> ax(x), nx(x);
    for (auto& v : ax) v = 2.5 * v + 7.0;
    for (auto& v : nx) v = -0.5 * v - 1.0;
    REQUIRE(*pearson(ax, y) == doctest::Approx(*r).epsilon(1e-12));
    REQUIRE(*pearson(nx, y) == doctest::Approx(-*r).epsilon(1e-12));
  }
}

TEST_CASE("correlation_report: identity, zero variance, compositional oracle") {
  std::mt19937_64 rng(9);
  std::vector<ScoreCard> human, model;
  for (int i = 0; i < 6; ++i) {
    auto c = random_card(rng, "v" + std::to_string(i), "human");
    human.push_back(c);
    c.rater = "model:same";
    model.push_back(c);
  }
  const auto same = correlation_report(human, model);
  REQUIRE(same.metrics.size() == 17);
  for (const auto& cell : same.rows.at("model:same")) {
    if (cell) REQUIRE(*cell == doctest::Approx(1.0));
  }

  // Constant model AN -> undefined cell, never zero.
  std::vector<ScoreCard> flat = model;
  for (auto& c : flat) {
    c.rater = "model:flat";
    c.scores["AN"] = 2;
  }
  const auto fr = correlation_report(human, flat);
  CHECK_FALSE(fr.rows.at("model:flat")[11].has_value());

  // Three videos, two human raters on one of them: cell-by-cell oracle.
  const std::vector<ScoreCard> h = {card_of("a", "human", {1, 2, 3, 4, 5, 1, 2, 3, 4, 5, 1, 2}),
                                    card_of("a", "human", {3, 2, 3, 4, 5, 1, 2, 3, 4, 5, 3, 2}),
                                    card_of("b", "human", {4, 4, 1, 2, 2, 5, 5, 1, 1, 2, 2, 3}),
                                    card_of("c", "human", {2, 5, 5, 1, 3, 3, 1, 4, 2, 1, 5, 5})};
  const std::vector<ScoreCard> m = {card_of("a", "model:m", {2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2}),
                                    card_of("b", "model:m", {5, 3, 1, 3, 1, 4, 4, 2, 1, 3, 2, 3}),
                                    card_of("c", "model:m", {1, 4, 4, 2, 4, 2, 2, 5, 3, 1, 4, 4}),
                                    card_of("z", "model:m", {1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1})};
  const auto rep = correlation_report(h, m);
  CHECK(rep.paired.at("model:m") == 3);
  const auto metric = [](const std::vector<const ScoreCard*>& cs, std::size_t k) {
    Rational sum(0);
    for (const auto* c : cs) sum = sum + metric_values(*c)[k];
    return (sum / Rational(static_cast<std::int64_t>(cs.size()))).to_double();
  };
  for (std::size_t k = 0; k < 17; ++k) {
    const std::vector<double> hx = {metric({&h[0], &h[1]}, k), metric({&h[2]}, k), metric({&h[3]}, k)};
    const std::vector<double> my = {metric({&m[0]}, k), metric({&m[1]}, k), metric({&m[2]}, k)};
    const auto want = pearson(hx, my);
    const auto got = rep.rows.at("model:m")[k];
    REQUIRE(want.has_value() == got.has_value());
    if (want) REQUIRE(*got == doctest::Approx(*want).epsilon(1e-12));
  }
  const auto j = report_to_json(rep);
  CHECK(j.at("raters").at("model:m").at("paired_videos") == 3);
  CHECK(report_to_text(rep).find("model:m") != std::string::npos);

  CHECK_THROWS_AS(correlation_report(h, {card_of("q", "model:m", {1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1})}),
                  DomainError);
  CHECK_THROWS_AS(correlation_report(h, {}), DomainError);
  CHECK_THROWS_AS(correlation_report(m, m), ValidationError);
}
