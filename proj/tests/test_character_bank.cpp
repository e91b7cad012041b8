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


#include <random>

#include "doctest.h"
#include "mvforge/character_bank.hpp"

using namespace mvforge;

namespace {

CastRecord rec(std::string name, std::map<std::string, std::string> app = {},
               std::vector<std::string> aliases = {}) {
  return {std::move(name), std::move(aliases), std::move(app)};
}

const std::map<std::string, std::string> kMira = {
    {"gender", "woman"},     {"age", "late 20s"},        {"nationality", "Korean"},
    {"hair", "silver bob"},  {"face", "sharp cheekbones"}, {"skin_color", "pale"},
    {"outfit", "red raincoat"}};

}  // namespace

TEST_CASE("descriptor block is a pure function with a fixed key order") {
  const auto d = render_descriptor("Mira", kMira);
  CHECK(d ==
        "<<Mira>> gender: woman; age: late 20s; nationality: Korean; hair: silver bob; "
        "face: sharp cheekbones; skin color: pale; outfit: red raincoat.");
  CHECK(render_descriptor("Mira", kMira) == d);
  auto partial = kMira;
  partial.erase("outfit");
  CHECK_THROWS_AS(render_descriptor("Mira", partial), ValidationError);
}

TEST_CASE("build_bank merges by name and defaults missing fields with warnings") {
  const auto b = build_bank("s1", {rec("Mira", {{"hair", "silver bob"}}, {"the pilot"}),
                                   rec("  mira ", {{"outfit", "red raincoat"}}),
                                   rec("Old Tom", kMira)});
  CHECK(b.bank.frozen());
  REQUIRE(b.bank.profiles().size() == 2);
  const auto* m = b.bank.find("mira");
  REQUIRE(m);
  CHECK(m->display_name == "Mira");
  CHECK(m->appearance.at("hair") == "silver bob");
  CHECK(m->appearance.at("outfit") == "red raincoat");
  CHECK(m->appearance.at("age") == "adult");
  CHECK(m->defaulted.size() == 5);
  CHECK(m->aliases == std::vector<std::string>{"the pilot"});
  CHECK(b.warnings.size() == 5);
  CHECK(b.bank.find("old-tom"));
  CHECK(b.bank.find("old-tom")->defaulted.empty());
}

TEST_CASE("conflicting appearance for one name is an error naming the field") {
  try {
    build_bank("s1", {rec("Mira", {{"hair", "silver bob"}}), rec("MIRA", {{"hair", "black braid"}})});
    FAIL("expected a conflict");
  } catch (const CharacterConflictError& e) {
    CHECK(e.field() == "hair");
  }
  // Same value with different whitespace is not a conflict.
  CHECK_NOTHROW(build_bank("s1", {rec("Mira", {{"hair", "silver bob"}}), rec("Mira", {{"hair", " silver bob "}})}));
  CHECK_THROWS_AS(build_bank("s1", {rec("  ")}), ValidationError);
  CHECK_THROWS_AS(build_bank("s1", {rec("X", {{"shoes", "red"}})}), ValidationError);
}

TEST_CASE("frozen bank rejects additions; duplicate names rejected") {
  auto b = build_bank("s1", {rec("Mira", kMira)}).bank;
  CharacterProfile p;
  p.character_id = "new";
  p.display_name = "Newcomer";
  CHECK_THROWS_AS(b.add(p), BankFrozenError);
  CHECK_THROWS_AS(b.add(p), ConflictError);

  CharacterBank open("s2");
  p.character_id = "a";
  p.display_name = "Ann";
  open.add(p);
  p.character_id = "b";
  p.display_name = "ANN";
  CHECK_THROWS_AS(open.add(p), ValidationError);
}

TEST_CASE("slug collisions get a numeric suffix") {
  const auto b = build_bank("s1", {rec("Mira-Chen"), rec("Mira Chen!")});
  // Different raw names, same slug.
  CHECK(b.bank.find("mira-chen"));
  CHECK(b.bank.find("mira-chen-2"));
}

TEST_CASE("match: id, exact name/alias, then token overlap at 0.34") {
  const auto b = build_bank("s1", {rec("Mira Chen", kMira, {"the Pilot"}), rec("Old Tom")}).bank;
  CHECK(match(b, "mira-chen").character_id == "mira-chen");
  CHECK(match(b, "MIRA CHEN").character_id == "mira-chen");
  CHECK(match(b, "the pilot").character_id == "mira-chen");
  // name tokens {chen, mira, pilot, the}: one of four is 0.25 < 0.34.
  CHECK_THROWS_AS(match(b, "Chen"), NoMatchError);
  CHECK(match(b, "Chen", Rational(1, 4)).character_id == "mira-chen");
  CHECK(match(b, "Mira the singer").character_id == "mira-chen");  // 2/4
  CHECK(match(b, "tom").character_id == "old-tom");                // 1/2
  CHECK_THROWS_AS(match(b, "nobody"), NoMatchError);
  CHECK_THROWS_AS(match(CharacterBank("e"), "Mira"), NotFoundError);
  CHECK(token_overlap("mira mira chen", *b.find("mira-chen")) == Rational(2, 4));
}

TEST_CASE("match ties go to the smaller character id") {
  const auto b = build_bank("s1", {rec("Sam Blue"), rec("Sam Red")}).bank;
  CHECK(match(b, "sam").character_id == "sam-blue");
}

TEST_CASE("inject rewrites markers, appends descriptors and is idempotent") {
  const auto b = build_bank("s1", {rec("Mira", kMira), rec("Tom")}).bank;
  const std::vector<CharacterProfile> both = {*b.find("mira"), *b.find("tom")};
  const std::string prompt = "@{mira} waves at @{tom} on the pier.";
  const auto once = inject(prompt, both);
  CHECK(once.starts_with("Mira waves at Tom on the pier.\n\n[characters]\n<<Mira>>"));
  CHECK(once.ends_with("[/characters]"));
  CHECK(once.find(b.find("tom")->descriptor_block) != std::string::npos);
  CHECK(inject(once, both) == once);
  CHECK(inject("empty harbor at dusk", {}) == "empty harbor at dusk");
  CHECK_THROWS_AS(inject("@{ghost} appears", both), UnresolvedReferenceError);
  CHECK(resolve_markers(prompt, b) == "Mira waves at Tom on the pier.");
  CHECK_THROWS_AS(resolve_markers("@{ghost}", b), UnresolvedReferenceError);
}

TEST_CASE("property: the same descriptor block appears wherever a character is referenced") {
  const auto b = build_bank("s1", {rec("Mira", kMira), rec("Tom"), rec("Ada Lee")}).bank;
  std::vector<CharacterProfile> all;
  for (const auto& [id, p] : b.profiles()) all.push_back(p);
  std::mt19937_64 rng(11);
  const std::vector<std::string> pieces = {"@{mira}", "@{tom}", "@{ada-lee}", "rain", "neon", "runs"};
  for (int i = 0; i < 300; ++i) {
    std::string prompt;
    std::vector<CharacterProfile> cast;
    for (int k = 0; k < 5; ++k) prompt += pieces[rng() % pieces.size()] + " ";
    for (const auto& p : all) {
      if (prompt.find(marker(p.character_id)) != std::string::npos) cast.push_back(p);
    }
    const auto out = inject(prompt, cast);
    for (const auto& p : cast) {
      REQUIRE(out.find(p.descriptor_block) != std::string::npos);
      REQUIRE(references(out, p));
    }
    REQUIRE(out.find("@{") == std::string::npos);
    REQUIRE(inject(out, cast) == out);
  }
}

TEST_CASE("references ignores the injected section") {
  const auto b = build_bank("s1", {rec("Mira", kMira, {"the pilot"}), rec("Tom")}).bank;
  const auto& mira = *b.find("mira");
  const auto& tom = *b.find("tom");
  CHECK(references("the Pilot lands", mira));
  CHECK(references("@{mira} lands", mira));
  CHECK_FALSE(references("Miranda lands", mira));
  const auto injected = inject("Tom alone", {tom, mira});
  CHECK_FALSE(references(injected, mira));
}

TEST_CASE("bank JSON round trip and tamper detection") {
  const auto b = build_bank("s1", {rec("Mira", kMira, {"the pilot"}), rec("Tom")}).bank;
  const auto j = bank_to_json(b);
  const auto back = bank_from_json(j);
  CHECK(back == b);
  CHECK(back.frozen());
  auto bad = j;
  bad["profiles"][0]["descriptor_block"] = "<<Mira>> something else.";
  CHECK_THROWS_AS(bank_from_json(bad), ValidationError);
  bad = j;
  bad["bank_schema"] = 9;
  CHECK_THROWS_AS(bank_from_json(bad), ValidationError);
  bad = j;
  bad["extra"] = 1;
  CHECK_THROWS_AS(bank_from_json(bad), ValidationError);
  const auto r = cast_record_from_json(cast_record_to_json(rec("Mira", {{"hair", "x"}}, {"p"})));
  CHECK(r.name == "Mira");
  CHECK(r.appearance.at("hair") == "x");
  CHECK_THROWS_AS(cast_record_from_json({{"name", "A"}, {"appearance", {{"tail", "x"}}}}), ValidationError);
}
