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
#include "mvforge/assembler.hpp"
#include "support.hpp"

using namespace mvforge;
using namespace mvforge::testing;

namespace {

ClipCandidate clip_for(const SubClip& sc, std::int64_t delta = 0) {
  ClipCandidate c;
  c.candidate_id = sc.subclip_id + ":e1:v1:0";
  c.subclip_id = sc.subclip_id;
  c.artifact = "artifacts/clip-" + sc.subclip_id + ".json";
  c.last_frame = "artifacts/frame-" + sc.subclip_id + ".json";
  c.duration = FrameTime(sc.span.duration_frames() + delta);
  return c;
}

struct Fixture {
  ShotPlan plan;
  AudioRecord audio;
  std::map<std::string, Selection> all;
};

Fixture fixture(std::uint64_t seed, std::int64_t frames) {
  std::mt19937_64 rng(seed);
  Fixture f;
  f.plan = segment_song(random_context(rng, frames));
  SongMetadata song{f.plan.song_id, f.plan.duration, 44100, "en", "audio/mix.wav", std::nullopt};
  f.audio = mux_plan(f.plan, {}, song);
  for (const auto& sc : f.plan.subclips) f.all[sc.subclip_id] = Selection{clip_for(sc), false, false, ""};
  return f;
}

}  // namespace

TEST_CASE("complete selections give a gap-free, frame-exact manifest") {
  const auto f = fixture(1, 24 * 75);
  const auto m = assemble(f.plan, f.all, f.audio);
  REQUIRE(m.entries.size() == f.plan.subclips.size());
  CHECK(m.gaps().empty());
  CHECK(m.total == f.plan.duration);
  std::int64_t t = 0;
  for (std::size_t i = 0; i < m.entries.size(); ++i) {
    CHECK(m.entries[i].span == f.plan.subclips[i].span);
    CHECK(m.entries[i].span.start().frames() == t);
    t = m.entries[i].span.end().frames();
  }
  CHECK(t == f.plan.duration.frames());
}

TEST_CASE("missing or failed subclips become gap entries") {
  auto f = fixture(2, 24 * 60);
  const auto& first = f.plan.subclips.front().subclip_id;
  const auto& last = f.plan.subclips.back().subclip_id;
  f.all.erase(first);
  f.all[last] = Selection{std::nullopt, false, false, "backend refused"};
  const auto m = assemble(f.plan, f.all, f.audio);
  REQUIRE(m.gaps().size() == 2);
  CHECK(m.entries.front().kind == ManifestEntry::Kind::kGap);
  CHECK(m.entries.back().failure == "backend refused");
  CHECK(m.entries.size() == f.plan.subclips.size());
  CHECK_THROWS_AS(export_concat_list(m), AssemblyError);
}

TEST_CASE("a clip whose duration misses its span by one frame is rejected") {
  auto f = fixture(3, 24 * 45);
  const auto& sc = f.plan.subclips[1];
  for (const std::int64_t delta : {-1, 1}) {
    auto sel = f.all;
    sel[sc.subclip_id].clip = clip_for(sc, delta);
    try {
      assemble(f.plan, sel, f.audio);
      FAIL("expected AssemblyError");
    } catch (const AssemblyError& e) {
      CHECK(std::string(e.what()).find(sc.subclip_id) != std::string::npos);
    }
  }
}

TEST_CASE("flags carry through and the manifest round-trips") {
  auto f = fixture(4, 24 * 50);
  f.all[f.plan.subclips[0].subclip_id].fallback_accepted = true;
  f.all[f.plan.subclips[1].subclip_id].human_override = true;
  f.all.erase(f.plan.subclips[2].subclip_id);
  const auto m = assemble(f.plan, f.all, f.audio);
  CHECK(m.entries[0].fallback_accepted);
  CHECK(m.entries[1].human_override);
  CHECK(manifest_from_json(manifest_to_json(m)) == m);
  auto j = manifest_to_json(m);
  j["surprise"] = true;
  CHECK_THROWS_AS(manifest_from_json(j), ValidationError);
}

TEST_CASE("concat export: one line per entry plus the mix, LF endings") {
  const auto f = fixture(5, 24 * 40);
  const auto m = assemble(f.plan, f.all, f.audio);
  const auto text = export_concat_list(m);
  CHECK(text.find('\r') == std::string::npos);
  std::vector<std::string> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    REQUIRE(nl != std::string::npos);
    lines.push_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  REQUIRE(lines.size() == m.entries.size() + 1);
  const auto& e0 = m.entries[0];
  CHECK(lines[0] == "clip " + e0.artifact + " " + std::to_string(e0.span.start().frames()) + " " +
                        std::to_string(e0.span.end().frames()));
  CHECK(lines.back() == "audio audio/mix.wav 0 " + std::to_string(m.total.frames()));

  auto spaced = m;
  spaced.entries[0].artifact = "has space.json";
  CHECK_THROWS_AS(export_concat_list(spaced), AssemblyError);
}

TEST_CASE("property: manifests tile the song for random plans and random failures") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 150; ++trial) {
    auto f = fixture(rng(), 24 * (20 + static_cast<std::int64_t>(rng() % 280)));
    std::size_t dropped = 0;
    for (auto& [id, sel] : f.all) {
      if (rng() % 5 == 0) {
        sel.clip.reset();
        sel.failure = "x";
        ++dropped;
      }
    }
    const auto m = assemble(f.plan, f.all, f.audio);
    REQUIRE(m.gaps().size() == dropped);
    std::int64_t t = 0;
    for (const auto& e : m.entries) {
      REQUIRE(e.span.start().frames() == t);
      t = e.span.end().frames();
    }
    REQUIRE(t == f.plan.duration.frames());
  }
}
