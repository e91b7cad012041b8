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

// Shared test helpers and the independent oracles the tests compare
// against. The oracles deliberately avoid calling into the code they check:
// they recompute candidate sets, costs and selections from first principles
// with the most naive algorithm that is still fast enough.

#ifndef MVFORGE_TESTS_SUPPORT_HPP_
#define MVFORGE_TESTS_SUPPORT_HPP_

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "mvforge/context.hpp"
#include "mvforge/evaluation.hpp"
#include "mvforge/planner.hpp"
#include "mvforge/verifier.hpp"

namespace mvforge::testing {

inline std::filesystem::path fixture_dir() { return MVFORGE_FIXTURE_DIR; }
inline std::filesystem::path song_fixture(const std::string& name) {
  return fixture_dir() / "songs" / name;
}

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("mvforge-" + tag + "-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// ---- songs ------------------------------------------------------------------

/// Random well-formed context: sections tile the song, lyric lines sit in
/// vocal sections without overlapping.
inline MusicContext random_context(std::mt19937_64& rng, std::int64_t frames,
                                   double lyric_density = 0.5, const std::string& id = "song") {
  std::uniform_int_distribution<std::int64_t> sec_len(24 * 6, 24 * 40);
  static constexpr SectionLabel kOrder[] = {SectionLabel::kIntro,  SectionLabel::kVerse,
                                            SectionLabel::kChorus, SectionLabel::kVerse,
                                            SectionLabel::kChorus, SectionLabel::kBridge,
                                            SectionLabel::kChorus, SectionLabel::kInstrumental,
                                            SectionLabel::kOutro};
  MusicContext ctx;
  ctx.metadata.song_id = id;
  ctx.metadata.duration = FrameTime(frames);
  ctx.metadata.language_tag = "en";
  ctx.metadata.mix_audio_ref = "audio/" + id + ".wav";
  std::int64_t t = 0;
  std::size_t k = 0;
  while (t < frames) {
    std::int64_t e = std::min(frames, t + sec_len(rng));
    if (frames - e < 24) e = frames;
    ctx.structure.push_back({kOrder[std::min<std::size_t>(k, 8)], FrameSpan(t, e)});
    t = e;
    ++k;
  }
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<std::int64_t> line_len(24, 24 * 6);
  std::uniform_int_distribution<std::int64_t> gap(0, 24 * 3);
  int n = 0;
  for (const auto& seg : ctx.structure) {
    if (seg.label == SectionLabel::kInstrumental || u(rng) > lyric_density * 2) continue;
    std::int64_t s = seg.span.start().frames() + gap(rng);
    while (true) {
      const std::int64_t e = s + line_len(rng);
      if (e > seg.span.end().frames()) break;
      ctx.lyrics.push_back({"line " + std::to_string(++n), FrameSpan(s, e), 0.9});
      s = e + gap(rng);
    }
  }
  return ctx;
}

// ---- planner oracle ---------------------------------------------------------

struct OracleCost {
  std::int64_t over_target = 0;
  std::int64_t deviation = 0;
  friend auto operator<=>(const OracleCost&, const OracleCost&) = default;
};

/// Candidate boundary frames and their section flags, recomputed from the
/// context: {0, end}, section starts, lyric starts and ends strictly inside.
inline std::map<std::int64_t, bool> oracle_candidates(const MusicContext& ctx) {
  const std::int64_t end = ctx.metadata.duration.frames();
  std::map<std::int64_t, bool> c{{0, false}, {end, false}};
  for (const auto& s : ctx.structure) {
    const auto f = s.span.start().frames();
    if (f > 0 && f < end) c[f] = true;
  }
  for (const auto& l : ctx.lyrics) {
    for (const auto f : {l.span.start().frames(), l.span.end().frames()}) {
      if (f > 0 && f < end && !c.count(f)) c[f] = false;
    }
  }
  return c;
}

/// Best cost over every legal tiling that only cuts at candidate
/// boundaries; nullopt when none exists. Top-down recursion from the song
/// end with memoization on the start frame.
inline std::optional<OracleCost> oracle_plan_cost(const MusicContext& ctx,
                                                  const PlannerConstraints& c) {
  const auto cand = oracle_candidates(ctx);
  const std::vector<std::pair<std::int64_t, bool>> pts(cand.begin(), cand.end());
  const std::int64_t target = c.target_shot.frames();
  std::map<std::size_t, std::optional<OracleCost>> memo;
  std::function<std::optional<OracleCost>(std::size_t)> best_from = [&](std::size_t i) -> std::optional<OracleCost> {
    if (i + 1 == pts.size()) return OracleCost{};
    if (auto it = memo.find(i); it != memo.end()) return it->second;
    std::optional<OracleCost> best;
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      const std::int64_t d = pts[j].first - pts[i].first;
      if (d < c.min_shot.frames()) continue;
      if (d > c.max_shot.frames()) break;
      auto rest = best_from(j);
      if (!rest) continue;
      OracleCost here{d > target ? 1 : 0, (d - target) * (d - target)};
      // Bonus for cutting on a section transition (never for the song end).
      if (j + 1 < pts.size() && pts[j].second) here.deviation -= c.section_boundary_bonus;
      OracleCost total{here.over_target + rest->over_target, here.deviation + rest->deviation};
      if (!best || total < *best) best = total;
    }
    memo[i] = best;
    return best;
  };
  return best_from(0);
}

/// Brute force over all subsets of interior candidates; only for small sets.
inline std::optional<OracleCost> brute_force_plan_cost(const MusicContext& ctx,
                                                       const PlannerConstraints& c) {
  const auto cand = oracle_candidates(ctx);
  const std::vector<std::pair<std::int64_t, bool>> pts(cand.begin(), cand.end());
  const std::size_t inner = pts.size() - 2;
  const std::int64_t target = c.target_shot.frames();
  std::optional<OracleCost> best;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << inner); ++mask) {
    std::vector<std::size_t> cuts{0};
    for (std::size_t b = 0; b < inner; ++b) {
      if (mask >> b & 1) cuts.push_back(b + 1);
    }
    cuts.push_back(pts.size() - 1);
    OracleCost cost;
    bool legal = true;
    for (std::size_t k = 1; k < cuts.size() && legal; ++k) {
      const std::int64_t d = pts[cuts[k]].first - pts[cuts[k - 1]].first;
      legal = d >= c.min_shot.frames() && d <= c.max_shot.frames();
      cost.over_target += d > target ? 1 : 0;
      cost.deviation += (d - target) * (d - target);
      if (k + 1 < cuts.size() && pts[cuts[k]].second) cost.deviation -= c.section_boundary_bonus;
    }
    if (legal && (!best || cost < *best)) best = cost;
  }
  return best;
}

// ---- split oracle -----------------------------------------------------------

/// Every composition of `d` into k parts within [lo, hi], for the smallest
/// k <= max_k that has any. Empty when no k works.
inline std::vector<std::vector<std::int64_t>> legal_splits(std::int64_t d, std::int64_t lo,
                                                           std::int64_t hi, int max_k) {
  for (int k = 1; k <= max_k; ++k) {
    std::vector<std::vector<std::int64_t>> out;
    std::vector<std::int64_t> cur;
    std::function<void(std::int64_t, int)> rec = [&](std::int64_t left, int parts) {
      if (parts == 0) {
        if (left == 0) out.push_back(cur);
        return;
      }
      for (std::int64_t x = lo; x <= std::min(hi, left); ++x) {
        if (left - x < lo * (parts - 1) || left - x > hi * (parts - 1)) continue;
        cur.push_back(x);
        rec(left - x, parts - 1);
        cur.pop_back();
      }
    };
    rec(d, k);
    if (!out.empty()) return out;
  }
  return {};
}

// ---- selection oracle -------------------------------------------------------

/// What a gate-then-argmax loop must pick given every round's verdicts:
/// the first round with a passing candidate wins, argmax of the combined
/// score within it (first index on ties); when no round passes, the best
/// combined score over all rounds (earliest on ties), preferring verdicts
/// that are not judge errors.
struct OracleSelection {
  std::string selected;
  int round = 0;
  bool fallback = false;
};

inline int oracle_score(const Verdict& v, VideoScoring scoring) {
  if (v.modality == Modality::kImage) return v.adherence;
  return scoring == VideoScoring::kFull ? v.alignment + v.identity : 0;
}

inline OracleSelection oracle_select(const std::vector<std::vector<Verdict>>& rounds,
                                     VideoScoring scoring) {
  for (std::size_t r = 0; r < rounds.size(); ++r) {
    const Verdict* best = nullptr;
    for (const auto& v : rounds[r]) {
      if (!v.gate_pass) continue;
      if (best == nullptr || oracle_score(v, scoring) > oracle_score(*best, scoring)) best = &v;
    }
    if (best) return {best->candidate_id, static_cast<int>(r + 1), false};
  }
  const Verdict* best = nullptr;
  for (const auto& round : rounds) {
    for (const auto& v : round) {
      if (best == nullptr) {
        best = &v;
        continue;
      }
      const auto key = [&](const Verdict& x) { return std::pair(!x.judge_error, oracle_score(x, scoring)); };
      if (key(v) > key(*best)) best = &v;
    }
  }
  return {best ? best->candidate_id : "", static_cast<int>(rounds.size()), true};
}

// ---- correlation oracle -----------------------------------------------------

/// Textbook single-pass Pearson formula evaluated in long double:
///   r = (nΣxy − ΣxΣy) / sqrt((nΣx² − (Σx)²)(nΣy² − (Σy)²))
inline std::optional<long double> closed_form_pearson(const std::vector<double>& x,
                                                      const std::vector<double>& y) {
  const long double n = static_cast<long double>(x.size());
  long double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const long double a = x[i], b = y[i];
    sx += a;
    sy += b;
    sxx += a * a;
    syy += b * b;
    sxy += a * b;
  }
  const long double vx = n * sxx - sx * sx, vy = n * syy - sy * sy;
  if (vx <= 0 || vy <= 0) return std::nullopt;
  return (n * sxy - sx * sy) / std::sqrt(vx * vy);
}

/// Random complete card with integer scores 1-5.
inline ScoreCard random_card(std::mt19937_64& rng, const std::string& video, const std::string& rater) {
  std::uniform_int_distribution<int> s(1, 5);
  ScoreCard c{video, rater, {}};
  for (auto code : kCriterionCodes) c.scores[std::string(code)] = s(rng);
  return c;
}

}  // namespace mvforge::testing

#endif  // MVFORGE_TESTS_SUPPORT_HPP_
