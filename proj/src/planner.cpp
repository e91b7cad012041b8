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

#include "mvforge/planner.hpp"

#include <algorithm>
#include <cstdio>
#include <map>

#include "mvforge/errors.hpp"
#include "mvforge/util.hpp"

namespace mvforge {
namespace {

using nlohmann::json;

std::string shot_id_for(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "shot-%03zu", index + 1);
  return buf;
}

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

// Cost of covering `length` frames between two candidate boundaries, or
// nullopt when not even a synthetic split is legal.
std::optional<PlanCost> edge_cost(std::int64_t length, const PlannerConstraints& c) {
  const std::int64_t lo = c.min_shot.frames();
  const std::int64_t hi = c.max_shot.frames();
  if (length < lo) return std::nullopt;
  const std::int64_t pieces = length <= hi ? 1 : ceil_div(length, hi);
  const std::int64_t base = length / pieces;
  const std::int64_t extra = length % pieces;  // this many pieces get base + 1
  if (base < lo) return std::nullopt;

  PlanCost cost;
  cost.synthetic_boundaries = pieces - 1;
  const std::int64_t target = c.target_shot.frames();
  for (const std::int64_t d : {base + 1, base}) {
    const std::int64_t count = d == base + 1 ? extra : pieces - extra;
    if (count == 0) continue;
    if (d > target) cost.over_target_shots += count;
    cost.deviation += count * (d - target) * (d - target);
  }
  return cost;
}

SectionLabel majority_label(const FrameSpan& span, const std::vector<StructureSegment>& segments) {
  SectionLabel best = SectionLabel::kInstrumental;
  std::int64_t best_frames = 0;
  for (const auto& seg : segments) {
    const std::int64_t f = span.overlap_frames(seg.span);
    if (f > best_frames) {
      best_frames = f;
      best = seg.label;
    }
  }
  return best;
}

std::vector<LyricLine> lines_in(const FrameSpan& span, const std::vector<LyricLine>& lyrics) {
  std::vector<LyricLine> out;
  for (const auto& l : lyrics) {
    if (l.span.intersects(span)) out.push_back(l);
  }
  return out;
}

// Recomputes continuity flags and subclip keyframe sources from shot data.
void refresh_continuity(ShotPlan& plan) {
  for (std::size_t i = 0; i < plan.shots.size(); ++i) {
    auto& shot = plan.shots[i];
    if (i == 0) {
      shot.continuity_from_previous = false;
      continue;
    }
    const auto& prev = plan.shots[i - 1];
    const bool natural = shot.section_label == prev.section_label && shot.cast == prev.cast;
    shot.continuity_from_previous = shot.continuity_override.value_or(natural);
  }
  std::map<std::string, bool, std::less<>> continuity;
  for (const auto& s : plan.shots) continuity[s.shot_id] = s.continuity_from_previous;
  std::string previous_parent;
  for (auto& sc : plan.subclips) {
    const bool first_of_shot = sc.parent_shot != previous_parent;
    previous_parent = sc.parent_shot;
    if (first_of_shot) {
      sc.keyframe_source = continuity[sc.parent_shot] ? KeyframeSource::kPreviousLastFrame
                                                      : KeyframeSource::kGeneratedImage;
    } else {
      sc.keyframe_source = KeyframeSource::kPreviousLastFrame;
    }
  }
}

json constraints_to_json(const PlannerConstraints& c) {
  return {{"min_shot", c.min_shot.frames()},
          {"max_shot", c.max_shot.frames()},
          {"min_subclip", c.min_subclip.frames()},
          {"max_subclip", c.max_subclip.frames()},
          {"max_subclips_per_shot", c.max_subclips_per_shot},
          {"target_shot", c.target_shot.frames()},
          {"section_boundary_bonus", c.section_boundary_bonus}};
}

PlannerConstraints constraints_from_json(const json& j) {
  reject_unknown_keys(j,
                      {"min_shot", "max_shot", "min_subclip", "max_subclip",
                       "max_subclips_per_shot", "target_shot", "section_boundary_bonus"},
                      "constraints");
  PlannerConstraints c;
  try {
    c.min_shot = FrameTime(j.at("min_shot").get<std::int64_t>());
    c.max_shot = FrameTime(j.at("max_shot").get<std::int64_t>());
    c.min_subclip = FrameTime(j.at("min_subclip").get<std::int64_t>());
    c.max_subclip = FrameTime(j.at("max_subclip").get<std::int64_t>());
    c.max_subclips_per_shot = j.at("max_subclips_per_shot").get<int>();
    c.target_shot = FrameTime(j.at("target_shot").get<std::int64_t>());
    c.section_boundary_bonus = j.at("section_boundary_bonus").get<std::int64_t>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("constraints: ") + e.what());
  }
  return c;
}

}  // namespace

void PlannerConstraints::validate() const {
  if (min_shot.frames() <= 0 || min_shot > max_shot) {
    throw ConfigError("need 0 < min_shot <= max_shot");
  }
  if (min_subclip.frames() <= 0 || min_subclip > max_subclip) {
    throw ConfigError("need 0 < min_subclip <= max_subclip");
  }
  if (max_subclips_per_shot < 1) throw ConfigError("max_subclips_per_shot must be >= 1");
  if (max_subclip.frames() * max_subclips_per_shot < max_shot.frames()) {
    throw ConfigError("max_subclip * max_subclips_per_shot must be >= max_shot");
  }
}

std::string_view to_string(KeyframeSource source) {
  return source == KeyframeSource::kGeneratedImage ? "generated_image" : "previous_last_frame";
}

const Shot* ShotPlan::find_shot(std::string_view shot_id) const {
  for (const auto& s : shots) {
    if (s.shot_id == shot_id) return &s;
  }
  return nullptr;
}

const SubClip* ShotPlan::find_subclip(std::string_view subclip_id) const {
  for (const auto& s : subclips) {
    if (s.subclip_id == subclip_id) return &s;
  }
  return nullptr;
}

std::vector<Boundary> candidate_boundaries(const MusicContext& ctx) {
  const std::int64_t end = ctx.metadata.duration.frames();
  std::map<std::int64_t, bool> frames;  // frame -> is section transition
  frames[0] = false;
  frames[end] = false;
  auto add = [&](std::int64_t f, bool section) {
    if (f <= 0 || f >= end) return;
    auto [it, inserted] = frames.emplace(f, section);
    if (!inserted) it->second = it->second || section;
  };
  for (const auto& seg : ctx.structure) add(seg.span.start().frames(), true);
  for (const auto& line : ctx.lyrics) {
    add(line.span.start().frames(), false);
    add(line.span.end().frames(), false);
  }
  std::vector<Boundary> out;
  out.reserve(frames.size());
  for (const auto& [f, section] : frames) out.push_back({f, section});
  return out;
}

ShotPlan segment_song(const MusicContext& ctx, const PlannerConstraints& constraints) {
  constraints.validate();
  const std::int64_t end = ctx.metadata.duration.frames();
  if (end <= 0) throw DomainError("song duration must be positive");

  ShotPlan plan;
  plan.song_id = ctx.metadata.song_id;
  plan.duration = ctx.metadata.duration;
  plan.constraints = constraints;

  std::vector<std::pair<std::int64_t, std::int64_t>> spans;  // [start, end)
  if (end < constraints.min_shot.frames()) {
    plan.undersized = true;
    spans.emplace_back(0, end);
  } else {
    const auto cands = candidate_boundaries(ctx);
    const std::size_t n = cands.size();
    std::vector<std::optional<PlanCost>> best(n);
    std::vector<std::size_t> from(n, 0);
    best[0] = PlanCost{};
    for (std::size_t i = 1; i < n; ++i) {
      PlanCost arrive{};
      if (i + 1 < n && cands[i].section_transition) {
        arrive.deviation = -constraints.section_boundary_bonus;
      }
      for (std::size_t j = 0; j < i; ++j) {
        if (!best[j]) continue;
        const auto edge = edge_cost(cands[i].frame - cands[j].frame, constraints);
        if (!edge) continue;
        PlanCost total = *best[j];
        total += *edge;
        total += arrive;
        if (!best[i] || total < *best[i]) {
          best[i] = total;
          from[i] = j;
        }
      }
    }
    if (!best[n - 1]) {
      throw ConfigError("no legal tiling of a " + std::to_string(end) +
                        "-frame song under the shot bounds");
    }
    plan.cost = *best[n - 1];

    std::vector<std::size_t> path;
    for (std::size_t i = n - 1; i != 0; i = from[i]) path.push_back(i);
    path.push_back(0);
    std::reverse(path.begin(), path.end());
    for (std::size_t k = 1; k < path.size(); ++k) {
      const std::int64_t a = cands[path[k - 1]].frame;
      const std::int64_t b = cands[path[k]].frame;
      const std::int64_t length = b - a;
      const std::int64_t pieces =
          length <= constraints.max_shot.frames() ? 1 : ceil_div(length, constraints.max_shot.frames());
      const std::int64_t base = length / pieces;
      const std::int64_t extra = length % pieces;
      std::int64_t cursor = a;
      for (std::int64_t p = 0; p < pieces; ++p) {
        const std::int64_t d = base + (p < extra ? 1 : 0);
        spans.emplace_back(cursor, cursor + d);
        cursor += d;
      }
    }
  }

  for (std::size_t i = 0; i < spans.size(); ++i) {
    const FrameSpan span(spans[i].first, spans[i].second);
    plan.shots.push_back(Shot{.shot_id = shot_id_for(i),
                              .span = span,
                              .section_label = majority_label(span, ctx.structure),
                              .lyric_lines = lines_in(span, ctx.lyrics)});
  }
  refresh_continuity(plan);

  for (const auto& shot : plan.shots) {
    if (plan.undersized) {
      plan.subclips.push_back({shot.shot_id + ".1", shot.shot_id, shot.span,
                               KeyframeSource::kGeneratedImage});
      continue;
    }
    auto subs = split_shot(shot, constraints);
    plan.subclips.insert(plan.subclips.end(), subs.begin(), subs.end());
  }
  refresh_continuity(plan);
  return plan;
}

std::vector<SubClip> split_shot(const Shot& shot, const PlannerConstraints& c) {
  const std::int64_t d = shot.span.duration_frames();
  const std::int64_t max_total = c.max_subclip.frames() * c.max_subclips_per_shot;
  if (d > max_total) {
    throw PlannerError("shot " + shot.shot_id + " is " + std::to_string(d) +
                       " frames, longer than " + std::to_string(max_total) +
                       " frames of subclips allow");
  }
  for (std::int64_t k = ceil_div(d, c.max_subclip.frames()); k <= c.max_subclips_per_shot; ++k) {
    const std::int64_t base = d / k;
    const std::int64_t extra = d % k;
    const std::int64_t longest = base + (extra > 0 ? 1 : 0);
    if (base < c.min_subclip.frames() || longest > c.max_subclip.frames()) continue;

    std::vector<SubClip> out;
    std::int64_t cursor = shot.span.start().frames();
    for (std::int64_t i = 0; i < k; ++i) {
      const std::int64_t len = base + (i < extra ? 1 : 0);
      const auto source = (i == 0 && !shot.continuity_from_previous)
                              ? KeyframeSource::kGeneratedImage
                              : KeyframeSource::kPreviousLastFrame;
      out.push_back({shot.shot_id + "." + std::to_string(i + 1), shot.shot_id,
                     FrameSpan(cursor, cursor + len), source});
      cursor += len;
    }
    return out;
  }
  throw PlannerError("shot " + shot.shot_id + " (" + std::to_string(d) +
                     " frames) cannot be split into subclips within [" +
                     std::to_string(c.min_subclip.frames()) + ", " +
                     std::to_string(c.max_subclip.frames()) + "] frames");
}

LipsyncPolicy default_lipsync_policy() {
  return [](const ShotPlan& plan, std::size_t index, const MusicContext& ctx) {
    const Shot& shot = plan.shots.at(index);
    for (const auto& seg : ctx.structure) {
      if (seg.label == SectionLabel::kChorus && shot.span.contains(seg.span.start())) return true;
    }
    // First shot carrying sung lyrics within some section.
    for (const auto& seg : ctx.structure) {
      for (std::size_t k = 0; k < plan.shots.size(); ++k) {
        const Shot& candidate = plan.shots[k];
        if (!candidate.span.intersects(seg.span)) continue;
        const bool sung = std::any_of(
            ctx.lyrics.begin(), ctx.lyrics.end(), [&](const LyricLine& l) {
              return l.span.intersects(seg.span) && l.span.intersects(candidate.span) &&
                     std::max(l.span.start(), std::max(seg.span.start(), candidate.span.start())) <
                         std::min(l.span.end(), std::min(seg.span.end(), candidate.span.end()));
            });
        if (sung) {
          if (k == index) return true;
          break;
        }
      }
    }
    return false;
  };
}

LipsyncPolicy never_lipsync_policy() {
  return [](const ShotPlan&, std::size_t, const MusicContext&) { return false; };
}

ShotPlan assign_lipsync_flags(ShotPlan plan, const MusicContext& ctx, const LipsyncPolicy& policy) {
  std::vector<bool> flags(plan.shots.size());
  for (std::size_t i = 0; i < plan.shots.size(); ++i) flags[i] = policy(plan, i, ctx);
  for (std::size_t i = 0; i < plan.shots.size(); ++i) plan.shots[i].lipsync = flags[i];
  return plan;
}

ShotPlan attach_script(ShotPlan plan, const std::vector<ShotScript>& scripts) {
  for (const auto& script : scripts) {
    auto it = std::find_if(plan.shots.begin(), plan.shots.end(),
                           [&](const Shot& s) { return s.shot_id == script.shot_id; });
    if (it == plan.shots.end()) {
      throw NotFoundError("script references unknown shot " + script.shot_id);
    }
    it->description = script.description;
    std::vector<std::string> cast;
    for (const auto& m : script.mentions) cast.push_back(to_lower(trim(m)));
    std::sort(cast.begin(), cast.end());
    cast.erase(std::unique(cast.begin(), cast.end()), cast.end());
    it->cast = std::move(cast);
  }
  refresh_continuity(plan);
  return plan;
}

ShotPlan set_continuity_override(ShotPlan plan, std::string_view shot_id,
                                 std::optional<bool> value) {
  auto it = std::find_if(plan.shots.begin(), plan.shots.end(),
                         [&](const Shot& s) { return s.shot_id == shot_id; });
  if (it == plan.shots.end()) throw NotFoundError("unknown shot " + std::string(shot_id));
  it->continuity_override = value;
  refresh_continuity(plan);
  return plan;
}

std::vector<Violation> validate_plan(const ShotPlan& plan) {
  std::vector<Violation> out;
  const auto& c = plan.constraints;
  std::int64_t cursor = 0;
  for (const auto& shot : plan.shots) {
    if (shot.span.start().frames() != cursor) {
      out.push_back({shot.shot_id, "does not start where the previous shot ends (" +
                                       std::to_string(cursor) + ")"});
    }
    cursor = shot.span.end().frames();
    const auto d = shot.span.duration_frames();
    if (!plan.undersized && (d < c.min_shot.frames() || d > c.max_shot.frames())) {
      out.push_back({shot.shot_id, "duration " + std::to_string(d) + " outside shot bounds"});
    }
  }
  if (cursor != plan.duration.frames()) {
    out.push_back({"shots", "cover " + std::to_string(cursor) + " frames, song has " +
                                std::to_string(plan.duration.frames())});
  }

  std::size_t si = 0;
  for (std::size_t k = 0; k < plan.subclips.size();) {
    if (si >= plan.shots.size()) {
      out.push_back({plan.subclips[k].subclip_id, "belongs to no shot"});
      break;
    }
    const Shot& shot = plan.shots[si];
    std::int64_t at = shot.span.start().frames();
    int count = 0;
    while (k < plan.subclips.size() && plan.subclips[k].parent_shot == shot.shot_id) {
      const auto& sc = plan.subclips[k];
      if (sc.span.start().frames() != at) out.push_back({sc.subclip_id, "gap or overlap in shot"});
      at = sc.span.end().frames();
      const auto d = sc.span.duration_frames();
      if (!plan.undersized && (d < c.min_subclip.frames() || d > c.max_subclip.frames())) {
        out.push_back({sc.subclip_id, "duration " + std::to_string(d) + " outside subclip bounds"});
      }
      const auto expected = (count == 0 && !shot.continuity_from_previous)
                                ? KeyframeSource::kGeneratedImage
                                : KeyframeSource::kPreviousLastFrame;
      if (sc.keyframe_source != expected) out.push_back({sc.subclip_id, "wrong keyframe source"});
      ++count;
      ++k;
    }
    if (at != shot.span.end().frames()) out.push_back({shot.shot_id, "subclips do not tile the shot"});
    if (count < 1 || count > c.max_subclips_per_shot) {
      out.push_back({shot.shot_id, "has " + std::to_string(count) + " subclips"});
    }
    ++si;
  }
  if (si < plan.shots.size()) out.push_back({plan.shots[si].shot_id, "has no subclips"});
  return out;
}

json plan_to_json(const ShotPlan& plan) {
  json shots = json::array();
  for (const auto& s : plan.shots) {
    json lines = json::array();
    for (const auto& l : s.lyric_lines) {
      lines.push_back({{"text", l.text}, {"span", span_to_json(l.span)}, {"confidence", l.confidence}});
    }
    shots.push_back({{"shot_id", s.shot_id},
                     {"span", span_to_json(s.span)},
                     {"section_label", to_string(s.section_label)},
                     {"lyric_lines", std::move(lines)},
                     {"description", s.description ? json(*s.description) : json(nullptr)},
                     {"lipsync", s.lipsync},
                     {"continuity_from_previous", s.continuity_from_previous},
                     {"continuity_override",
                      s.continuity_override ? json(*s.continuity_override) : json(nullptr)},
                     {"cast", s.cast}});
  }
  json subclips = json::array();
  for (const auto& sc : plan.subclips) {
    subclips.push_back({{"subclip_id", sc.subclip_id},
                        {"parent_shot", sc.parent_shot},
                        {"span", span_to_json(sc.span)},
                        {"keyframe_source", to_string(sc.keyframe_source)}});
  }
  return {{"plan_schema", kPlanSchemaVersion},
          {"fps", kFramesPerSecond},
          {"song_id", plan.song_id},
          {"duration", plan.duration.frames()},
          {"undersized", plan.undersized},
          {"cost",
           {{"synthetic_boundaries", plan.cost.synthetic_boundaries},
            {"over_target_shots", plan.cost.over_target_shots},
            {"deviation", plan.cost.deviation}}},
          {"constraints", constraints_to_json(plan.constraints)},
          {"shots", std::move(shots)},
          {"subclips", std::move(subclips)}};
}

ShotPlan plan_from_json(const json& j) {
  reject_unknown_keys(j,
                      {"plan_schema", "fps", "song_id", "duration", "undersized", "cost",
                       "constraints", "shots", "subclips"},
                      "plan");
  try {
    if (j.at("plan_schema").get<int>() != kPlanSchemaVersion) {
      throw ValidationError("unsupported plan_schema " + j.at("plan_schema").dump());
    }
    if (j.at("fps").get<std::int64_t>() != kFramesPerSecond) {
      throw ValidationError("plan fps must be " + std::to_string(kFramesPerSecond));
    }
    ShotPlan plan;
    plan.song_id = j.at("song_id").get<std::string>();
    plan.duration = FrameTime(j.at("duration").get<std::int64_t>());
    plan.undersized = j.at("undersized").get<bool>();
    const auto& cj = j.at("cost");
    plan.cost = {cj.at("synthetic_boundaries").get<std::int64_t>(),
                 cj.at("over_target_shots").get<std::int64_t>(),
                 cj.at("deviation").get<std::int64_t>()};
    plan.constraints = constraints_from_json(j.at("constraints"));
    for (const auto& sj : j.at("shots")) {
      reject_unknown_keys(sj,
                          {"shot_id", "span", "section_label", "lyric_lines", "description",
                           "lipsync", "continuity_from_previous", "continuity_override", "cast"},
                          "shot");
      Shot s{.shot_id = sj.at("shot_id").get<std::string>(),
             .span = span_from_json(sj.at("span"), "shot.span"),
             .section_label = parse_section_label(sj.at("section_label").get<std::string>())};
      for (const auto& lj : sj.at("lyric_lines")) {
        s.lyric_lines.push_back({lj.at("text").get<std::string>(),
                                 span_from_json(lj.at("span"), "shot.lyric_lines.span"),
                                 lj.at("confidence").get<double>()});
      }
      if (!sj.at("description").is_null()) s.description = sj.at("description").get<std::string>();
      s.lipsync = sj.at("lipsync").get<bool>();
      s.continuity_from_previous = sj.at("continuity_from_previous").get<bool>();
      if (!sj.at("continuity_override").is_null()) {
        s.continuity_override = sj.at("continuity_override").get<bool>();
      }
      s.cast = sj.at("cast").get<std::vector<std::string>>();
      plan.shots.push_back(std::move(s));
    }
    for (const auto& cj2 : j.at("subclips")) {
      reject_unknown_keys(cj2, {"subclip_id", "parent_shot", "span", "keyframe_source"}, "subclip");
      const auto src = cj2.at("keyframe_source").get<std::string>();
      if (src != "generated_image" && src != "previous_last_frame") {
        throw ValidationError("unknown keyframe_source '" + src + "'");
      }
      plan.subclips.push_back({cj2.at("subclip_id").get<std::string>(),
                               cj2.at("parent_shot").get<std::string>(),
                               span_from_json(cj2.at("span"), "subclip.span"),
                               src == "generated_image" ? KeyframeSource::kGeneratedImage
                                                        : KeyframeSource::kPreviousLastFrame});
    }
    return plan;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("plan: ") + e.what());
  }
}

}  // namespace mvforge
