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

#include "mvforge/character_bank.hpp"

#include <algorithm>
#include <set>

#include "mvforge/context.hpp"
#include "mvforge/util.hpp"

namespace mvforge {
namespace {

using nlohmann::json;

bool is_appearance_key(std::string_view key) {
  return std::find(kAppearanceKeys.begin(), kAppearanceKeys.end(), key) != kAppearanceKeys.end();
}

std::string slug(std::string_view name) {
  std::string out;
  for (const auto& tok : tokenize(name)) {
    if (!out.empty()) out += '-';
    out += tok;
  }
  return out.empty() ? "character" : out;
}

// True when `needle` occurs as a contiguous token run inside `hay`.
bool contains_run(const std::vector<std::string>& hay, const std::vector<std::string>& needle) {
  if (needle.empty() || needle.size() > hay.size()) return false;
  return std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end();
}

std::string_view strip_section(std::string_view text) {
  const auto pos = text.find(kCharactersOpen);
  return pos == std::string_view::npos ? text : text.substr(0, pos);
}

// Calls fn(id) for each @{id} marker and returns the text with every marker
// replaced by fn's result.
template <typename Fn>
std::string rewrite_markers(std::string_view text, Fn&& fn) {
  std::string out;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto at = text.find("@{", i);
    if (at == std::string_view::npos) break;
    const auto close = text.find('}', at + 2);
    if (close == std::string_view::npos) break;
    out.append(text.substr(i, at - i));
    out += fn(text.substr(at + 2, close - at - 2));
    i = close + 1;
  }
  out.append(text.substr(std::min(i, text.size())));
  return out;
}

std::vector<std::string> name_tokens(const CharacterProfile& p) {
  std::vector<std::string> toks = tokenize(p.display_name);
  for (const auto& a : p.aliases) {
    auto more = tokenize(a);
    toks.insert(toks.end(), more.begin(), more.end());
  }
  std::sort(toks.begin(), toks.end());
  toks.erase(std::unique(toks.begin(), toks.end()), toks.end());
  return toks;
}

}  // namespace

std::string_view default_appearance(std::string_view key) {
  if (key == "gender") return "unspecified gender";
  if (key == "age") return "adult";
  if (key == "nationality") return "unspecified nationality";
  if (key == "hair") return "short dark hair";
  if (key == "face") return "calm oval face";
  if (key == "skin_color") return "medium skin tone";
  if (key == "outfit") return "plain casual clothes";
  throw ValidationError("unknown appearance key '" + std::string(key) + "'");
}

CharacterConflictError::CharacterConflictError(std::string name, std::string field, std::string a,
                                               std::string b)
    : ValidationError("character '" + name + "': conflicting " + field + ": '" + a + "' vs '" + b +
                      "'"),
      field_(std::move(field)) {}

std::string render_descriptor(std::string_view display_name,
                              const std::map<std::string, std::string>& appearance) {
  std::string out = "<<";
  out += display_name;
  out += ">>";
  const char* sep = " ";
  for (const auto key : kAppearanceKeys) {
    auto it = appearance.find(std::string(key));
    if (it == appearance.end()) {
      throw ValidationError("appearance is missing '" + std::string(key) + "'");
    }
    out += sep;
    for (char c : key) out += c == '_' ? ' ' : c;
    out += ": ";
    out += it->second;
    sep = "; ";
  }
  out += '.';
  return out;
}

CastRecord cast_record_from_json(const json& j) {
  reject_unknown_keys(j, {"name", "aliases", "appearance"}, "cast record");
  CastRecord r;
  try {
    r.name = j.at("name").get<std::string>();
    if (j.contains("aliases")) r.aliases = j.at("aliases").get<std::vector<std::string>>();
    if (j.contains("appearance")) {
      for (const auto& [k, v] : j.at("appearance").items()) {
        if (!is_appearance_key(k)) throw ValidationError("unknown appearance key '" + k + "'");
        r.appearance[k] = v.get<std::string>();
      }
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("cast record: ") + e.what());
  }
  return r;
}

json cast_record_to_json(const CastRecord& r) {
  return {{"name", r.name}, {"aliases", r.aliases}, {"appearance", r.appearance}};
}

const CharacterProfile* CharacterBank::find(std::string_view character_id) const {
  auto it = profiles_.find(std::string(character_id));
  return it == profiles_.end() ? nullptr : &it->second;
}

void CharacterBank::add(CharacterProfile profile) {
  if (frozen_) {
    throw BankFrozenError("character bank for '" + song_id_ + "' is frozen; cannot add '" +
                          profile.display_name + "'");
  }
  if (profiles_.count(profile.character_id)) {
    throw ValidationError("duplicate character_id '" + profile.character_id + "'");
  }
  const auto lowered = to_lower(profile.display_name);
  for (const auto& [id, p] : profiles_) {
    if (to_lower(p.display_name) == lowered) {
      throw ValidationError("duplicate display_name '" + profile.display_name + "'");
    }
  }
  profiles_.emplace(profile.character_id, std::move(profile));
}

BankBuild build_bank(std::string song_id, const std::vector<CastRecord>& records) {
  // Merge by lowercased, trimmed name in first-seen order.
  std::vector<CastRecord> merged;
  for (const auto& rec : records) {
    const auto name = trim(rec.name);
    if (name.empty()) throw ValidationError("cast record without a name");
    for (const auto& [k, v] : rec.appearance) {
      if (!is_appearance_key(k)) throw ValidationError("unknown appearance key '" + k + "'");
    }
    auto it = std::find_if(merged.begin(), merged.end(),
                           [&](const CastRecord& m) { return to_lower(m.name) == to_lower(name); });
    if (it == merged.end()) {
      merged.push_back(rec);
      merged.back().name = name;
      continue;
    }
    for (const auto& [k, v] : rec.appearance) {
      auto [slot, inserted] = it->appearance.emplace(k, v);
      if (!inserted && trim(slot->second) != trim(v)) {
        throw CharacterConflictError(it->name, k, slot->second, v);
      }
    }
    for (const auto& a : rec.aliases) {
      if (std::find(it->aliases.begin(), it->aliases.end(), a) == it->aliases.end()) {
        it->aliases.push_back(a);
      }
    }
  }

  BankBuild out{CharacterBank(std::move(song_id)), {}};
  std::set<std::string> used_ids;
  for (const auto& rec : merged) {
    CharacterProfile p;
    p.display_name = rec.name;
    p.aliases = rec.aliases;
    std::sort(p.aliases.begin(), p.aliases.end());
    std::string id = slug(rec.name);
    for (int n = 2; used_ids.count(id); ++n) id = slug(rec.name) + "-" + std::to_string(n);
    used_ids.insert(id);
    p.character_id = id;
    for (const auto key : kAppearanceKeys) {
      const std::string k(key);
      auto it = rec.appearance.find(k);
      if (it != rec.appearance.end() && !trim(it->second).empty()) {
        p.appearance[k] = trim(it->second);
      } else {
        p.appearance[k] = std::string(default_appearance(key));
        p.defaulted.push_back(k);
        out.warnings.push_back("character '" + rec.name + "': " + k + " defaulted");
      }
    }
    p.descriptor_block = render_descriptor(p.display_name, p.appearance);
    out.bank.add(std::move(p));
  }
  out.bank.freeze();
  return out;
}

Rational token_overlap(std::string_view mention, const CharacterProfile& profile) {
  const auto names = name_tokens(profile);
  if (names.empty()) return Rational(0);
  auto said = tokenize(mention);
  std::sort(said.begin(), said.end());
  said.erase(std::unique(said.begin(), said.end()), said.end());
  std::vector<std::string> common;
  std::set_intersection(said.begin(), said.end(), names.begin(), names.end(),
                        std::back_inserter(common));
  return Rational(static_cast<std::int64_t>(common.size()),
                  static_cast<std::int64_t>(names.size()));
}

const CharacterProfile& match(const CharacterBank& bank, std::string_view mention,
                              const Rational& threshold) {
  if (bank.empty()) throw NotFoundError("character bank is empty");
  const auto wanted = trim(mention);
  if (const auto* p = bank.find(wanted)) return *p;
  const auto lowered = to_lower(wanted);
  for (const auto& [id, p] : bank.profiles()) {
    if (to_lower(p.display_name) == lowered) return p;
    for (const auto& a : p.aliases) {
      if (to_lower(trim(a)) == lowered) return p;
    }
  }
  const CharacterProfile* best = nullptr;
  Rational best_score(-1);
  for (const auto& [id, p] : bank.profiles()) {  // ascending id: strict > keeps the smallest
    const auto s = token_overlap(wanted, p);
    if (s > best_score) {
      best_score = s;
      best = &p;
    }
  }
  if (best_score < threshold) {
    throw NoMatchError("no character matches '" + std::string(mention) + "' (best overlap " +
                       to_string(best_score) + ")");
  }
  return *best;
}

std::string marker(std::string_view character_id) {
  return "@{" + std::string(character_id) + "}";
}

std::string inject(std::string_view prompt_text, const std::vector<CharacterProfile>& profiles) {
  std::map<std::string, const CharacterProfile*> by_id;
  for (const auto& p : profiles) by_id.emplace(p.character_id, &p);
  std::string out = rewrite_markers(strip_section(prompt_text), [&](std::string_view id) {
    auto it = by_id.find(std::string(id));
    if (it == by_id.end()) {
      throw UnresolvedReferenceError("prompt references unknown character " + marker(id));
    }
    return it->second->display_name;
  });
  if (by_id.empty()) return out;
  out += kCharactersOpen;
  for (const auto& [id, p] : by_id) {
    out += p->descriptor_block;
    out += '\n';
  }
  out += kCharactersClose;
  return out;
}

bool references(std::string_view prompt_text, const CharacterProfile& profile) {
  const auto body = strip_section(prompt_text);
  if (body.find(marker(profile.character_id)) != std::string_view::npos) return true;
  const auto words = tokenize(body);
  if (contains_run(words, tokenize(profile.display_name))) return true;
  for (const auto& a : profile.aliases) {
    if (contains_run(words, tokenize(a))) return true;
  }
  return false;
}

std::string resolve_markers(std::string_view prompt_text, const CharacterBank& bank) {
  return rewrite_markers(prompt_text, [&](std::string_view id) {
    const auto* p = bank.find(id);
    if (!p) throw UnresolvedReferenceError("prompt references unknown character " + marker(id));
    return p->display_name;
  });
}

json bank_to_json(const CharacterBank& bank) {
  json profiles = json::array();
  for (const auto& [id, p] : bank.profiles()) {
    profiles.push_back({{"character_id", p.character_id},
                        {"display_name", p.display_name},
                        {"aliases", p.aliases},
                        {"appearance", p.appearance},
                        {"defaulted", p.defaulted},
                        {"descriptor_block", p.descriptor_block}});
  }
  return {{"bank_schema", kBankSchemaVersion},
          {"song_id", bank.song_id()},
          {"profiles", std::move(profiles)}};
}

CharacterBank bank_from_json(const json& j) {
  reject_unknown_keys(j, {"bank_schema", "song_id", "profiles"}, "bank");
  try {
    if (j.at("bank_schema").get<int>() != kBankSchemaVersion) {
      throw ValidationError("unsupported bank_schema " + j.at("bank_schema").dump());
    }
    CharacterBank bank(j.at("song_id").get<std::string>());
    for (const auto& pj : j.at("profiles")) {
      reject_unknown_keys(pj,
                          {"character_id", "display_name", "aliases", "appearance", "defaulted",
                           "descriptor_block"},
                          "profile");
      CharacterProfile p;
      p.character_id = pj.at("character_id").get<std::string>();
      p.display_name = pj.at("display_name").get<std::string>();
      p.aliases = pj.at("aliases").get<std::vector<std::string>>();
      p.appearance = pj.at("appearance").get<std::map<std::string, std::string>>();
      p.defaulted = pj.at("defaulted").get<std::vector<std::string>>();
      p.descriptor_block = pj.at("descriptor_block").get<std::string>();
      for (const auto& [k, v] : p.appearance) {
        if (!is_appearance_key(k)) throw ValidationError("unknown appearance key '" + k + "'");
        if (trim(v).empty()) throw ValidationError("empty appearance '" + k + "'");
      }
      if (render_descriptor(p.display_name, p.appearance) != p.descriptor_block) {
        throw ValidationError("descriptor_block of '" + p.character_id +
                              "' does not match its appearance");
      }
      bank.add(std::move(p));
    }
    bank.freeze();
    return bank;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bank: ") + e.what());
  }
}

}  // namespace mvforge
