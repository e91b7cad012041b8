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

#ifndef MVFORGE_UTIL_HPP_
#define MVFORGE_UTIL_HPP_

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

namespace mvforge {

/// 64-bit FNV-1a. Stable across platforms and runs, unlike std::hash; every
/// mock artifact and pseudo-random verdict is keyed off it.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);

/// Hash of several fields, separated so ("ab","c") != ("a","bc").
std::uint64_t hash_fields(std::initializer_list<std::string_view> fields, std::uint64_t seed = 0);

std::string hex64(std::uint64_t value);

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);

/// Lowercased alphanumeric runs; punctuation and whitespace separate tokens.
std::vector<std::string> tokenize(std::string_view s);

std::string read_file(const std::filesystem::path& path);
/// Writes via a temp file + rename so readers never observe a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace mvforge

#endif  // MVFORGE_UTIL_HPP_
