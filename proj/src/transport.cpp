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

#include "mvforge/transport.hpp"

#include <cstdlib>

#include "httplib.h"
#include "mvforge/errors.hpp"

namespace mvforge {

JsonHttpEndpoint::JsonHttpEndpoint(std::string base_url, std::chrono::seconds timeout)
    : base_url_(std::move(base_url)), timeout_(timeout) {
  while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
}

nlohmann::json JsonHttpEndpoint::post(const std::string& path, const nlohmann::json& body) const {
  httplib::Client client(base_url_);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  client.set_write_timeout(timeout_);
  httplib::Headers headers;
  // Credentials come from the environment only, never from config files.
  if (const char* token = std::getenv("MVFORGE_CLIENT_TOKEN"); token != nullptr && *token != '\0') {
    headers.emplace("Authorization", std::string("Bearer ") + token);
  }
  auto res = client.Post(path, headers, body.dump(), "application/json");
  if (!res) {
    throw TransientClientError(base_url_ + path + ": " + httplib::to_string(res.error()));
  }
  if (res->status >= 500) {
    throw TransientClientError(base_url_ + path + ": HTTP " + std::to_string(res->status));
  }
  if (res->status >= 400) {
    throw PermanentClientError(base_url_ + path + ": HTTP " + std::to_string(res->status) + " " +
                               res->body);
  }
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception& e) {
    throw PermanentClientError(base_url_ + path + ": malformed JSON reply: " + e.what());
  }
}

}  // namespace mvforge
