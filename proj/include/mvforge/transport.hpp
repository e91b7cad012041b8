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

// JSON-over-HTTP transport shared by the analyzer, backend and judge
// clients, plus the retry helper all remote calls go through.

#ifndef MVFORGE_TRANSPORT_HPP_
#define MVFORGE_TRANSPORT_HPP_

#include <chrono>
#include <functional>
#include <string>

#include "json.hpp"

namespace mvforge {

struct RetryPolicy {
  int max_retries = 2;
  std::chrono::milliseconds base_delay{200};
};

/// Calls `fn` until it returns or throws something other than
/// TransientClientError; waits base_delay * 2^k between attempts. `attempts`
/// (if given) receives the number of calls made.
template <typename Fn>
auto with_retries(const RetryPolicy& policy, Fn&& fn, int* attempts = nullptr) -> decltype(fn());

/// POSTs JSON to `<base_url><path>` and parses the JSON reply.
/// Connection failures, timeouts and 5xx map to TransientClientError;
/// 4xx and unparseable bodies map to PermanentClientError.
class JsonHttpEndpoint {
 public:
  explicit JsonHttpEndpoint(std::string base_url,
                            std::chrono::seconds timeout = std::chrono::seconds(60));

  nlohmann::json post(const std::string& path, const nlohmann::json& body) const;
  const std::string& base_url() const { return base_url_; }

 private:
  std::string base_url_;
  std::chrono::seconds timeout_;
};

}  // namespace mvforge

#include "mvforge/transport_inl.hpp"

#endif  // MVFORGE_TRANSPORT_HPP_
