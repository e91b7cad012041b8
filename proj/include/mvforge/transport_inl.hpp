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

#ifndef MVFORGE_TRANSPORT_INL_HPP_
#define MVFORGE_TRANSPORT_INL_HPP_

#include <thread>

#include "mvforge/errors.hpp"

namespace mvforge {

template <typename Fn>
auto with_retries(const RetryPolicy& policy, Fn&& fn, int* attempts) -> decltype(fn()) {
  auto delay = policy.base_delay;
  for (int attempt = 1;; ++attempt) {
    if (attempts != nullptr) *attempts = attempt;
    try {
      return fn();
    } catch (const TransientClientError&) {
      if (attempt > policy.max_retries) throw;
    }
    if (delay.count() > 0) std::this_thread::sleep_for(delay);
    delay *= 2;
  }
}

}  // namespace mvforge

#endif  // MVFORGE_TRANSPORT_INL_HPP_
