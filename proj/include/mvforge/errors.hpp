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

#ifndef MVFORGE_ERRORS_HPP_
#define MVFORGE_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace mvforge {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A value failed schema or invariant checks (bad JSON, missing field, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class PlannerError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

class ConflictError : public Error {
 public:
  using Error::Error;
};

/// Remote client failure that may succeed on retry (timeout, unreachable).
class TransientClientError : public Error {
 public:
  using Error::Error;
};

/// Remote client failure that retrying will not fix (malformed payload).
class PermanentClientError : public Error {
 public:
  using Error::Error;
};

/// Invariant broken inside the library itself; indicates a bug.
class InternalError : public Error {
 public:
  using Error::Error;
};

}  // namespace mvforge

#endif  // MVFORGE_ERRORS_HPP_
