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

// HTTP job-control API consumed by the review UI. JSON bodies; all routes
// live under /v1/:
//
//   GET  /v1/songs
//   GET  /v1/songs/{song}/status            (poll every poll_interval_ms)
//   GET  /v1/songs/{song}/plan
//   GET  /v1/songs/{song}/shots
//   GET  /v1/songs/{song}/subclips/{id}/candidates
//   GET  /v1/songs/{song}/manifest
//   GET  /v1/songs/{song}/scores
//   POST /v1/songs/{song}/subclips/{id}/regenerate   {"request_token"?}
//   POST /v1/songs/{song}/subclips/{id}/approve      {"candidate_id", "request_token"?}
//
// Errors come back as {"error": kind, "message": text} with 404 (unknown
// song, subclip or candidate; output not produced yet), 409 (work in
// flight), 400 (malformed request) or 500.

#ifndef MVFORGE_API_SERVER_HPP_
#define MVFORGE_API_SERVER_HPP_

#include <map>
#include <memory>
#include <string>

#include "mvforge/pipeline.hpp"

namespace httplib {
class Server;
}

namespace mvforge {

class ApiServer {
 public:
  ApiServer();
  ~ApiServer();

  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  /// Registers a song; the service must outlive the server.
  void add(JobService& service);

  /// Binds to `host`; port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  /// Serves until stop(). Call bind() first.
  void listen();
  void stop();

 private:
  void routes();

  std::unique_ptr<httplib::Server> server_;
  std::map<std::string, JobService*> songs_;
};

}  // namespace mvforge

#endif  // MVFORGE_API_SERVER_HPP_
