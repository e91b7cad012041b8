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

#include "mvforge/api_server.hpp"

#include <functional>

#include "httplib.h"
#include "mvforge/errors.hpp"

namespace mvforge {
namespace {

using nlohmann::json;

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, int status, std::string_view kind, std::string_view msg) {
  reply(res, status, {{"error", kind}, {"message", msg}});
}

// Runs a handler and maps the error taxonomy onto status codes.
void guarded(httplib::Response& res, const std::function<json()>& fn, int ok = 200) {
  try {
    reply(res, ok, fn());
  } catch (const NotFoundError& e) {
    reply_error(res, 404, "not_found", e.what());
  } catch (const ConflictError& e) {
    reply_error(res, 409, "conflict", e.what());
  } catch (const ValidationError& e) {
    reply_error(res, 400, "invalid_request", e.what());
  } catch (const ConfigError& e) {
    reply_error(res, 400, "invalid_request", e.what());
  } catch (const std::exception& e) {
    reply_error(res, 500, "internal", e.what());
  }
}

json body_of(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    json j = json::parse(req.body);
    if (!j.is_object()) throw ValidationError("request body must be a JSON object");
    return j;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("request body is not JSON: ") + e.what());
  }
}

std::string token_of(const httplib::Request& req, const json& body) {
  if (body.contains("request_token")) {
    if (!body.at("request_token").is_string()) throw ValidationError("request_token must be a string");
    return body.at("request_token").get<std::string>();
  }
  return req.get_header_value("Idempotency-Key");
}

}  // namespace

ApiServer::ApiServer() : server_(std::make_unique<httplib::Server>()) { routes(); }

ApiServer::~ApiServer() { stop(); }

void ApiServer::add(JobService& service) { songs_[service.song_id()] = &service; }

int ApiServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int p = server_->bind_to_any_port(host);
    if (p < 0) throw Error("cannot bind " + host);
    return p;
  }
  if (!server_->bind_to_port(host, port)) throw Error("cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void ApiServer::listen() { server_->listen_after_bind(); }

void ApiServer::stop() {
  if (server_) server_->stop();
}

void ApiServer::routes() {
  auto& s = *server_;
  auto song = [this](const httplib::Request& req) -> JobService& {
    auto it = songs_.find(req.matches[1]);
    if (it == songs_.end()) throw NotFoundError("unknown song " + std::string(req.matches[1]));
    return *it->second;
  };

  s.Get("/v1/songs", [this](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] {
      json out = json::array();
      for (const auto& [id, svc] : songs_) {
        const auto st = svc->status();
        out.push_back({{"song_id", id}, {"stage", st.at("stage")}, {"busy", st.at("busy")}});
      }
      return out;
    });
  });
  s.Get(R"(/v1/songs/([^/]+)/status)", [song](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { return song(req).status(); });
  });
  s.Get(R"(/v1/songs/([^/]+)/plan)", [song](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { return song(req).plan(); });
  });
  s.Get(R"(/v1/songs/([^/]+)/shots)", [song](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { return song(req).shots(); });
  });
  s.Get(R"(/v1/songs/([^/]+)/subclips/([^/]+)/candidates)",
        [song](const httplib::Request& req, httplib::Response& res) {
          guarded(res, [&] { return song(req).candidates(req.matches[2]); });
        });
  s.Get(R"(/v1/songs/([^/]+)/manifest)", [song](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { return song(req).manifest(); });
  });
  s.Get(R"(/v1/songs/([^/]+)/scores)", [song](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { return song(req).scores(); });
  });
  s.Post(R"(/v1/songs/([^/]+)/subclips/([^/]+)/regenerate)",
         [song](const httplib::Request& req, httplib::Response& res) {
           guarded(
               res,
               [&] {
                 auto& svc = song(req);
                 const json body = body_of(req);
                 return svc.regenerate(req.matches[2], token_of(req, body));
               },
               202);
         });
  s.Post(R"(/v1/songs/([^/]+)/subclips/([^/]+)/approve)",
         [song](const httplib::Request& req, httplib::Response& res) {
           guarded(
               res,
               [&] {
                 auto& svc = song(req);
                 const json body = body_of(req);
                 if (!body.contains("candidate_id") || !body.at("candidate_id").is_string()) {
                   throw ValidationError("approve needs a string candidate_id");
                 }
                 return svc.approve(req.matches[2], body.at("candidate_id").get<std::string>(),
                                    token_of(req, body));
               },
               202);
         });
  s.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (res.body.empty()) {
      reply_error(res, res.status, res.status == 404 ? "not_found" : "error", "no route for " + req.path);
    }
  });
}

}  // namespace mvforge
