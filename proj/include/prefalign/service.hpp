// Copyright 2026 The Authors.
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

// HTTP front end for SessionManager. Routes live under /v1; everything else
// is served from an optional static directory (the annotation UI bundle).

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>

#include "httplib.h"
#include "prefalign/error.hpp"
#include "prefalign/io.hpp"
#include "prefalign/session.hpp"

namespace prefalign {

namespace detail {

inline void send_json(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

inline void send_error(httplib::Response& res, int status, std::string_view kind,
                       const std::string& message) {
  send_json(res, status, {{"version", kApiVersion}, {"error", kind}, {"message", message}});
}

// Maps library errors to HTTP statuses.
template <class Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    send_json(res, 200, fn());
  } catch (const NotFound& e) {
    send_error(res, 404, "not_found", e.what());
  } catch (const Conflict& e) {
    send_error(res, 409, "conflict", e.what());
  } catch (const InvalidInput& e) {
    send_error(res, 400, "invalid_input", e.what());
  } catch (const Json::exception& e) {
    send_error(res, 400, "invalid_input", e.what());
  } catch (const std::exception& e) {
    send_error(res, 500, "internal", e.what());
  }
}

inline Json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return Json::object();
  try {
    return Json::parse(req.body);
  } catch (const Json::exception& e) {
    throw InvalidInput(std::string("request body is not valid JSON: ") + e.what());
  }
}

}  // namespace detail

// Registers the /v1 routes on `server`. The manager must outlive the server.
inline void install_routes(httplib::Server& server, SessionManager& manager,
                           const std::optional<std::filesystem::path>& static_dir = std::nullopt) {
  using httplib::Request;
  using httplib::Response;

  server.Get("/v1/health", [](const Request&, Response& res) {
    detail::send_json(res, 200, {{"version", kApiVersion}, {"status", "ok"}});
  });
  server.Get("/v1/environments", [&manager](const Request&, Response& res) {
    detail::guarded(res, [&] {
      Json policies = Json::array();
      for (PolicyKind p : kAllPolicies) policies.push_back(std::string(to_string(p)));
      return Json{{"version", kApiVersion},
                  {"environments", manager.environment_names()},
                  {"policies", policies}};
    });
  });
  server.Post("/v1/sessions", [&manager](const Request& req, Response& res) {
    detail::guarded(res, [&] { return manager.create_session(detail::parse_body(req)); });
  });
  server.Get(R"(/v1/sessions/([^/]+)/next)", [&manager](const Request& req, Response& res) {
    detail::guarded(res, [&] { return manager.next_query(req.matches[1]); });
  });
  server.Post(R"(/v1/sessions/([^/]+)/responses)", [&manager](const Request& req, Response& res) {
    detail::guarded(res, [&] {
      return manager.submit_response(req.matches[1], detail::parse_body(req));
    });
  });
  server.Post(R"(/v1/sessions/([^/]+)/close)", [&manager](const Request& req, Response& res) {
    detail::guarded(res, [&] { return manager.close_session(req.matches[1]); });
  });
  server.Get(R"(/v1/sessions/([^/]+))", [&manager](const Request& req, Response& res) {
    detail::guarded(res, [&] { return manager.summary(req.matches[1]); });
  });

  if (static_dir) {
    if (!server.set_mount_point("/", static_dir->string())) {
      throw InvalidInput("static directory '" + static_dir->string() + "' does not exist");
    }
  }
}

}  // namespace prefalign
