// Copyright 2026 The smoothguard Authors. All Rights Reserved.
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

#include "smoothguard/http.hpp"

#include <httplib.h>

#include "smoothguard/error.hpp"

namespace smoothguard {

namespace {

void apply_timeouts(httplib::Client& client, const EndpointConfig& config) {
  client.set_connection_timeout(config.connect_timeout);
  client.set_read_timeout(config.read_timeout);
  client.set_write_timeout(config.read_timeout);
  if (config.bearer_token) {
    client.set_bearer_token_auth(*config.bearer_token);
  }
}

nlohmann::json handle_result(const httplib::Result& result,
                             const std::string& what) {
  if (!result) {
    throw BackendUnavailable(what + ": " + httplib::to_string(result.error()));
  }
  const auto& res = *result;
  if (res.status < 200 || res.status >= 300) {
    std::string message = res.body;
    auto parsed = nlohmann::json::parse(res.body, nullptr, false);
    if (parsed.is_object() && parsed.contains("error") &&
        parsed["error"].is_string()) {
      message = parsed["error"].get<std::string>();
    }
    throw BackendError(res.status, what + ": HTTP " +
                                       std::to_string(res.status) + ": " +
                                       message);
  }
  auto parsed = nlohmann::json::parse(res.body, nullptr, false);
  if (parsed.is_discarded()) {
    throw ProtocolError(what + ": reply is not valid JSON");
  }
  return parsed;
}

}  // namespace

HttpEndpoint::HttpEndpoint(EndpointConfig config) : config_(std::move(config)) {}

nlohmann::json HttpEndpoint::post_json(const std::string& path,
                                       const nlohmann::json& body) const {
  httplib::Client client(config_.base_url);
  apply_timeouts(client, config_);
  auto result = client.Post(path, body.dump(), "application/json");
  return handle_result(result, "POST " + path);
}

nlohmann::json HttpEndpoint::get_json(const std::string& path) const {
  httplib::Client client(config_.base_url);
  apply_timeouts(client, config_);
  auto result = client.Get(path);
  return handle_result(result, "GET " + path);
}

}  // namespace smoothguard
