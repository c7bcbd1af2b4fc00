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

#pragma once

#include <chrono>
#include <optional>
#include <string>

#include <json.hpp>

namespace smoothguard {

struct EndpointConfig {
  std::string base_url = "http://127.0.0.1:8000";
  std::optional<std::string> bearer_token;
  std::chrono::milliseconds connect_timeout{5000};
  std::chrono::milliseconds read_timeout{120000};
};

/// JSON-over-HTTP/1.1 client for the inference adapter. Safe to share across
/// threads: every call opens its own connection.
///
/// Error mapping: transport failure or timeout -> BackendUnavailable;
/// non-2xx -> BackendError carrying the body's "error" field; unparseable
/// body -> ProtocolError.
class HttpEndpoint {
 public:
  explicit HttpEndpoint(EndpointConfig config);

  nlohmann::json post_json(const std::string& path,
                           const nlohmann::json& body) const;
  nlohmann::json get_json(const std::string& path) const;

  const EndpointConfig& config() const noexcept { return config_; }

 private:
  EndpointConfig config_;
};

}  // namespace smoothguard
