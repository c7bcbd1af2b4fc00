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

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "smoothguard/backends.hpp"
#include "smoothguard/eval.hpp"
#include "smoothguard/http.hpp"
#include "smoothguard/pipeline.hpp"

namespace smoothguard {

/// Flat TOML subset: `key = value` lines, `#` comments, values that are
/// "strings", integers, floats, true/false, or one-line [arrays] of those.
/// Tables and multi-line values are rejected.
class FlatConfig {
 public:
  using Scalar = std::variant<bool, std::int64_t, double, std::string>;
  using Value = std::variant<bool, std::int64_t, double, std::string, std::vector<Scalar>>;

  /// Throws ParseError with the 1-based line.
  static FlatConfig parse(std::string_view text);
  static FlatConfig load(const std::filesystem::path& path);

  const std::map<std::string, Value>& entries() const noexcept { return entries_; }
  void set(std::string key, Value value) { entries_[std::move(key)] = std::move(value); }

 private:
  std::map<std::string, Value> entries_;
};

/// Everything a CLI run needs. Keys accepted in the config file and, with
/// '_' spelled '-', as flags:
///
///   backend            "remote" | "stub"
///   backend_url        adapter base URL
///   token_env          name of the env var holding the bearer token
///   connect_timeout_ms, timeout_ms
///   model_id, max_tokens, temperature, decode_seed
///   sigma, sigma_audio, num_noisy, seed, kmeans_seed
///   parallelism, embedder ("remote" | "test"), allow_partial, quorum
///   max_retries, backoff_ms
///   stub_rules         JSON rules file for the stub backend
///   classifier         "remote" | "stub"
///   flag_substrings    stub classifier rules
///   dataset, schema ("safety" | "utility"), override_image
///   categories, workers, out, formats
struct RunConfig {
  DefenseConfig defense;
  EndpointConfig endpoint;
  std::string token_env = "SMOOTHGUARD_TOKEN";
  std::string backend = "remote";
  std::optional<std::filesystem::path> stub_rules;
  std::string classifier = "remote";
  std::vector<std::string> flag_substrings;
  std::optional<std::filesystem::path> dataset;
  Schema schema = Schema::kSafety;
  std::optional<std::filesystem::path> override_image;
  std::vector<std::string> categories;
  std::size_t workers = 1;
  std::filesystem::path out = "reports";
  std::string formats = "csv,json,svg";

  /// Applies one key. Numeric and boolean keys also accept their string
  /// spelling (as flags deliver them). Throws SchemaError for unknown keys
  /// or wrong types.
  void apply(std::string_view key, const FlatConfig::Value& value);
  void apply(const FlatConfig& config);

  /// Endpoint with the bearer token read from `token_env`, if set.
  EndpointConfig resolved_endpoint() const;

  /// Effective configuration; never includes the token.
  nlohmann::json to_json() const;
  std::string digest() const;
};

/// Rules file for the stub backend:
///   {"default": str, "echo": bool,
///    "by_prompt": {prompt: text},
///    "by_image_file": {path: text},          // sample image equals decoded file
///    "by_content_digest": {sha256hex: text}}
/// Lookup order: content digest, image file, prompt, echo, default.
/// Relative image paths resolve against the rules file's directory.
StubRule load_stub_rules(const std::filesystem::path& path);

}  // namespace smoothguard
