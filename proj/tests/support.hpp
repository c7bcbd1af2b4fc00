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

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "smoothguard/http.hpp"

namespace sgtest {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

// Encoders written straight against libpng and the RIFF layout, so codec
// tests do not check the library against itself.
std::vector<std::uint8_t> raw_png(std::uint32_t width, std::uint32_t height,
                                  int channels, const std::vector<std::uint8_t>& pixels);
std::vector<std::uint8_t> raw_wav(std::uint16_t channels, std::uint32_t rate,
                                  const std::vector<std::int16_t>& interleaved);

/// Random 8x8 RGB PNG, deterministic in `seed`.
void write_image(const std::filesystem::path& path, std::uint32_t seed);

struct FixtureItem {
  std::string item_id;
  std::string category;  // safety: category; utility: category too
  std::string prompt;
  std::string gold;      // utility only
};

/// Writes <dir>/<name> plus one image per item (images/<item_id>.png, path
/// stored relative to the dataset). Safety schema when `gold` is empty.
std::filesystem::path write_dataset(const std::filesystem::path& dir, const std::string& name,
                                    const std::vector<FixtureItem>& items);

/// Stand-in for the inference adapter on 127.0.0.1.
///
/// /v1/generate echoes the prompt. Model "fail" answers 500 with an error
/// body, prompt "garbage" answers a non-JSON body, prompt "no-text" a JSON
/// object without "text".
/// /v1/embed returns hashed-trigram rows; the text "zero" gets an all-zero
/// row and "ragged" a short row.
/// /v1/safety flags responses containing "synthesis".
class EchoAdapter {
 public:
  EchoAdapter();
  ~EchoAdapter();
  std::string url() const;
  smoothguard::EndpointConfig endpoint() const;

  std::vector<nlohmann::json> requests(const std::string& path) const;
  std::string last_authorization() const;
  std::size_t request_count() const { return count_.load(); }

 private:
  void record(const std::string& path, const httplib::Request& req);

  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  mutable std::mutex mu_;
  std::vector<std::pair<std::string, nlohmann::json>> log_;
  std::string authorization_;
  std::atomic<std::size_t> count_{0};
};

}  // namespace sgtest
