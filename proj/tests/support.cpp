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

#include "support.hpp"

#include <png.h>

#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "smoothguard/embed.hpp"

namespace sgtest {

namespace fs = std::filesystem;

TempDir::TempDir() {
  std::random_device rd;
  for (int attempt = 0; attempt < 16; ++attempt) {
    auto candidate = fs::temp_directory_path() /
                     ("smoothguard-test-" + std::to_string(rd()) + std::to_string(rd()));
    if (fs::create_directory(candidate)) {
      path_ = candidate;
      return;
    }
  }
  throw std::runtime_error("cannot create temp dir");
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f << text;
  if (!f) throw std::runtime_error("cannot write " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::vector<std::uint8_t> raw_png(std::uint32_t width, std::uint32_t height, int channels,
                                  const std::vector<std::uint8_t>& pixels) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = width;
  image.height = height;
  image.format = channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, pixels.data(), 0, nullptr)) {
    throw std::runtime_error("png size query failed");
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, pixels.data(), 0, nullptr)) {
    throw std::runtime_error("png write failed");
  }
  out.resize(size);
  return out;
}

namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_tag(std::vector<std::uint8_t>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

}  // namespace

std::vector<std::uint8_t> raw_wav(std::uint16_t channels, std::uint32_t rate,
                                  const std::vector<std::int16_t>& interleaved) {
  const auto data_bytes = static_cast<std::uint32_t>(interleaved.size() * 2);
  std::vector<std::uint8_t> out;
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, 1);
  put_u16(out, channels);
  put_u32(out, rate);
  put_u32(out, rate * channels * 2);
  put_u16(out, static_cast<std::uint16_t>(channels * 2));
  put_u16(out, 16);
  put_tag(out, "data");
  put_u32(out, data_bytes);
  for (auto s : interleaved) put_u16(out, static_cast<std::uint16_t>(s));
  return out;
}

void write_image(const fs::path& path, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::vector<std::uint8_t> pixels(8 * 8 * 3);
  for (auto& p : pixels) p = static_cast<std::uint8_t>(rng() & 0xff);
  const auto png = raw_png(8, 8, 3, pixels);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f.write(reinterpret_cast<const char*>(png.data()), static_cast<std::streamsize>(png.size()));
}

fs::path write_dataset(const fs::path& dir, const std::string& name,
                       const std::vector<FixtureItem>& items) {
  fs::create_directories(dir / "images");
  std::string lines;
  std::uint32_t seed = 1;
  for (const auto& item : items) {
    const std::string rel = "images/" + item.item_id + ".png";
    write_image(dir / rel, seed++);
    nlohmann::json j = {{"item_id", item.item_id}, {"prompt", item.prompt}, {"image_path", rel},
                        {"category", item.category}};
    if (!item.gold.empty()) j["gold"] = item.gold;
    lines += j.dump() + "\n";
  }
  write_text(dir / name, lines);
  return dir / name;
}

EchoAdapter::EchoAdapter() {
  using nlohmann::json;
  auto reply = [](httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  };

  server_.Post("/v1/generate", [this, reply](const httplib::Request& req, httplib::Response& res) {
    record("/v1/generate", req);
    const auto body = json::parse(req.body, nullptr, false);
    if (body.is_discarded()) return reply(res, 400, {{"error", "bad json"}});
    const auto prompt = body.value("prompt", std::string());
    if (body.value("model_id", std::string()) == "fail") {
      return reply(res, 500, {{"error", "model crashed"}});
    }
    if (prompt == "garbage") {
      res.set_content("<html>oops</html>", "text/html");
      return;
    }
    if (prompt == "no-text") return reply(res, 200, {{"answer", prompt}});
    reply(res, 200, {{"text", prompt}});
  });

  server_.Get("/v1/health", [this, reply](const httplib::Request& req, httplib::Response& res) {
    record("/v1/health", req);
    reply(res, 200, {{"status", "ok"}, {"models", {"echo", "rules"}}});
  });

  server_.Post("/v1/embed", [this, reply](const httplib::Request& req, httplib::Response& res) {
    record("/v1/embed", req);
    const auto body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.contains("texts") || body["texts"].empty()) {
      return reply(res, 400, {{"error", "texts must be a non-empty list"}});
    }
    json rows = json::array();
    for (const auto& t : body["texts"]) {
      const auto text = t.get<std::string>();
      if (text == "zero") {
        rows.push_back(std::vector<double>(smoothguard::kTestEmbeddingDim, 0.0));
      } else if (text == "ragged") {
        rows.push_back(std::vector<double>{1.0, 0.0});
      } else {
        const auto v = smoothguard::test_embedder(text);
        rows.push_back(std::vector<double>(v.values().begin(), v.values().end()));
      }
    }
    reply(res, 200, {{"dim", smoothguard::kTestEmbeddingDim}, {"embeddings", rows}});
  });

  server_.Post("/v1/safety", [this, reply](const httplib::Request& req, httplib::Response& res) {
    record("/v1/safety", req);
    const auto body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.contains("response")) {
      return reply(res, 400, {{"error", "missing response"}});
    }
    const bool flagged =
        body["response"].get<std::string>().find("synthesis") != std::string::npos;
    reply(res, 200,
          {{"flagged", flagged},
           {"categories", flagged ? json::array({"S2"}) : json::array()}});
  });

  port_ = server_.bind_to_any_port("127.0.0.1");
  if (port_ <= 0) throw std::runtime_error("echo adapter: bind failed");
  thread_ = std::thread([this] { server_.listen_after_bind(); });
  server_.wait_until_ready();
}

EchoAdapter::~EchoAdapter() {
  server_.stop();
  if (thread_.joinable()) thread_.join();
}

std::string EchoAdapter::url() const { return "http://127.0.0.1:" + std::to_string(port_); }

smoothguard::EndpointConfig EchoAdapter::endpoint() const {
  smoothguard::EndpointConfig config;
  config.base_url = url();
  config.connect_timeout = std::chrono::milliseconds(2000);
  config.read_timeout = std::chrono::milliseconds(5000);
  return config;
}

void EchoAdapter::record(const std::string& path, const httplib::Request& req) {
  ++count_;
  std::lock_guard lock(mu_);
  log_.emplace_back(path, nlohmann::json::parse(req.body.empty() ? "null" : req.body,
                                                nullptr, false));
  authorization_ = req.get_header_value("Authorization");
}

std::vector<nlohmann::json> EchoAdapter::requests(const std::string& path) const {
  std::lock_guard lock(mu_);
  std::vector<nlohmann::json> out;
  for (const auto& [p, body] : log_) {
    if (p == path) out.push_back(body);
  }
  return out;
}

std::string EchoAdapter::last_authorization() const {
  std::lock_guard lock(mu_);
  return authorization_;
}

}  // namespace sgtest
