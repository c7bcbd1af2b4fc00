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

#include "smoothguard/config.hpp"

#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

namespace smoothguard {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

class ValueParser {
 public:
  ValueParser(std::string_view text, std::size_t line) : text_(text), line_(line) {}

  FlatConfig::Value parse() {
    skip_ws();
    FlatConfig::Value value;
    if (peek() == '[') {
      value = parse_array();
    } else {
      value = std::visit([](auto&& v) -> FlatConfig::Value { return v; }, parse_scalar());
    }
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] != '#') fail("trailing characters after value");
    return value;
  }

 private:
  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

  void skip_ws() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t')) ++pos_;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(line_, fmt::format("config line {}: {}", line_, what));
  }

  std::vector<FlatConfig::Scalar> parse_array() {
    ++pos_;  // '['
    std::vector<FlatConfig::Scalar> out;
    skip_ws();
    if (peek() == ']') {
      ++pos_;
      return out;
    }
    for (;;) {
      skip_ws();
      out.push_back(parse_scalar());
      skip_ws();
      if (peek() == ',') {
        ++pos_;
        skip_ws();
        if (peek() == ']') {
          ++pos_;
          return out;
        }
        continue;
      }
      if (peek() == ']') {
        ++pos_;
        return out;
      }
      fail("expected ',' or ']' in array");
    }
  }

  FlatConfig::Scalar parse_scalar() {
    if (peek() == '"') return parse_string();
    std::size_t end = pos_;
    while (end < text_.size() && text_[end] != ',' && text_[end] != ']' && text_[end] != '#' &&
           !std::isspace(static_cast<unsigned char>(text_[end]))) {
      ++end;
    }
    const std::string_view token = text_.substr(pos_, end - pos_);
    pos_ = end;
    if (token == "true") return true;
    if (token == "false") return false;
    std::string cleaned;
    for (char c : token) {
      if (c != '_') cleaned += c;
    }
    std::int64_t i = 0;
    auto [ip, iec] = std::from_chars(cleaned.data(), cleaned.data() + cleaned.size(), i);
    if (!cleaned.empty() && iec == std::errc() && ip == cleaned.data() + cleaned.size()) return i;
    double d = 0.0;
    auto [dp, dec] = std::from_chars(cleaned.data(), cleaned.data() + cleaned.size(), d);
    if (!cleaned.empty() && dec == std::errc() && dp == cleaned.data() + cleaned.size()) return d;
    fail(fmt::format("cannot parse value \"{}\"", token));
  }

  std::string parse_string() {
    ++pos_;  // opening quote
    std::string out;
    while (pos_ < text_.size()) {
      const char c = text_[pos_++];
      if (c == '"') return out;
      if (c != '\\') {
        out += c;
        continue;
      }
      if (pos_ >= text_.size()) break;
      switch (const char e = text_[pos_++]) {
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        default: fail(fmt::format("unknown escape \\{}", e));
      }
    }
    fail("unterminated string");
  }

  std::string_view text_;
  std::size_t line_;
  std::size_t pos_ = 0;
};

[[noreturn]] void wrong_type(std::string_view key, std::string_view want) {
  throw SchemaError(fmt::format("config key \"{}\" expects {}", key, want));
}

std::string as_string(std::string_view key, const FlatConfig::Value& v) {
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  wrong_type(key, "a string");
}

std::int64_t as_int(std::string_view key, const FlatConfig::Value& v) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) return *i;
  if (const auto* s = std::get_if<std::string>(&v)) {
    std::int64_t out = 0;
    auto [p, ec] = std::from_chars(s->data(), s->data() + s->size(), out);
    if (!s->empty() && ec == std::errc() && p == s->data() + s->size()) return out;
  }
  wrong_type(key, "an integer");
}

std::size_t as_count(std::string_view key, const FlatConfig::Value& v) {
  const auto i = as_int(key, v);
  if (i < 0) wrong_type(key, "a non-negative integer");
  return static_cast<std::size_t>(i);
}

std::uint64_t as_u64(std::string_view key, const FlatConfig::Value& v) {
  if (const auto* s = std::get_if<std::string>(&v)) {
    std::uint64_t out = 0;
    auto [p, ec] = std::from_chars(s->data(), s->data() + s->size(), out);
    if (!s->empty() && ec == std::errc() && p == s->data() + s->size()) return out;
    wrong_type(key, "an unsigned 64-bit integer");
  }
  const auto i = as_int(key, v);
  if (i < 0) wrong_type(key, "an unsigned 64-bit integer");
  return static_cast<std::uint64_t>(i);
}

double as_double(std::string_view key, const FlatConfig::Value& v) {
  if (const auto* d = std::get_if<double>(&v)) return *d;
  if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  if (const auto* s = std::get_if<std::string>(&v)) {
    double out = 0.0;
    auto [p, ec] = std::from_chars(s->data(), s->data() + s->size(), out);
    if (!s->empty() && ec == std::errc() && p == s->data() + s->size()) return out;
  }
  wrong_type(key, "a number");
}

bool as_bool(std::string_view key, const FlatConfig::Value& v) {
  if (const auto* b = std::get_if<bool>(&v)) return *b;
  if (const auto* s = std::get_if<std::string>(&v)) {
    if (*s == "true") return true;
    if (*s == "false") return false;
  }
  wrong_type(key, "true or false");
}

std::vector<std::string> as_list(std::string_view key, const FlatConfig::Value& v) {
  std::vector<std::string> out;
  if (const auto* arr = std::get_if<std::vector<FlatConfig::Scalar>>(&v)) {
    for (const auto& s : *arr) {
      if (const auto* str = std::get_if<std::string>(&s)) {
        out.push_back(*str);
      } else {
        wrong_type(key, "an array of strings");
      }
    }
    return out;
  }
  if (const auto* s = std::get_if<std::string>(&v)) {
    std::stringstream ss(*s);
    for (std::string item; std::getline(ss, item, ',');) {
      if (!trim(item).empty()) out.emplace_back(trim(item));
    }
    return out;
  }
  wrong_type(key, "an array of strings");
}

std::string one_of(std::string_view key, const FlatConfig::Value& v,
                   std::initializer_list<std::string_view> allowed) {
  std::string s = as_string(key, v);
  for (auto a : allowed) {
    if (s == a) return s;
  }
  wrong_type(key, fmt::format("one of {}", fmt::join(allowed, ", ")));
}

}  // namespace

FlatConfig FlatConfig::parse(std::string_view text) {
  FlatConfig config;
  std::size_t line_no = 0;
  for (std::size_t start = 0; start <= text.size();) {
    auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    const std::string_view line = trim(text.substr(start, nl - start));
    start = nl + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    if (line.front() == '[') {
      throw ParseError(line_no, fmt::format("config line {}: tables are not supported", line_no));
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError(line_no, fmt::format("config line {}: expected key = value", line_no));
    }
    const std::string key(trim(line.substr(0, eq)));
    if (key.empty() || key.find_first_not_of("abcdefghijklmnopqrstuvwxyz0123456789_") !=
                           std::string::npos) {
      throw ParseError(line_no, fmt::format("config line {}: bad key \"{}\"", line_no, key));
    }
    if (config.entries_.contains(key)) {
      throw ParseError(line_no, fmt::format("config line {}: duplicate key \"{}\"", line_no, key));
    }
    config.entries_[key] = ValueParser(line.substr(eq + 1), line_no).parse();
  }
  return config;
}

FlatConfig FlatConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void RunConfig::apply(std::string_view key, const FlatConfig::Value& v) {
  using std::chrono::milliseconds;
  auto& d = defense;
  if (key == "backend") backend = one_of(key, v, {"remote", "stub"});
  else if (key == "backend_url") endpoint.base_url = as_string(key, v);
  else if (key == "token_env") token_env = as_string(key, v);
  else if (key == "connect_timeout_ms") endpoint.connect_timeout = milliseconds(as_int(key, v));
  else if (key == "timeout_ms") endpoint.read_timeout = milliseconds(as_int(key, v));
  else if (key == "model_id") d.generation.model_id = as_string(key, v);
  else if (key == "max_tokens") d.generation.max_tokens = as_count(key, v);
  else if (key == "temperature") d.generation.temperature = as_double(key, v);
  else if (key == "decode_seed") d.generation.decode_seed = as_u64(key, v);
  else if (key == "sigma") d.noise.sigma_img = as_double(key, v);
  else if (key == "sigma_audio") d.noise.sigma_audio = as_double(key, v);
  else if (key == "num_noisy") d.noise.num_noisy = as_count(key, v);
  else if (key == "seed") d.noise.master_seed = as_u64(key, v);
  else if (key == "kmeans_seed") d.kmeans_seed = as_u64(key, v);
  else if (key == "parallelism") d.parallelism = as_count(key, v);
  else if (key == "embedder") {
    d.embedder = one_of(key, v, {"remote", "test"}) == "remote" ? EmbedderKind::kRemote
                                                                 : EmbedderKind::kTest;
  }
  else if (key == "allow_partial") d.allow_partial = as_bool(key, v);
  else if (key == "quorum") d.quorum = as_count(key, v);
  else if (key == "max_retries") d.retry.max_retries = as_count(key, v);
  else if (key == "backoff_ms") d.retry.base_backoff = milliseconds(as_int(key, v));
  else if (key == "stub_rules") stub_rules = as_string(key, v);
  else if (key == "classifier") classifier = one_of(key, v, {"remote", "stub"});
  else if (key == "flag_substrings") flag_substrings = as_list(key, v);
  else if (key == "dataset") dataset = as_string(key, v);
  else if (key == "schema") {
    schema = one_of(key, v, {"safety", "utility"}) == "safety" ? Schema::kSafety : Schema::kUtility;
  }
  else if (key == "override_image") override_image = as_string(key, v);
  else if (key == "categories") categories = as_list(key, v);
  else if (key == "workers") workers = std::max<std::size_t>(1, as_count(key, v));
  else if (key == "out") out = as_string(key, v);
  else if (key == "formats") formats = as_string(key, v);
  else throw SchemaError(fmt::format("unknown config key \"{}\"", key));
}

void RunConfig::apply(const FlatConfig& config) {
  for (const auto& [key, value] : config.entries()) apply(key, value);
}

EndpointConfig RunConfig::resolved_endpoint() const {
  EndpointConfig e = endpoint;
  if (const char* token = std::getenv(token_env.c_str()); token != nullptr && *token != '\0') {
    e.bearer_token = token;
  }
  return e;
}

nlohmann::json RunConfig::to_json() const {
  auto opt_path = [](const std::optional<std::filesystem::path>& p) {
    return p ? nlohmann::json(p->generic_string()) : nlohmann::json(nullptr);
  };
  return {
      {"defense", smoothguard::to_json(defense)},
      {"backend", backend},
      {"backend_url", endpoint.base_url},
      {"token_env", token_env},
      {"connect_timeout_ms", endpoint.connect_timeout.count()},
      {"timeout_ms", endpoint.read_timeout.count()},
      {"stub_rules", opt_path(stub_rules)},
      {"classifier", classifier},
      {"flag_substrings", flag_substrings},
      {"dataset", opt_path(dataset)},
      {"schema", schema == Schema::kSafety ? "safety" : "utility"},
      {"override_image", opt_path(override_image)},
      {"categories", categories},
      {"workers", workers},
      {"out", out.generic_string()},
      {"formats", formats},
  };
}

std::string RunConfig::digest() const { return to_hex(sha256(to_json().dump())); }

StubRule load_stub_rules(const std::filesystem::path& path) {
  const Bytes raw = read_file(path);
  const auto doc = nlohmann::json::parse(raw.begin(), raw.end(), nullptr, false);
  if (!doc.is_object()) throw SchemaError("stub rules " + path.string() + ": not a JSON object");

  struct Rules {
    std::string fallback;
    bool echo = false;
    std::map<std::string, std::string> by_prompt;
    std::vector<std::pair<Sha256, std::string>> by_image;
    std::map<std::string, std::string> by_digest;
  };
  auto rules = std::make_shared<Rules>();
  auto text_map = [&](const char* field, std::map<std::string, std::string>& dst) {
    if (!doc.contains(field)) return;
    if (!doc[field].is_object()) throw SchemaError(fmt::format("stub rules: \"{}\" must be an object", field));
    for (const auto& [k, v] : doc[field].items()) {
      if (!v.is_string()) throw SchemaError(fmt::format("stub rules: \"{}\" values must be strings", field));
      dst[k] = v.get<std::string>();
    }
  };
  if (doc.contains("default")) {
    if (!doc["default"].is_string()) throw SchemaError("stub rules: \"default\" must be a string");
    rules->fallback = doc["default"].get<std::string>();
  }
  if (doc.contains("echo")) {
    if (!doc["echo"].is_boolean()) throw SchemaError("stub rules: \"echo\" must be a boolean");
    rules->echo = doc["echo"].get<bool>();
  }
  text_map("by_prompt", rules->by_prompt);
  text_map("by_content_digest", rules->by_digest);
  std::map<std::string, std::string> by_file;
  text_map("by_image_file", by_file);
  for (const auto& [file, text] : by_file) {
    std::filesystem::path p(file);
    if (p.is_relative()) p = path.parent_path() / p;
    rules->by_image.emplace_back(digest(load_image(p)), text);
  }

  return [rules](const StubQuery& q) -> std::string {
    if (auto it = rules->by_digest.find(to_hex(q.content_digest)); it != rules->by_digest.end()) {
      return it->second;
    }
    if (q.sample.image) {
      const Sha256 d = digest(*q.sample.image);
      for (const auto& [want, text] : rules->by_image) {
        if (want == d) return text;
      }
    }
    if (auto it = rules->by_prompt.find(q.sample.prompt); it != rules->by_prompt.end()) {
      return it->second;
    }
    if (rules->echo) return q.sample.prompt;
    return rules->fallback;
  };
}

}  // namespace smoothguard
