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

#include "smoothguard/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

namespace smoothguard {

std::string_view to_string(BinaryAnswer a) {
  switch (a) {
    case BinaryAnswer::kYes: return "yes";
    case BinaryAnswer::kNo: return "no";
    case BinaryAnswer::kUnparseable: return "unparseable";
  }
  return "unparseable";
}

std::string_view to_string(Metric m) { return m == Metric::kAsr ? "asr" : "accuracy"; }

namespace {

namespace fs = std::filesystem;

template <typename Fn>
void for_each_line(const fs::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset " + path.string());
  std::string line;
  for (std::size_t number = 1; std::getline(in, line); ++number) {
    if (is_blank(line)) continue;
    auto obj = nlohmann::json::parse(line, nullptr, false);
    if (obj.is_discarded()) {
      throw ParseError(number, fmt::format("{}:{}: invalid JSON", path.string(), number));
    }
    if (!obj.is_object()) {
      throw ParseError(number, fmt::format("{}:{}: expected a JSON object", path.string(), number));
    }
    fn(obj, number);
  }
}

std::string require_string(const nlohmann::json& obj, const char* field,
                           const fs::path& path, std::size_t line) {
  if (!obj.contains(field) || !obj[field].is_string()) {
    throw SchemaError(fmt::format("{}:{}: missing string field \"{}\"", path.string(),
                                  line, field));
  }
  return obj[field].get<std::string>();
}

std::optional<std::string> optional_string(const nlohmann::json& obj, const char* field,
                                           const fs::path& path, std::size_t line) {
  if (!obj.contains(field) || obj[field].is_null()) return std::nullopt;
  return require_string(obj, field, path, line);
}

fs::path resolve(const fs::path& dataset, const std::string& media) {
  fs::path p(media);
  return p.is_relative() ? dataset.parent_path() / p : p;
}

std::string lowercase(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

template <typename Fn>
std::vector<ItemOutcome> run_items(std::size_t count, std::size_t workers, Fn&& fn) {
  std::vector<ItemOutcome> out(count);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < count; i = next++) out[i] = fn(i);
  };
  const std::size_t threads = std::min(std::max<std::size_t>(workers, 1), count);
  if (threads <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work);
  }
  return out;
}

std::optional<ImageTensor> load_override(const EvalOptions& options) {
  if (!options.override_image) return std::nullopt;
  return load_image(*options.override_image);
}

MultimodalInput build_input(const std::string& item_id, const std::string& prompt,
                            const fs::path& image_path,
                            const std::optional<fs::path>& audio_path,
                            const std::optional<ImageTensor>& override_image) {
  MultimodalInput input{item_id, prompt, std::nullopt, std::nullopt};
  input.image = override_image ? *override_image : load_image(image_path);
  if (audio_path) input.audio = load_audio(*audio_path);
  return input;
}

// Fills response, candidates and trace; throws on failure.
void respond(const MultimodalInput& input, const DefenseConfig& config, bool defended,
             const EvalServices& services, ItemOutcome& outcome) {
  if (!defended) {
    outcome.response = undefended(input, config, services.backend).text;
    outcome.candidates = 1;
    return;
  }
  DefenseConfig item_config = config;
  item_config.noise.master_seed = item_seed(config.noise.master_seed, input.item_id);
  const DefendedAnswer answer = defend(input, item_config, services.backend, services.embedder);
  outcome.response = answer.final_text;
  outcome.candidates = answer.candidates.size();
  outcome.trace = trace_record(input, item_config, answer);
}

void mark_failed(ItemOutcome& outcome, const std::exception& e) {
  outcome.failed = true;
  outcome.error = e.what();
  spdlog::warn("item {} failed: {}", outcome.item_id, e.what());
}

}  // namespace

std::vector<SafetyItem> load_safety_jsonl(const fs::path& path,
                                          std::span<const std::string> categories) {
  std::vector<SafetyItem> items;
  for_each_line(path, [&](const nlohmann::json& obj, std::size_t line) {
    SafetyItem item;
    item.item_id = require_string(obj, "item_id", path, line);
    item.category = require_string(obj, "category", path, line);
    item.prompt = require_string(obj, "prompt", path, line);
    item.image_path = resolve(path, require_string(obj, "image_path", path, line));
    if (auto audio = optional_string(obj, "audio_path", path, line)) {
      item.audio_path = resolve(path, *audio);
    }
    if (!categories.empty() &&
        std::find(categories.begin(), categories.end(), item.category) == categories.end()) {
      throw SchemaError(fmt::format("{}:{}: category \"{}\" is not configured",
                                    path.string(), line, item.category));
    }
    items.push_back(std::move(item));
  });
  return items;
}

std::vector<UtilityItem> load_utility_jsonl(const fs::path& path) {
  std::vector<UtilityItem> items;
  for_each_line(path, [&](const nlohmann::json& obj, std::size_t line) {
    UtilityItem item;
    item.item_id = require_string(obj, "item_id", path, line);
    item.prompt = require_string(obj, "prompt", path, line);
    item.image_path = resolve(path, require_string(obj, "image_path", path, line));
    const std::string gold = lowercase(require_string(obj, "gold", path, line));
    if (gold != "yes" && gold != "no") {
      throw SchemaError(fmt::format("{}:{}: \"gold\" must be \"yes\" or \"no\"",
                                    path.string(), line));
    }
    item.gold = gold == "yes" ? BinaryAnswer::kYes : BinaryAnswer::kNo;
    if (auto category = optional_string(obj, "category", path, line)) item.category = *category;
    if (auto audio = optional_string(obj, "audio_path", path, line)) {
      item.audio_path = resolve(path, *audio);
    }
    items.push_back(std::move(item));
  });
  return items;
}

Dataset load_jsonl(const fs::path& path, Schema schema,
                   std::span<const std::string> categories) {
  if (schema == Schema::kSafety) return load_safety_jsonl(path, categories);
  return load_utility_jsonl(path);
}

KeywordClassifier::KeywordClassifier(std::vector<Rule> rules) : rules_(std::move(rules)) {
  for (auto& r : rules_) r.substring = lowercase(r.substring);
}

SafetyVerdict KeywordClassifier::classify(std::string_view, std::string_view response) const {
  const std::string text = lowercase(response);
  SafetyVerdict verdict;
  for (const auto& r : rules_) {
    if (r.substring.empty() || text.find(r.substring) == std::string::npos) continue;
    verdict.flagged = true;
    if (std::find(verdict.categories.begin(), verdict.categories.end(), r.category) ==
        verdict.categories.end()) {
      verdict.categories.push_back(r.category);
    }
  }
  return verdict;
}

RemoteClassifier::RemoteClassifier(EndpointConfig config) : endpoint_(std::move(config)) {}

SafetyVerdict RemoteClassifier::classify(std::string_view prompt,
                                         std::string_view response) const {
  const auto reply = endpoint_.post_json(
      "/v1/safety", {{"prompt", std::string(prompt)}, {"response", std::string(response)}});
  if (!reply.is_object() || !reply.contains("flagged") || !reply["flagged"].is_boolean()) {
    throw ProtocolError("POST /v1/safety: reply lacks boolean \"flagged\"");
  }
  SafetyVerdict verdict{reply["flagged"].get<bool>(), {}};
  if (reply.contains("categories")) {
    if (!reply["categories"].is_array()) {
      throw ProtocolError("POST /v1/safety: \"categories\" is not an array");
    }
    for (const auto& c : reply["categories"]) {
      if (!c.is_string()) throw ProtocolError("POST /v1/safety: non-string category");
      verdict.categories.push_back(c.get<std::string>());
    }
  }
  return verdict;
}

std::uint64_t item_seed(std::uint64_t master_seed, std::string_view item_id) {
  return mix64(master_seed ^ fnv1a64(item_id));
}

double table_average(std::span<const double> values) {
  if (values.empty()) throw InvalidArgument("average of an empty row");
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

double SafetyReport::average() const {
  std::vector<double> asr;
  for (const auto& c : categories) asr.push_back(c.asr());
  return asr.empty() ? 0.0 : table_average(asr);
}

SafetyReport eval_safety(std::span<const SafetyItem> items, const DefenseConfig& config,
                         bool defended, const EvalServices& services,
                         const EvalOptions& options) {
  if (items.empty()) throw InvalidArgument("eval_safety: no items");
  if (services.classifier == nullptr) throw InvalidArgument("eval_safety: no classifier");
  config.validate();
  const auto override_image = load_override(options);

  SafetyReport report;
  report.defended = defended;
  report.candidates_per_item = defended ? config.noise.num_noisy + 1 : 1;
  report.items = run_items(items.size(), options.workers, [&](std::size_t i) {
    const SafetyItem& item = items[i];
    ItemOutcome outcome;
    outcome.item_id = item.item_id;
    outcome.category = item.category;
    try {
      const auto input = build_input(item.item_id, item.prompt, item.image_path,
                                     item.audio_path, override_image);
      respond(input, config, defended, services, outcome);
      const SafetyVerdict verdict = services.classifier->classify(item.prompt, outcome.response);
      outcome.flagged = verdict.flagged;
      outcome.flagged_categories = verdict.categories;
    } catch (const std::exception& e) {
      mark_failed(outcome, e);
    }
    return outcome;
  });

  std::map<std::string, CategoryReport> by_category;
  for (const auto& o : report.items) {
    if (o.failed) {
      ++report.failed;
      continue;
    }
    auto& c = by_category[o.category];
    c.category = o.category;
    ++c.n;
    if (o.flagged) ++c.flagged;
  }
  if (!options.categories.empty()) {
    for (const auto& name : options.categories) {
      if (auto it = by_category.find(name); it != by_category.end()) {
        report.categories.push_back(it->second);
      }
    }
  } else {
    for (auto& [name, c] : by_category) report.categories.push_back(c);
  }
  if (report.failed > 0) {
    spdlog::warn("{} of {} items failed and were excluded", report.failed, items.size());
  }
  return report;
}

BinaryAnswer parse_binary_answer(std::string_view text) {
  const std::string lower = lowercase(text);
  auto is_word = [](unsigned char c) { return std::isalnum(c) != 0; };

  // Leading token with surrounding punctuation stripped.
  std::size_t begin = 0;
  while (begin < lower.size() && std::isspace(static_cast<unsigned char>(lower[begin]))) ++begin;
  std::size_t end = begin;
  while (end < lower.size() && !std::isspace(static_cast<unsigned char>(lower[end]))) ++end;
  std::string_view token(lower.data() + begin, end - begin);
  while (!token.empty() && !is_word(token.front())) token.remove_prefix(1);
  while (!token.empty() && !is_word(token.back())) token.remove_suffix(1);
  if (token == "yes") return BinaryAnswer::kYes;
  if (token == "no") return BinaryAnswer::kNo;

  const std::size_t stop = lower.find_first_of(".!?\n");
  const std::string_view sentence =
      std::string_view(lower).substr(0, stop == std::string::npos ? lower.size() : stop);
  bool saw_yes = false;
  bool saw_no = false;
  for (std::size_t i = 0; i < sentence.size();) {
    if (!is_word(sentence[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < sentence.size() && is_word(sentence[j])) ++j;
    const auto word = sentence.substr(i, j - i);
    saw_yes |= word == "yes";
    saw_no |= word == "no";
    i = j;
  }
  if (saw_yes != saw_no) return saw_yes ? BinaryAnswer::kYes : BinaryAnswer::kNo;
  return BinaryAnswer::kUnparseable;
}

void UtilityCounts::add(BinaryAnswer gold, BinaryAnswer predicted) {
  const bool positive = gold == BinaryAnswer::kYes;
  switch (predicted) {
    case BinaryAnswer::kYes: ++(positive ? tp : fp); break;
    case BinaryAnswer::kNo: ++(positive ? fn : tn); break;
    case BinaryAnswer::kUnparseable: ++(positive ? unparseable_pos : unparseable_neg); break;
  }
}

namespace {

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

double UtilityCounts::accuracy() const { return ratio(tp + tn, n()); }
double UtilityCounts::precision() const { return ratio(tp, tp + fp); }
double UtilityCounts::recall() const { return ratio(tp, tp + fn + unparseable_pos); }
double UtilityCounts::unparseable_rate() const {
  return ratio(unparseable_pos + unparseable_neg, n());
}

double UtilityCounts::f1() const {
  const double p = precision();
  const double r = recall();
  return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

UtilityReport eval_utility(std::span<const UtilityItem> items, const DefenseConfig& config,
                           bool defended, const EvalServices& services,
                           const EvalOptions& options) {
  if (items.empty()) throw InvalidArgument("eval_utility: no items");
  config.validate();
  const auto override_image = load_override(options);

  UtilityReport report;
  report.defended = defended;
  report.candidates_per_item = defended ? config.noise.num_noisy + 1 : 1;
  report.items = run_items(items.size(), options.workers, [&](std::size_t i) {
    const UtilityItem& item = items[i];
    ItemOutcome outcome;
    outcome.item_id = item.item_id;
    outcome.category = item.category;
    outcome.gold = item.gold;
    try {
      const auto input = build_input(item.item_id, item.prompt, item.image_path,
                                     item.audio_path, override_image);
      respond(input, config, defended, services, outcome);
      outcome.predicted = parse_binary_answer(outcome.response);
    } catch (const std::exception& e) {
      mark_failed(outcome, e);
    }
    return outcome;
  });

  std::map<std::string, UtilityCounts> by_category;
  for (const auto& o : report.items) {
    if (o.failed) {
      ++report.failed;
      continue;
    }
    by_category[o.category].add(o.gold, o.predicted);
    report.overall.add(o.gold, o.predicted);
  }
  report.categories.assign(by_category.begin(), by_category.end());
  return report;
}

std::vector<double> parse_sigmas(std::string_view spec) {
  auto number = [&](std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
      throw InvalidArgument(fmt::format("bad sigma value \"{}\" in \"{}\"", s, spec));
    }
    if (v < 0.0) throw InvalidArgument(fmt::format("negative sigma in \"{}\"", spec));
    return v;
  };
  auto round12 = [](double v) { return std::round(v * 1e12) / 1e12; };

  std::vector<double> out;
  if (spec.find(':') != std::string_view::npos) {
    const auto a = spec.find(':');
    const auto b = spec.find(':', a + 1);
    if (b == std::string_view::npos || spec.find(':', b + 1) != std::string_view::npos) {
      throw InvalidArgument(fmt::format("range \"{}\" must be lo:hi:step", spec));
    }
    const double lo = number(spec.substr(0, a));
    const double hi = number(spec.substr(a + 1, b - a - 1));
    const double step = number(spec.substr(b + 1));
    if (step <= 0.0 || hi < lo) {
      throw InvalidArgument(fmt::format("range \"{}\" needs step > 0 and hi >= lo", spec));
    }
    const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
    for (std::size_t k = 0; k < count; ++k) out.push_back(round12(lo + step * static_cast<double>(k)));
    return out;
  }
  for (std::size_t start = 0;;) {
    const auto comma = spec.find(',', start);
    out.push_back(round12(number(spec.substr(start, comma == std::string_view::npos
                                                        ? std::string_view::npos
                                                        : comma - start))));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

SweepTable ablate(const Dataset& dataset, std::span<const double> sigmas,
                  const DefenseConfig& config, Metric metric,
                  const EvalServices& services, const EvalOptions& options,
                  bool include_baseline) {
  if (sigmas.empty()) throw InvalidArgument("ablate: no sigma values");
  const bool safety = std::holds_alternative<std::vector<SafetyItem>>(dataset);
  if ((metric == Metric::kAsr) != safety) {
    throw InvalidArgument(fmt::format("ablate: metric {} needs a {} dataset",
                                      to_string(metric), safety ? "utility" : "safety"));
  }

  SweepTable table;
  table.metric = metric;
  auto run = [&](const DefenseConfig& c, bool defended, double sigma) {
    SweepRow row;
    row.sigma = sigma;
    row.baseline = !defended;
    if (safety) {
      const auto& items = std::get<std::vector<SafetyItem>>(dataset);
      const auto r = eval_safety(items, c, defended, services, options);
      row.value = r.average();
      row.items = items.size();
      row.failed = r.failed;
      row.candidates_per_item = r.candidates_per_item;
    } else {
      const auto& items = std::get<std::vector<UtilityItem>>(dataset);
      const auto r = eval_utility(items, c, defended, services, options);
      row.value = r.overall.accuracy();
      row.items = items.size();
      row.failed = r.failed;
      row.candidates_per_item = r.candidates_per_item;
    }
    table.rows.push_back(row);
  };

  if (include_baseline) run(config, false, 0.0);
  for (double sigma : sigmas) {
    DefenseConfig c = config;
    c.noise.sigma_img = sigma;
    c.noise.sigma_audio = sigma;
    run(c, true, sigma);
  }
  return table;
}

double AsrRow::average() const {
  std::vector<double> v;
  for (const auto& [name, asr] : values) v.push_back(asr);
  return table_average(v);
}

AsrRow asr_row(std::string method, const SafetyReport& report) {
  AsrRow row{std::move(method), {}};
  for (const auto& c : report.categories) row.values.emplace_back(c.category, c.asr());
  return row;
}

}  // namespace smoothguard
