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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "smoothguard/backends.hpp"
#include "smoothguard/embed.hpp"
#include "smoothguard/http.hpp"
#include "smoothguard/pipeline.hpp"

namespace smoothguard {

enum class BinaryAnswer { kYes, kNo, kUnparseable };

std::string_view to_string(BinaryAnswer a);

// ---------------------------------------------------------------------------
// Datasets. One JSON object per line; blank lines are skipped. Relative
// media paths resolve against the dataset file's directory.
//
//   safety:  {"item_id", "category", "prompt", "image_path", "audio_path"?}
//   utility: {"item_id", "prompt", "image_path", "gold": "yes"|"no",
//             "category"?, "audio_path"?}

struct SafetyItem {
  std::string item_id;
  std::string category;
  std::string prompt;
  std::filesystem::path image_path;
  std::optional<std::filesystem::path> audio_path;
};

struct UtilityItem {
  std::string item_id;
  std::string prompt;
  std::filesystem::path image_path;
  BinaryAnswer gold = BinaryAnswer::kYes;
  std::string category = "all";
  std::optional<std::filesystem::path> audio_path;
};

enum class Schema { kSafety, kUtility };

using Dataset = std::variant<std::vector<SafetyItem>, std::vector<UtilityItem>>;

/// Throws ParseError (bad JSON) or SchemaError (missing/mistyped field, or a
/// category outside `categories` when that list is non-empty); both name
/// the 1-based line.
std::vector<SafetyItem> load_safety_jsonl(const std::filesystem::path& path,
                                          std::span<const std::string> categories = {});
std::vector<UtilityItem> load_utility_jsonl(const std::filesystem::path& path);
Dataset load_jsonl(const std::filesystem::path& path, Schema schema,
                   std::span<const std::string> categories = {});

// ---------------------------------------------------------------------------
// Safety classification.

struct SafetyVerdict {
  bool flagged = false;
  std::vector<std::string> categories;
};

class SafetyClassifier {
 public:
  virtual ~SafetyClassifier() = default;
  virtual SafetyVerdict classify(std::string_view prompt,
                                 std::string_view response) const = 0;
};

/// Flags a response containing any rule's substring (case-insensitive).
class KeywordClassifier final : public SafetyClassifier {
 public:
  struct Rule {
    std::string substring;
    std::string category = "unsafe";
  };

  explicit KeywordClassifier(std::vector<Rule> rules);
  SafetyVerdict classify(std::string_view prompt,
                         std::string_view response) const override;

 private:
  std::vector<Rule> rules_;
};

/// Client for POST /v1/safety.
class RemoteClassifier final : public SafetyClassifier {
 public:
  explicit RemoteClassifier(EndpointConfig config);
  SafetyVerdict classify(std::string_view prompt,
                         std::string_view response) const override;

 private:
  HttpEndpoint endpoint_;
};

// ---------------------------------------------------------------------------
// Runs.

struct EvalServices {
  const Backend& backend;
  const Embedder& embedder;
  const SafetyClassifier* classifier = nullptr;  // required for safety runs
};

struct EvalOptions {
  /// Replaces every item's image (the universal adversarial image setting).
  std::optional<std::filesystem::path> override_image;
  std::size_t workers = 1;
  /// Report order for safety categories; empty means sorted order.
  std::vector<std::string> categories;
};

/// Per-item master seed: mix64(config seed ^ fnv1a64(item_id)), so results
/// do not depend on dataset order.
std::uint64_t item_seed(std::uint64_t master_seed, std::string_view item_id);

struct ItemOutcome {
  std::string item_id;
  std::string category;
  std::string response;
  bool failed = false;
  std::string error;
  bool flagged = false;
  std::vector<std::string> flagged_categories;
  BinaryAnswer gold = BinaryAnswer::kUnparseable;
  BinaryAnswer predicted = BinaryAnswer::kUnparseable;
  std::size_t candidates = 0;
  nlohmann::json trace;  // defended runs only
};

/// ASR bookkeeping for one category; asr() is flagged / n.
struct CategoryReport {
  std::string category;
  std::size_t n = 0;
  std::size_t flagged = 0;

  double asr() const { return n == 0 ? 0.0 : static_cast<double>(flagged) / static_cast<double>(n); }
};

/// Unweighted mean; throws InvalidArgument on an empty list.
double table_average(std::span<const double> values);

struct SafetyReport {
  bool defended = false;
  std::vector<CategoryReport> categories;  // only categories with items
  std::size_t failed = 0;
  std::size_t candidates_per_item = 0;
  std::vector<ItemOutcome> items;  // dataset order

  /// Unweighted mean of category ASRs.
  double average() const;
};

/// defended == false calls the bare backend once per item.
SafetyReport eval_safety(std::span<const SafetyItem> items, const DefenseConfig& config,
                         bool defended, const EvalServices& services,
                         const EvalOptions& options = {});

/// Leading token (punctuation stripped) if it is "yes"/"no"; otherwise the
/// one of the two words that appears alone in the first sentence.
BinaryAnswer parse_binary_answer(std::string_view text);

/// Confusion counts with "yes" as the positive class. An unparseable answer
/// is wrong for accuracy and counts as a negative prediction for
/// precision and recall.
struct UtilityCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;
  std::size_t unparseable_pos = 0;  // gold yes
  std::size_t unparseable_neg = 0;  // gold no

  void add(BinaryAnswer gold, BinaryAnswer predicted);
  std::size_t n() const { return tp + fp + tn + fn + unparseable_pos + unparseable_neg; }
  double accuracy() const;
  double precision() const;
  double recall() const;
  double f1() const;
  double unparseable_rate() const;
};

struct UtilityReport {
  bool defended = false;
  std::vector<std::pair<std::string, UtilityCounts>> categories;  // sorted
  UtilityCounts overall;
  std::size_t failed = 0;
  std::size_t candidates_per_item = 0;
  std::vector<ItemOutcome> items;
};

UtilityReport eval_utility(std::span<const UtilityItem> items, const DefenseConfig& config,
                           bool defended, const EvalServices& services,
                           const EvalOptions& options = {});

// ---------------------------------------------------------------------------
// Noise sweeps.

enum class Metric { kAsr, kAccuracy };

std::string_view to_string(Metric m);

struct SweepRow {
  double sigma = 0.0;
  bool baseline = false;  // undefended reference row
  double value = 0.0;
  std::size_t items = 0;
  std::size_t failed = 0;
  std::size_t candidates_per_item = 0;
};

struct SweepTable {
  Metric metric = Metric::kAsr;
  std::vector<SweepRow> rows;
};

/// "lo:hi:step" (inclusive), "a,b,c" or a single value. Values are rounded
/// to 12 decimals so 0.05 steps land on 0.15 rather than 0.15000000000000002.
/// Throws InvalidArgument on malformed input or negative values.
std::vector<double> parse_sigmas(std::string_view spec);

/// One row per sigma (applied to image and audio alike), preceded by an
/// undefended row when `include_baseline`. ASR rows report the unweighted
/// category mean; accuracy rows the overall accuracy.
SweepTable ablate(const Dataset& dataset, std::span<const double> sigmas,
                  const DefenseConfig& config, Metric metric,
                  const EvalServices& services, const EvalOptions& options = {},
                  bool include_baseline = false);

// ---------------------------------------------------------------------------
// Table rows in the method x category layout.

struct AsrRow {
  std::string method;
  std::vector<std::pair<std::string, double>> values;

  double average() const;
};

AsrRow asr_row(std::string method, const SafetyReport& report);

}  // namespace smoothguard
