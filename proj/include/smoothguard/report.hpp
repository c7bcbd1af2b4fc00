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
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "smoothguard/eval.hpp"

namespace smoothguard {

using Cell = std::variant<std::string, double, std::int64_t>;

enum class Chart { kNone, kBars, kLine };

/// A rendered table. `meta` travels into the JSON output (config digest,
/// seeds, raw counts).
struct ReportTable {
  std::string name;  // file stem
  std::string title;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
  Chart chart = Chart::kNone;
  nlohmann::json meta = nlohmann::json::object();
};

enum class Format { kCsv, kJson, kSvg };

/// "csv,json,svg" in any order; throws InvalidArgument on unknown names.
std::set<Format> parse_formats(std::string_view spec);

/// Columns: method, one per category, avg.
ReportTable asr_table(std::string name, std::span<const AsrRow> rows);
/// Columns: category, n, accuracy, precision, recall, f1, unparseable_rate.
ReportTable utility_table(std::string name, const UtilityReport& report);
/// Columns: sigma, baseline, <metric>, items, failed, candidates_per_item.
ReportTable sweep_table(std::string name, const SweepTable& sweep);

/// CSV fields are RFC-4180 quoted when needed; reals print with 4 decimals.
std::string to_csv(const ReportTable& table);
nlohmann::json to_json(const ReportTable& table);
/// Grouped bar chart (kBars) or line chart (kLine).
std::string to_svg(const ReportTable& table);

/// Writes <out_dir>/<name>.<ext> for every table and requested format (SVG
/// only for tables with a chart). Returns the written paths in order. An
/// empty table list logs a warning and writes nothing. Throws IoError.
std::vector<std::filesystem::path> emit_report(std::span<const ReportTable> tables,
                                               const std::filesystem::path& out_dir,
                                               const std::set<Format>& formats);

}  // namespace smoothguard
