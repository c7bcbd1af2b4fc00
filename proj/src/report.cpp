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

#include "smoothguard/report.hpp"

#include <algorithm>
#include <fstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

namespace smoothguard {

std::set<Format> parse_formats(std::string_view spec) {
  std::set<Format> out;
  for (std::size_t start = 0; start <= spec.size();) {
    auto comma = spec.find(',', start);
    if (comma == std::string_view::npos) comma = spec.size();
    const auto name = spec.substr(start, comma - start);
    if (name == "csv") {
      out.insert(Format::kCsv);
    } else if (name == "json") {
      out.insert(Format::kJson);
    } else if (name == "svg") {
      out.insert(Format::kSvg);
    } else if (!name.empty()) {
      throw InvalidArgument(fmt::format("unknown report format \"{}\"", name));
    }
    start = comma + 1;
  }
  return out;
}

ReportTable asr_table(std::string name, std::span<const AsrRow> rows) {
  ReportTable t;
  t.name = std::move(name);
  t.title = "Attack success rate by category";
  t.chart = Chart::kBars;
  t.columns.push_back("method");
  // Union of categories in first-seen order.
  for (const auto& row : rows) {
    for (const auto& [category, value] : row.values) {
      if (std::find(t.columns.begin() + 1, t.columns.end(), category) == t.columns.end()) {
        t.columns.push_back(category);
      }
    }
  }
  t.columns.push_back("avg");
  for (const auto& row : rows) {
    std::vector<Cell> cells{row.method};
    for (std::size_t c = 1; c + 1 < t.columns.size(); ++c) {
      auto it = std::find_if(row.values.begin(), row.values.end(),
                             [&](const auto& v) { return v.first == t.columns[c]; });
      if (it == row.values.end()) {
        cells.emplace_back(std::string());
      } else {
        cells.emplace_back(it->second);
      }
    }
    cells.emplace_back(row.average());
    t.rows.push_back(std::move(cells));
  }
  return t;
}

ReportTable utility_table(std::string name, const UtilityReport& report) {
  ReportTable t;
  t.name = std::move(name);
  t.title = report.defended ? "Utility (defended)" : "Utility (baseline)";
  t.chart = Chart::kBars;
  t.columns = {"category", "n", "accuracy", "precision", "recall", "f1", "unparseable_rate"};
  auto add = [&](const std::string& category, const UtilityCounts& c) {
    t.rows.push_back({category, static_cast<std::int64_t>(c.n()), c.accuracy(),
                      c.precision(), c.recall(), c.f1(), c.unparseable_rate()});
  };
  for (const auto& [category, counts] : report.categories) add(category, counts);
  add("overall", report.overall);
  return t;
}

ReportTable sweep_table(std::string name, const SweepTable& sweep) {
  ReportTable t;
  t.name = std::move(name);
  t.title = fmt::format("{} versus noise level", to_string(sweep.metric));
  t.chart = Chart::kLine;
  t.columns = {"sigma", "baseline", std::string(to_string(sweep.metric)),
               "items", "failed", "candidates_per_item"};
  for (const auto& r : sweep.rows) {
    t.rows.push_back({r.sigma, static_cast<std::int64_t>(r.baseline), r.value,
                      static_cast<std::int64_t>(r.items), static_cast<std::int64_t>(r.failed),
                      static_cast<std::int64_t>(r.candidates_per_item)});
  }
  return t;
}

namespace {

std::string csv_field(const Cell& cell) {
  if (const auto* d = std::get_if<double>(&cell)) return fmt::format("{:.4f}", *d);
  if (const auto* i = std::get_if<std::int64_t>(&cell)) return std::to_string(*i);
  const auto& s = std::get<std::string>(cell);
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string quoted = "\"";
  for (char c : s) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  return quoted + '"';
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

double numeric(const Cell& cell) {
  if (const auto* d = std::get_if<double>(&cell)) return *d;
  if (const auto* i = std::get_if<std::int64_t>(&cell)) return static_cast<double>(*i);
  return 0.0;
}

std::string label(const Cell& cell) {
  if (const auto* s = std::get_if<std::string>(&cell)) return *s;
  return csv_field(cell);
}

constexpr const char* kPalette[] = {"#4e79a7", "#f28e2b", "#e15759", "#76b7b2",
                                    "#59a14f", "#edc948", "#b07aa1", "#ff9da7"};
constexpr double kWidth = 720, kHeight = 360, kLeft = 60, kRight = 20, kTop = 40,
                 kBottom = 70;

std::string svg_frame(const ReportTable& t, double y_max, const std::string& body) {
  std::string out = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\" "
      "viewBox=\"0 0 {:.0f} {:.0f}\">\n",
      kWidth, kHeight, kWidth, kHeight);
  out += fmt::format("<text x=\"{:.1f}\" y=\"20\" font-size=\"14\" text-anchor=\"middle\">{}</text>\n",
                     kWidth / 2, xml_escape(t.title));
  const double plot_h = kHeight - kTop - kBottom;
  out += fmt::format("<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{0:.1f}\" y2=\"{2:.1f}\" stroke=\"#000\"/>\n",
                     kLeft, kTop, kTop + plot_h);
  out += fmt::format("<line x1=\"{0:.1f}\" y1=\"{2:.1f}\" x2=\"{1:.1f}\" y2=\"{2:.1f}\" stroke=\"#000\"/>\n",
                     kLeft, kWidth - kRight, kTop + plot_h);
  for (int k = 0; k <= 4; ++k) {
    const double v = y_max * k / 4.0;
    const double y = kTop + plot_h - plot_h * k / 4.0;
    out += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" font-size=\"10\" text-anchor=\"end\">{:.2f}</text>\n",
                       kLeft - 4, y + 3, v);
  }
  out += body;
  out += "</svg>\n";
  return out;
}

std::string svg_bars(const ReportTable& t) {
  // Groups are the numeric columns, bars within a group are rows.
  std::vector<std::size_t> series;
  for (std::size_t c = 1; c < t.columns.size(); ++c) {
    if (!t.rows.empty() && std::holds_alternative<double>(t.rows.front()[c])) series.push_back(c);
  }
  double y_max = 0.0;
  for (const auto& row : t.rows) {
    for (auto c : series) y_max = std::max(y_max, numeric(row[c]));
  }
  if (y_max <= 0.0) y_max = 1.0;

  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  const double group_w = series.empty() ? plot_w : plot_w / static_cast<double>(series.size());
  const double bar_w = t.rows.empty() ? 0.0 : group_w * 0.8 / static_cast<double>(t.rows.size());
  std::string body;
  for (std::size_t g = 0; g < series.size(); ++g) {
    const double x0 = kLeft + group_w * static_cast<double>(g) + group_w * 0.1;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      const double h = plot_h * numeric(t.rows[r][series[g]]) / y_max;
      body += fmt::format(
          "<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"{:.1f}\" height=\"{:.1f}\" fill=\"{}\"/>\n",
          x0 + bar_w * static_cast<double>(r), kTop + plot_h - h, bar_w, h,
          kPalette[r % std::size(kPalette)]);
    }
    body += fmt::format(
        "<text x=\"{:.1f}\" y=\"{:.1f}\" font-size=\"10\" text-anchor=\"middle\">{}</text>\n",
        x0 + group_w * 0.4, kTop + plot_h + 14, xml_escape(t.columns[series[g]]));
  }
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const double y = kHeight - 30 + 12.0 * static_cast<double>(r % 2);
    const double x = kLeft + 160.0 * static_cast<double>(r / 2);
    body += fmt::format("<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"10\" height=\"10\" fill=\"{}\"/>\n",
                        x, y - 9, kPalette[r % std::size(kPalette)]);
    body += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" font-size=\"10\">{}</text>\n", x + 14, y,
                        xml_escape(label(t.rows[r][0])));
  }
  return svg_frame(t, y_max, body);
}

std::string svg_line(const ReportTable& t) {
  // x from column 0, y from column 2; baseline rows become a dashed level.
  double x_min = 0.0, x_max = 0.0, y_max = 0.0;
  bool first = true;
  for (const auto& row : t.rows) {
    y_max = std::max(y_max, numeric(row[2]));
    if (numeric(row[1]) != 0.0) continue;
    const double x = numeric(row[0]);
    x_min = first ? x : std::min(x_min, x);
    x_max = first ? x : std::max(x_max, x);
    first = false;
  }
  if (y_max <= 0.0) y_max = 1.0;
  if (x_max <= x_min) x_max = x_min + 1.0;

  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + plot_w * (x - x_min) / (x_max - x_min); };
  auto py = [&](double y) { return kTop + plot_h - plot_h * y / y_max; };

  std::string body;
  std::string points;
  for (const auto& row : t.rows) {
    const double y = numeric(row[2]);
    if (numeric(row[1]) != 0.0) {
      body += fmt::format(
          "<line x1=\"{0:.1f}\" y1=\"{2:.1f}\" x2=\"{1:.1f}\" y2=\"{2:.1f}\" stroke=\"#e15759\" "
          "stroke-dasharray=\"4 3\"/>\n",
          kLeft, kWidth - kRight, py(y));
      continue;
    }
    const double x = numeric(row[0]);
    points += fmt::format("{:.1f},{:.1f} ", px(x), py(y));
    body += fmt::format("<circle cx=\"{:.1f}\" cy=\"{:.1f}\" r=\"3\" fill=\"#4e79a7\"/>\n", px(x), py(y));
    body += fmt::format(
        "<text x=\"{:.1f}\" y=\"{:.1f}\" font-size=\"10\" text-anchor=\"middle\">{:.2f}</text>\n",
        px(x), kTop + plot_h + 14, x);
  }
  if (!points.empty()) points.pop_back();
  body += fmt::format("<polyline points=\"{}\" fill=\"none\" stroke=\"#4e79a7\"/>\n", points);
  body += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
                      kLeft + plot_w / 2, kHeight - 30, xml_escape(t.columns[0]));
  return svg_frame(t, y_max, body);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("short write to " + path.string());
}

}  // namespace

std::string to_csv(const ReportTable& table) {
  std::string out;
  auto line = [&](const std::vector<Cell>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i > 0) out += ',';
      out += csv_field(cells[i]);
    }
    out += "\r\n";
  };
  line(std::vector<Cell>(table.columns.begin(), table.columns.end()));
  for (const auto& row : table.rows) line(row);
  return out;
}

nlohmann::json to_json(const ReportTable& table) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : table.rows) {
    nlohmann::json obj = nlohmann::json::object();
    for (std::size_t c = 0; c < table.columns.size() && c < row.size(); ++c) {
      std::visit([&](const auto& v) { obj[table.columns[c]] = v; }, row[c]);
    }
    rows.push_back(std::move(obj));
  }
  return {{"name", table.name},
          {"title", table.title},
          {"columns", table.columns},
          {"rows", rows},
          {"meta", table.meta}};
}

std::string to_svg(const ReportTable& table) {
  switch (table.chart) {
    case Chart::kBars: return svg_bars(table);
    case Chart::kLine: return svg_line(table);
    case Chart::kNone: break;
  }
  return {};
}

std::vector<std::filesystem::path> emit_report(std::span<const ReportTable> tables,
                                               const std::filesystem::path& out_dir,
                                               const std::set<Format>& formats) {
  std::vector<std::filesystem::path> written;
  if (tables.empty()) {
    spdlog::warn("emit_report: no tables to write");
    return written;
  }
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError(fmt::format("cannot create {}: {}", out_dir.string(), ec.message()));

  for (const auto& t : tables) {
    if (formats.contains(Format::kCsv)) {
      written.push_back(out_dir / (t.name + ".csv"));
      write_text(written.back(), to_csv(t));
    }
    if (formats.contains(Format::kJson)) {
      written.push_back(out_dir / (t.name + ".json"));
      write_text(written.back(), to_json(t).dump(2) + "\n");
    }
    if (formats.contains(Format::kSvg) && t.chart != Chart::kNone) {
      written.push_back(out_dir / (t.name + ".svg"));
      write_text(written.back(), to_svg(t));
    }
  }
  return written;
}

}  // namespace smoothguard
