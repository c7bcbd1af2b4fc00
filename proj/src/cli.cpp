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

#include "smoothguard/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "smoothguard/config.hpp"
#include "smoothguard/eval.hpp"
#include "smoothguard/pipeline.hpp"
#include "smoothguard/report.hpp"

namespace smoothguard {

namespace {

namespace fs = std::filesystem;

// Every config key gets a mirroring flag; values stay strings until
// RunConfig::apply types them.
constexpr const char* kConfigKeys[] = {
    "backend", "backend_url", "token_env", "connect_timeout_ms", "timeout_ms",
    "model_id", "max_tokens", "temperature", "decode_seed", "sigma", "sigma_audio",
    "num_noisy", "seed", "kmeans_seed", "parallelism", "embedder", "max_retries",
    "backoff_ms", "stub_rules", "classifier", "flag_substrings", "dataset", "schema",
    "override_image", "categories", "workers", "out", "formats", "quorum"};

struct Flags {
  std::optional<std::string> config_file;
  std::map<std::string, std::optional<std::string>> values;
  bool allow_partial = false;
  std::vector<std::string> flag_substring_list;
};

void add_common(CLI::App* app, Flags& flags) {
  app->add_option("--config", flags.config_file, "Flat key/value config file");
  for (const char* key : kConfigKeys) {
    std::string flag = key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    if (flag == "flag-substrings") continue;
    app->add_option("--" + flag, flags.values[key]);
  }
  app->add_option("--flag-substring", flags.flag_substring_list,
                  "Stub classifier rule (repeatable)");
  app->add_flag("--allow-partial", flags.allow_partial,
                "Vote on surviving candidates when the quorum is met");
}

RunConfig effective_config(const Flags& flags) {
  RunConfig config;
  if (flags.config_file) config.apply(FlatConfig::load(*flags.config_file));
  for (const auto& [key, value] : flags.values) {
    if (value) config.apply(key, *value);
  }
  if (flags.allow_partial) config.defense.allow_partial = true;
  if (!flags.flag_substring_list.empty()) config.flag_substrings = flags.flag_substring_list;
  config.defense.validate();
  return config;
}

struct Services {
  std::shared_ptr<Backend> backend;
  std::unique_ptr<Embedder> embedder;
  std::unique_ptr<SafetyClassifier> classifier;
};

Services make_services(const RunConfig& config) {
  Services s;
  const EndpointConfig endpoint = config.resolved_endpoint();
  if (config.backend == "stub") {
    if (!config.stub_rules) throw InvalidArgument("--backend stub needs --stub-rules");
    s.backend = stub_backend(load_stub_rules(*config.stub_rules));
  } else {
    s.backend = std::make_shared<RemoteBackend>(endpoint);
  }
  if (config.defense.embedder == EmbedderKind::kRemote) {
    s.embedder = std::make_unique<RemoteEmbedder>(endpoint);
  } else {
    s.embedder = std::make_unique<TestEmbedder>();
  }
  if (config.classifier == "stub") {
    std::vector<KeywordClassifier::Rule> rules;
    for (const auto& sub : config.flag_substrings) rules.push_back({sub, "unsafe"});
    s.classifier = std::make_unique<KeywordClassifier>(std::move(rules));
  } else {
    s.classifier = std::make_unique<RemoteClassifier>(endpoint);
  }
  return s;
}

void require_file(const fs::path& path, const char* what) {
  if (!fs::is_regular_file(path)) {
    throw InvalidArgument(fmt::format("{} not found: {}", what, path.string()));
  }
}

nlohmann::json report_meta(const RunConfig& config) {
  return {{"config", config.to_json()},
          {"config_digest", config.digest()},
          {"master_seed", config.defense.noise.master_seed},
          {"kmeans_seed", config.defense.kmeans_seed}};
}

nlohmann::json outcome_json(const ItemOutcome& o, Schema schema) {
  nlohmann::json j = {{"item_id", o.item_id}, {"category", o.category},
                      {"response", o.response}, {"failed", o.failed},
                      {"error", o.error}, {"candidates", o.candidates}};
  if (schema == Schema::kSafety) {
    j["flagged"] = o.flagged;
    j["flagged_categories"] = o.flagged_categories;
  } else {
    j["gold"] = to_string(o.gold);
    j["predicted"] = to_string(o.predicted);
  }
  if (!o.trace.is_null()) j["trace"] = o.trace;
  return j;
}

fs::path write_items(const fs::path& out_dir, const std::string& name,
                     const std::vector<ItemOutcome>& items, Schema schema) {
  fs::create_directories(out_dir);
  const fs::path path = out_dir / (name + ".jsonl");
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  for (const auto& o : items) f << outcome_json(o, schema).dump() << '\n';
  return path;
}

EvalOptions eval_options(const RunConfig& config) {
  EvalOptions options;
  options.override_image = config.override_image;
  options.workers = config.workers;
  options.categories = config.categories;
  return options;
}

int cmd_defend(const Flags& flags, const std::string& prompt,
               const std::optional<std::string>& image,
               const std::optional<std::string>& audio, const std::string& item_id,
               std::ostream& out) {
  const RunConfig config = effective_config(flags);
  MultimodalInput input{item_id, prompt, std::nullopt, std::nullopt};
  if (image) {
    require_file(*image, "image file");
    input.image = load_image(*image);
  }
  if (audio) {
    require_file(*audio, "audio file");
    input.audio = load_audio(*audio);
  }
  const Services s = make_services(config);
  const DefendedAnswer answer = defend(input, config.defense, *s.backend, *s.embedder);
  nlohmann::json record = trace_record(input, config.defense, answer, true);
  record["config"] = config.to_json();
  out << record.dump(2) << '\n';
  return kExitOk;
}

int cmd_eval(const Flags& flags, const std::optional<std::string>& schema_arg,
             bool defended_flag, bool baseline_flag, std::ostream& out) {
  RunConfig config = effective_config(flags);
  if (schema_arg) config.apply("schema", *schema_arg);
  if (!config.dataset) throw InvalidArgument("eval needs --dataset");
  require_file(*config.dataset, "dataset");
  if (config.override_image) require_file(*config.override_image, "override image");

  std::vector<bool> modes;  // defended?
  if (baseline_flag) modes.push_back(false);
  if (defended_flag || !baseline_flag) modes.push_back(true);

  const Services s = make_services(config);
  const EvalServices services{*s.backend, *s.embedder, s.classifier.get()};
  const EvalOptions options = eval_options(config);
  const fs::path out_dir = config.out;
  const auto formats = parse_formats(config.formats);
  std::vector<fs::path> written;
  std::size_t failed = 0;

  if (config.schema == Schema::kSafety) {
    const auto items = load_safety_jsonl(*config.dataset, config.categories);
    std::vector<AsrRow> rows;
    nlohmann::json counts = nlohmann::json::object();
    for (bool defended : modes) {
      const SafetyReport r = eval_safety(items, config.defense, defended, services, options);
      const std::string method = defended ? "defended" : "baseline";
      rows.push_back(asr_row(method, r));
      for (const auto& c : r.categories) {
        counts[method][c.category] = {{"n", c.n}, {"flagged", c.flagged}};
      }
      counts[method]["failed"] = r.failed;
      failed += r.failed;
      written.push_back(write_items(out_dir, "safety_items_" + method, r.items, Schema::kSafety));
    }
    ReportTable table = asr_table("safety_asr", rows);
    table.meta = report_meta(config);
    table.meta["counts"] = counts;
    auto files = emit_report(std::span(&table, 1), out_dir, formats);
    written.insert(written.end(), files.begin(), files.end());
  } else {
    const auto items = load_utility_jsonl(*config.dataset);
    std::vector<ReportTable> tables;
    for (bool defended : modes) {
      const UtilityReport r = eval_utility(items, config.defense, defended, services, options);
      const std::string method = defended ? "defended" : "baseline";
      ReportTable table = utility_table("utility_" + method, r);
      table.meta = report_meta(config);
      table.meta["failed"] = r.failed;
      tables.push_back(std::move(table));
      failed += r.failed;
      written.push_back(write_items(out_dir, "utility_items_" + method, r.items, Schema::kUtility));
    }
    auto files = emit_report(tables, out_dir, formats);
    written.insert(written.end(), files.begin(), files.end());
  }

  for (const auto& p : written) out << p.generic_string() << '\n';
  return failed > 0 ? kExitBackend : kExitOk;
}

int cmd_ablate(const Flags& flags, const std::string& sigma_spec,
               const std::optional<std::string>& metric_arg, bool include_baseline,
               std::ostream& out) {
  RunConfig config = effective_config(flags);
  const std::vector<double> sigmas = parse_sigmas(sigma_spec);
  if (!config.dataset) throw InvalidArgument("ablate needs --dataset");
  require_file(*config.dataset, "dataset");
  if (config.override_image) require_file(*config.override_image, "override image");

  Metric metric = config.schema == Schema::kSafety ? Metric::kAsr : Metric::kAccuracy;
  if (metric_arg) metric = *metric_arg == "asr" ? Metric::kAsr : Metric::kAccuracy;
  const Schema schema = metric == Metric::kAsr ? Schema::kSafety : Schema::kUtility;
  const Dataset dataset = load_jsonl(*config.dataset, schema, config.categories);

  const Services s = make_services(config);
  const EvalServices services{*s.backend, *s.embedder, s.classifier.get()};
  const SweepTable sweep = ablate(dataset, sigmas, config.defense, metric, services,
                                  eval_options(config), include_baseline);

  ReportTable table = sweep_table(fmt::format("sweep_{}", to_string(metric)), sweep);
  table.meta = report_meta(config);
  table.meta["sigmas"] = sigmas;
  const auto written = emit_report(std::span(&table, 1), config.out, parse_formats(config.formats));
  for (const auto& p : written) out << p.generic_string() << '\n';

  std::size_t failed = 0;
  for (const auto& r : sweep.rows) failed += r.failed;
  return failed > 0 ? kExitBackend : kExitOk;
}

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::kBackendUnavailable:
    case ErrorCode::kBackendError:
    case ErrorCode::kProtocolError:
    case ErrorCode::kPartialFailure:
      return kExitBackend;
    default:
      return kExitUsage;
  }
}

}  // namespace

int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Noise-smoothing defense for multimodal model queries", "smoothguard"};
  app.require_subcommand(1);

  Flags defend_flags, eval_flags, ablate_flags;

  auto* defend_cmd = app.add_subcommand("defend", "Answer one query through the defense");
  add_common(defend_cmd, defend_flags);
  std::string prompt;
  std::optional<std::string> image, audio;
  std::string item_id = "cli";
  defend_cmd->add_option("--prompt", prompt, "Text prompt")->required();
  defend_cmd->add_option("--image", image, "PNG or JPEG file");
  defend_cmd->add_option("--audio", audio, "16-bit PCM WAV file");
  defend_cmd->add_option("--item-id", item_id, "Identifier echoed in the trace");

  auto* eval_cmd = app.add_subcommand("eval", "Safety or utility evaluation over a dataset");
  add_common(eval_cmd, eval_flags);
  std::optional<std::string> eval_schema;
  bool defended = false, baseline = false;
  eval_cmd->add_option("kind", eval_schema, "safety or utility")
      ->check(CLI::IsMember({"safety", "utility"}));
  eval_cmd->add_flag("--defended", defended, "Run through the defense (default)");
  eval_cmd->add_flag("--baseline", baseline, "Run the bare backend once per item");

  auto* ablate_cmd = app.add_subcommand("ablate", "Sweep the noise level");
  add_common(ablate_cmd, ablate_flags);
  std::string sigma_spec;
  std::optional<std::string> metric;
  bool include_baseline = false;
  ablate_cmd->add_option("--sigmas", sigma_spec, "lo:hi:step, a,b,c or one value")->required();
  ablate_cmd->add_option("--metric", metric, "asr or accuracy")
      ->check(CLI::IsMember({"asr", "accuracy"}));
  ablate_cmd->add_flag("--include-baseline", include_baseline, "Prepend an undefended row");

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*defend_cmd) return cmd_defend(defend_flags, prompt, image, audio, item_id, out);
    if (*eval_cmd) return cmd_eval(eval_flags, eval_schema, defended, baseline, out);
    if (*ablate_cmd) return cmd_ablate(ablate_flags, sigma_spec, metric, include_baseline, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace smoothguard
