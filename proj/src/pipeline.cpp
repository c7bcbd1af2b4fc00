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

#include "smoothguard/pipeline.hpp"

#include <fmt/format.h>

namespace smoothguard {

std::string_view to_string(EmbedderKind kind) {
  return kind == EmbedderKind::kRemote ? "remote" : "test";
}

void DefenseConfig::validate() const {
  noise.validate();
  generation.validate();
  if (parallelism < 1) throw InvalidArgument("config: parallelism must be >= 1");
  if (allow_partial && quorum < min_quorum()) {
    throw InvalidArgument(fmt::format(
        "config: quorum {} is below the minimum {} for {} candidates", quorum,
        min_quorum(), noise.num_noisy + 1));
  }
}

nlohmann::json to_json(const DefenseConfig& c) {
  nlohmann::json j = {
      {"sigma_img", c.noise.sigma_img},
      {"sigma_audio", c.noise.sigma_audio},
      {"num_noisy", c.noise.num_noisy},
      {"master_seed", c.noise.master_seed},
      {"max_tokens", c.generation.max_tokens},
      {"temperature", c.generation.temperature},
      {"model_id", c.generation.model_id},
      {"parallelism", c.parallelism},
      {"embedder", to_string(c.embedder)},
      {"kmeans_seed", c.kmeans_seed},
      {"allow_partial", c.allow_partial},
      {"quorum", c.quorum},
      {"max_retries", c.retry.max_retries},
      {"base_backoff_ms", c.retry.base_backoff.count()},
  };
  j["decode_seed"] = c.generation.decode_seed ? nlohmann::json(*c.generation.decode_seed)
                                              : nlohmann::json(nullptr);
  return j;
}

std::string config_digest(const DefenseConfig& config) {
  return to_hex(sha256(to_json(config).dump()));
}

namespace {

template <typename Fn>
auto timed(std::chrono::microseconds& slot, Fn&& fn) {
  const auto start = std::chrono::steady_clock::now();
  auto result = fn();
  slot = std::chrono::duration_cast<std::chrono::microseconds>(
      std::chrono::steady_clock::now() - start);
  return result;
}

}  // namespace

DefendedAnswer defend(const MultimodalInput& input, const DefenseConfig& config,
                      const Backend& backend, const Embedder& embedder) {
  config.validate();
  DefendedAnswer answer;

  const PerturbedBatch batch =
      timed(answer.timing.perturb, [&] { return make_batch(input, config.noise); });
  answer.seeds = batch.seeds;

  answer.candidates = timed(answer.timing.generate, [&] {
    try {
      return generate_batch(backend, batch, config.generation, config.parallelism,
                            config.retry);
    } catch (const PartialFailure& e) {
      if (!config.allow_partial || e.succeeded().size() < config.quorum) throw;
      answer.failures = e.failures();
      return e.succeeded();
    }
  });

  const PreparedTexts prepared = prepare_texts(answer.candidates);
  const auto embeddings = timed(answer.timing.embed, [&] {
    return embed_texts(embedder, prepared.texts);
  });

  answer.aggregation = timed(answer.timing.aggregate, [&] {
    return aggregate_batch(answer.candidates, embeddings, batch.clean_index,
                           config.kmeans_seed, prepared.empty);
  });
  answer.final_text = answer.aggregation.selected_text;
  return answer;
}

CandidateResponse undefended(const MultimodalInput& input,
                             const DefenseConfig& config, const Backend& backend) {
  input.validate();
  config.generation.validate();
  return generate_with_retry(backend, input, config.generation, config.retry);
}

nlohmann::json trace_record(const MultimodalInput& input, const DefenseConfig& config,
                            const DefendedAnswer& answer, bool include_timing) {
  nlohmann::json candidates = nlohmann::json::array();
  for (const auto& c : answer.candidates) {
    candidates.push_back({{"candidate_index", c.candidate_index},
                          {"perturbed", c.perturbed},
                          {"retries", c.retries},
                          {"text", c.text}});
  }
  nlohmann::json failures = nlohmann::json::array();
  for (const auto& f : answer.failures) {
    failures.push_back({{"candidate_index", f.candidate_index}, {"reason", f.reason}});
  }
  nlohmann::json record = {
      {"item_id", input.item_id},
      {"config_digest", config_digest(config)},
      {"master_seed", config.noise.master_seed},
      {"seeds", answer.seeds},
      {"final_text", answer.final_text},
      {"candidates", candidates},
      {"failures", failures},
      {"aggregation", to_json(answer.aggregation)},
  };
  if (include_timing) {
    record["timing_us"] = {{"perturb", answer.timing.perturb.count()},
                           {"generate", answer.timing.generate.count()},
                           {"embed", answer.timing.embed.count()},
                           {"aggregate", answer.timing.aggregate.count()}};
  }
  return record;
}

}  // namespace smoothguard
