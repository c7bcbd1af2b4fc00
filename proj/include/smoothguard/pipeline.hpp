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

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "smoothguard/aggregate.hpp"
#include "smoothguard/backends.hpp"
#include "smoothguard/embed.hpp"
#include "smoothguard/perturb.hpp"

namespace smoothguard {

enum class EmbedderKind { kRemote, kTest };

std::string_view to_string(EmbedderKind kind);

struct DefenseConfig {
  NoiseConfig noise;
  GenerationParams generation;
  std::size_t parallelism = 1;
  EmbedderKind embedder = EmbedderKind::kTest;
  std::uint64_t kmeans_seed = 0;
  /// Vote on the candidates that succeeded when at least `quorum` did.
  bool allow_partial = false;
  std::size_t quorum = 0;
  RetryPolicy retry;

  /// Throws InvalidArgument. With allow_partial, quorum must be at least
  /// ceil((num_noisy + 1) / 2).
  void validate() const;
  std::size_t min_quorum() const noexcept { return (noise.num_noisy + 2) / 2; }
};

nlohmann::json to_json(const DefenseConfig& config);
/// SHA-256 hex of the canonical JSON form.
std::string config_digest(const DefenseConfig& config);

struct StageTiming {
  std::chrono::microseconds perturb{0};
  std::chrono::microseconds generate{0};
  std::chrono::microseconds embed{0};
  std::chrono::microseconds aggregate{0};
};

struct DefendedAnswer {
  std::string final_text;
  AggregationResult aggregation;
  std::vector<CandidateResponse> candidates;
  std::vector<std::uint64_t> seeds;
  std::vector<SampleFailure> failures;  // non-empty only under a quorum vote
  StageTiming timing;
};

/// Perturb, generate num_noisy + 1 candidates, embed and aggregate.
/// A PartialFailure propagates unless config.allow_partial and the quorum
/// is met.
DefendedAnswer defend(const MultimodalInput& input, const DefenseConfig& config,
                      const Backend& backend, const Embedder& embedder);

/// The bare backend on the clean input, once.
CandidateResponse undefended(const MultimodalInput& input,
                             const DefenseConfig& config, const Backend& backend);

/// One JSONL trace record. Timing is left out unless asked for so records
/// are byte-stable across runs.
nlohmann::json trace_record(const MultimodalInput& input, const DefenseConfig& config,
                            const DefendedAnswer& answer, bool include_timing = false);

}  // namespace smoothguard
