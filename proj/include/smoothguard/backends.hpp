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
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "smoothguard/error.hpp"
#include "smoothguard/http.hpp"
#include "smoothguard/media.hpp"
#include "smoothguard/perturb.hpp"

namespace smoothguard {

struct GenerationParams {
  std::size_t max_tokens = 256;
  /// 0 means greedy decoding, leaving the injected noise as the only
  /// source of variation between candidates.
  double temperature = 0.0;
  std::optional<std::uint64_t> decode_seed;
  std::string model_id = "default";

  void validate() const;
};

struct CandidateResponse {
  std::string text;
  std::size_t candidate_index = 0;
  bool perturbed = false;
  std::optional<std::chrono::milliseconds> latency;
  std::size_t retries = 0;
};

/// Candidate generator. Implementations must be callable concurrently.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string generate(const MultimodalInput& sample,
                               const GenerationParams& params) const = 0;
};

/// What a stub rule gets to look at.
struct StubQuery {
  const MultimodalInput& sample;
  Sha256 media_digest;    // all-zero for text-only samples
  Sha256 content_digest;  // prompt + media
};

using StubRule = std::function<std::string(const StubQuery&)>;

/// Deterministic in-process backend: `generate` is `rule` applied to the
/// sample's content. The rule may throw to simulate failures.
class StubBackend final : public Backend {
 public:
  explicit StubBackend(StubRule rule);
  std::string generate(const MultimodalInput& sample,
                       const GenerationParams& params) const override;

 private:
  StubRule rule_;
};

std::shared_ptr<Backend> stub_backend(StubRule rule);

struct HealthStatus {
  std::string status;
  std::vector<std::string> models;
};

/// Client for POST /v1/generate. Media travel as base64 PNG / WAV.
class RemoteBackend final : public Backend {
 public:
  explicit RemoteBackend(EndpointConfig config);
  std::string generate(const MultimodalInput& sample,
                       const GenerationParams& params) const override;
  HealthStatus health() const;

  static nlohmann::json request_body(const MultimodalInput& sample,
                                     const GenerationParams& params);

 private:
  HttpEndpoint endpoint_;
};

struct RetryPolicy {
  std::size_t max_retries = 2;
  std::chrono::milliseconds base_backoff{100};  // doubles after each attempt
};

struct SampleFailure {
  std::size_t candidate_index;
  std::string reason;
};

/// Some samples exhausted their retries. Carries the ones that succeeded so
/// a caller with a quorum policy can still vote.
class PartialFailure : public Error {
 public:
  PartialFailure(std::vector<SampleFailure> failures,
                 std::vector<CandidateResponse> succeeded);

  const std::vector<SampleFailure>& failures() const noexcept { return failures_; }
  const std::vector<CandidateResponse>& succeeded() const noexcept {
    return succeeded_;
  }
  std::vector<std::size_t> failed_indices() const;

 private:
  std::vector<SampleFailure> failures_;
  std::vector<CandidateResponse> succeeded_;
};

/// Generate one candidate per batch sample with up to `parallelism`
/// requests in flight. The result is ordered by candidate_index whatever
/// the completion order.
std::vector<CandidateResponse> generate_batch(const Backend& backend,
                                              const PerturbedBatch& batch,
                                              const GenerationParams& params,
                                              std::size_t parallelism,
                                              const RetryPolicy& retry = {});

/// Single call with the same retry policy; used for the undefended baseline.
CandidateResponse generate_with_retry(const Backend& backend,
                                      const MultimodalInput& sample,
                                      const GenerationParams& params,
                                      const RetryPolicy& retry = {});

}  // namespace smoothguard
