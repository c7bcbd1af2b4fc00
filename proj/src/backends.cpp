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

#include "smoothguard/backends.hpp"

#include <algorithm>
#include <atomic>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

namespace smoothguard {

void GenerationParams::validate() const {
  if (max_tokens < 1) throw InvalidArgument("generation: max_tokens must be >= 1");
  if (!(temperature >= 0.0)) {
    throw InvalidArgument("generation: temperature must be >= 0");
  }
}

StubBackend::StubBackend(StubRule rule) : rule_(std::move(rule)) {}

std::string StubBackend::generate(const MultimodalInput& sample,
                                  const GenerationParams& params) const {
  params.validate();
  return rule_(StubQuery{sample, media_digest(sample), content_digest(sample)});
}

std::shared_ptr<Backend> stub_backend(StubRule rule) {
  return std::make_shared<StubBackend>(std::move(rule));
}

RemoteBackend::RemoteBackend(EndpointConfig config)
    : endpoint_(std::move(config)) {}

nlohmann::json RemoteBackend::request_body(const MultimodalInput& sample,
                                           const GenerationParams& params) {
  nlohmann::json body = {
      {"model_id", params.model_id},
      {"prompt", sample.prompt},
      {"max_tokens", params.max_tokens},
      {"temperature", params.temperature},
  };
  if (sample.image) body["image_png_b64"] = base64_encode(encode_image(*sample.image));
  if (sample.audio) body["audio_wav_b64"] = base64_encode(encode_audio(*sample.audio));
  if (params.decode_seed) body["seed"] = *params.decode_seed;
  return body;
}

std::string RemoteBackend::generate(const MultimodalInput& sample,
                                    const GenerationParams& params) const {
  params.validate();
  const auto reply = endpoint_.post_json("/v1/generate", request_body(sample, params));
  if (!reply.is_object() || !reply.contains("text") || !reply["text"].is_string()) {
    throw ProtocolError("POST /v1/generate: reply lacks string field \"text\"");
  }
  return reply["text"].get<std::string>();
}

HealthStatus RemoteBackend::health() const {
  const auto reply = endpoint_.get_json("/v1/health");
  if (!reply.is_object() || !reply.contains("status") ||
      !reply["status"].is_string() || !reply.contains("models") ||
      !reply["models"].is_array()) {
    throw ProtocolError("GET /v1/health: malformed reply");
  }
  HealthStatus status{reply["status"].get<std::string>(), {}};
  for (const auto& m : reply["models"]) {
    if (!m.is_string()) throw ProtocolError("GET /v1/health: non-string model id");
    status.models.push_back(m.get<std::string>());
  }
  return status;
}

PartialFailure::PartialFailure(std::vector<SampleFailure> failures,
                               std::vector<CandidateResponse> succeeded)
    : Error(ErrorCode::kPartialFailure,
            fmt::format("{} sample(s) failed after retries; first: {}",
                        failures.size(),
                        failures.empty() ? std::string() : failures.front().reason)),
      failures_(std::move(failures)),
      succeeded_(std::move(succeeded)) {}

std::vector<std::size_t> PartialFailure::failed_indices() const {
  std::vector<std::size_t> out;
  for (const auto& f : failures_) out.push_back(f.candidate_index);
  return out;
}

namespace {

bool retryable(const Error& e) {
  switch (e.code()) {
    case ErrorCode::kBackendUnavailable:
    case ErrorCode::kBackendError:
    case ErrorCode::kProtocolError:
      return true;
    default:
      return false;
  }
}

struct Attempt {
  std::optional<std::string> text;
  std::string reason;
  std::size_t retries = 0;
  std::chrono::milliseconds latency{0};
};

Attempt attempt_with_retry(const Backend& backend, const MultimodalInput& sample,
                           const GenerationParams& params,
                           const RetryPolicy& retry) {
  Attempt out;
  auto backoff = retry.base_backoff;
  for (std::size_t attempt = 0;; ++attempt) {
    const auto start = std::chrono::steady_clock::now();
    try {
      out.text = backend.generate(sample, params);
      out.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
          std::chrono::steady_clock::now() - start);
      out.retries = attempt;
      return out;
    } catch (const Error& e) {
      out.reason = e.what();
      out.retries = attempt;
      if (!retryable(e) || attempt >= retry.max_retries) return out;
      spdlog::debug("generate failed ({}), retrying in {} ms", e.what(),
                    backoff.count());
    } catch (const std::exception& e) {
      out.reason = e.what();
      out.retries = attempt;
      return out;
    }
    std::this_thread::sleep_for(backoff);
    backoff *= 2;
  }
}

}  // namespace

CandidateResponse generate_with_retry(const Backend& backend,
                                      const MultimodalInput& sample,
                                      const GenerationParams& params,
                                      const RetryPolicy& retry) {
  Attempt a = attempt_with_retry(backend, sample, params, retry);
  if (!a.text) throw PartialFailure({{0, a.reason}}, {});
  return CandidateResponse{std::move(*a.text), 0, false, a.latency, a.retries};
}

std::vector<CandidateResponse> generate_batch(const Backend& backend,
                                              const PerturbedBatch& batch,
                                              const GenerationParams& params,
                                              std::size_t parallelism,
                                              const RetryPolicy& retry) {
  if (parallelism < 1) throw InvalidArgument("generate_batch: parallelism must be >= 1");
  params.validate();

  const std::size_t n = batch.size();
  std::vector<Attempt> attempts(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      attempts[i] = attempt_with_retry(backend, batch.samples[i], params, retry);
    }
  };

  const std::size_t threads = std::min(parallelism, n);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  std::vector<CandidateResponse> ok;
  std::vector<SampleFailure> failed;
  ok.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& a = attempts[i];
    if (a.text) {
      ok.push_back({std::move(*a.text), i, batch.perturbed(i), a.latency, a.retries});
    } else {
      failed.push_back({i, std::move(a.reason)});
    }
  }
  if (!failed.empty()) throw PartialFailure(std::move(failed), std::move(ok));
  return ok;
}

}  // namespace smoothguard
