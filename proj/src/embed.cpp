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

#include "smoothguard/embed.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include <fmt/format.h>

namespace smoothguard {

EmbeddingVector::EmbeddingVector(std::vector<double> values)
    : values_(std::move(values)) {
  double sum = 0.0;
  for (double v : values_) sum += v * v;
  norm_ = std::sqrt(sum);
}

EmbeddingVector EmbeddingVector::normalized() const {
  if (norm_ == 0.0) throw ZeroVector("embedding: zero vector cannot be normalized");
  std::vector<double> out(values_);
  for (double& v : out) v /= norm_;
  return EmbeddingVector(std::move(out));
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim()) {
    throw DimensionMismatch(fmt::format("cosine: dims {} vs {}", a.dim(), b.dim()));
  }
  if (a.norm() == 0.0 || b.norm() == 0.0) throw ZeroVector("cosine: zero vector");
  double dot = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) dot += a[i] * b[i];
  return std::clamp(dot / (a.norm() * b.norm()), -1.0, 1.0);
}

std::size_t trigram_bucket(std::string_view trigram) {
  return static_cast<std::size_t>(fnv1a64(trigram) % kTestEmbeddingDim);
}

EmbeddingVector test_embedder(std::string_view text) {
  std::string padded;
  padded.reserve(text.size() + 2);
  padded.push_back('\x02');
  padded.append(text);
  padded.push_back('\x03');

  std::vector<double> counts(kTestEmbeddingDim, 0.0);
  for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
    counts[trigram_bucket(std::string_view(padded).substr(i, 3))] += 1.0;
  }
  return EmbeddingVector(std::move(counts)).normalized();
}

std::vector<EmbeddingVector> TestEmbedder::embed(std::span<const std::string> texts) const {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(test_embedder(t));
  return out;
}

RemoteEmbedder::RemoteEmbedder(EndpointConfig config) : endpoint_(std::move(config)) {}

std::vector<EmbeddingVector> RemoteEmbedder::embed(std::span<const std::string> texts) const {
  nlohmann::json body = {{"texts", nlohmann::json::array()}};
  for (const auto& t : texts) body["texts"].push_back(t);
  const auto reply = endpoint_.post_json("/v1/embed", body);

  if (!reply.is_object() || !reply.contains("dim") ||
      !reply["dim"].is_number_integer() || !reply.contains("embeddings") ||
      !reply["embeddings"].is_array()) {
    throw ProtocolError("POST /v1/embed: reply lacks \"dim\" or \"embeddings\"");
  }
  const auto dim = reply["dim"].get<std::size_t>();
  std::vector<EmbeddingVector> out;
  for (const auto& row : reply["embeddings"]) {
    if (!row.is_array() || row.size() != dim) {
      throw ProtocolError(fmt::format("POST /v1/embed: row length != dim {}", dim));
    }
    std::vector<double> values;
    values.reserve(dim);
    for (const auto& v : row) {
      if (!v.is_number()) throw ProtocolError("POST /v1/embed: non-numeric entry");
      values.push_back(v.get<double>());
    }
    out.emplace_back(std::move(values));
  }
  return out;
}

bool is_blank(std::string_view text) {
  return std::all_of(text.begin(), text.end(),
                     [](unsigned char c) { return std::isspace(c) != 0; });
}

std::vector<EmbeddingVector> embed_texts(const Embedder& embedder,
                                         std::span<const std::string> texts) {
  if (texts.empty()) throw EmptyText("embed: no texts given");
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (is_blank(texts[i])) throw EmptyText(fmt::format("embed: text {} is blank", i));
  }
  auto raw = embedder.embed(texts);
  if (raw.size() != texts.size()) {
    throw DimensionMismatch(fmt::format("embed: {} vectors for {} texts",
                                        raw.size(), texts.size()));
  }
  std::vector<EmbeddingVector> out;
  out.reserve(raw.size());
  for (const auto& v : raw) {
    if (v.dim() == 0 || v.dim() != raw.front().dim()) {
      throw DimensionMismatch("embed: inconsistent embedding dimensions");
    }
    out.push_back(v.normalized());
  }
  return out;
}

PreparedTexts prepare_texts(std::span<const CandidateResponse> candidates) {
  PreparedTexts out;
  for (const auto& c : candidates) {
    const bool blank = is_blank(c.text);
    out.texts.push_back(blank ? std::string(kEmptyToken) : c.text);
    out.empty.push_back(blank);
  }
  return out;
}

}  // namespace smoothguard
