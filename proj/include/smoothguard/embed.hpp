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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "smoothguard/backends.hpp"
#include "smoothguard/http.hpp"

namespace smoothguard {

/// Dense embedding with its L2 norm cached at construction.
class EmbeddingVector {
 public:
  EmbeddingVector() = default;
  explicit EmbeddingVector(std::vector<double> values);

  std::size_t dim() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  double norm() const noexcept { return norm_; }
  double operator[](std::size_t i) const { return values_[i]; }

  /// Throws ZeroVector for an all-zero vector.
  EmbeddingVector normalized() const;

  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;

 private:
  std::vector<double> values_;
  double norm_ = 0.0;
};

/// Throws DimensionMismatch or ZeroVector.
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

class Embedder {
 public:
  virtual ~Embedder() = default;
  /// Raw provider output, one vector per text; normalization and checks
  /// happen in embed_texts.
  virtual std::vector<EmbeddingVector> embed(std::span<const std::string> texts) const = 0;
  virtual std::string name() const = 0;
};

inline constexpr std::size_t kTestEmbeddingDim = 64;

/// Hashed character-trigram counts over the UTF-8 bytes of "\x02" + text +
/// "\x03" (so short strings still produce trigrams). Trigram t increments
/// bucket fnv1a64(t) % 64. Returned L2-normalized.
EmbeddingVector test_embedder(std::string_view text);

/// Bucket a trigram lands in; exposed so tests can build orthogonal pairs.
std::size_t trigram_bucket(std::string_view trigram);

class TestEmbedder final : public Embedder {
 public:
  std::vector<EmbeddingVector> embed(std::span<const std::string> texts) const override;
  std::string name() const override { return "test-trigram64"; }
};

/// Client for POST /v1/embed.
class RemoteEmbedder final : public Embedder {
 public:
  explicit RemoteEmbedder(EndpointConfig config);
  std::vector<EmbeddingVector> embed(std::span<const std::string> texts) const override;
  std::string name() const override { return "remote"; }

 private:
  HttpEndpoint endpoint_;
};

/// Embeds and L2-normalizes. Throws EmptyText for an empty list or a blank
/// text, ZeroVector for an all-zero embedding, DimensionMismatch when the
/// provider returns ragged or miscounted output.
std::vector<EmbeddingVector> embed_texts(const Embedder& embedder,
                                         std::span<const std::string> texts);

inline constexpr std::string_view kEmptyToken = "[EMPTY]";

/// Candidate texts ready for embedding: blank ones replaced by kEmptyToken.
struct PreparedTexts {
  std::vector<std::string> texts;
  std::vector<bool> empty;
};

PreparedTexts prepare_texts(std::span<const CandidateResponse> candidates);

bool is_blank(std::string_view text);

}  // namespace smoothguard
