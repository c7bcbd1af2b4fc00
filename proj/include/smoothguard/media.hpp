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
#include <vector>

#include "smoothguard/digest.hpp"

namespace smoothguard {

using Bytes = std::vector<std::uint8_t>;

/// Decoded image. Row-major, interleaved channels, values in [0, 1].
/// Immutable; the constructor enforces every invariant.
class ImageTensor {
 public:
  ImageTensor(std::size_t height, std::size_t width, std::size_t channels,
              std::vector<float> data);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t channels() const noexcept { return channels_; }
  std::size_t size() const noexcept { return data_.size(); }
  std::span<const float> data() const noexcept { return data_; }

  float at(std::size_t y, std::size_t x, std::size_t c) const {
    return data_[(y * width_ + x) * channels_ + c];
  }

  friend bool operator==(const ImageTensor&, const ImageTensor&) = default;

 private:
  std::size_t height_;
  std::size_t width_;
  std::size_t channels_;
  std::vector<float> data_;
};

/// Mono waveform, samples in [-1, 1].
class AudioWave {
 public:
  AudioWave(std::uint32_t sample_rate, std::vector<float> samples);

  std::uint32_t sample_rate() const noexcept { return sample_rate_; }
  std::size_t size() const noexcept { return samples_.size(); }
  std::span<const float> samples() const noexcept { return samples_; }

  friend bool operator==(const AudioWave&, const AudioWave&) = default;

 private:
  std::uint32_t sample_rate_;
  std::vector<float> samples_;
};

/// One query. Text-only inputs are allowed; they pass through the defense
/// unmodified.
struct MultimodalInput {
  std::string item_id;
  std::string prompt;
  std::optional<ImageTensor> image;
  std::optional<AudioWave> audio;

  /// Throws InvalidArgument when the prompt is empty.
  void validate() const;

  friend bool operator==(const MultimodalInput&,
                         const MultimodalInput&) = default;
};

// Codecs. Images: PNG and JPEG in, PNG out. Audio: PCM-16 WAV both ways.

ImageTensor decode_image(std::span<const std::uint8_t> bytes);
Bytes encode_image(const ImageTensor& image);
AudioWave decode_audio(std::span<const std::uint8_t> bytes);
Bytes encode_audio(const AudioWave& wave);

/// Reads a whole file; throws IoError naming the path.
Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path,
                std::span<const std::uint8_t> bytes);

ImageTensor load_image(const std::filesystem::path& path);
AudioWave load_audio(const std::filesystem::path& path);

// Content digests over the exact float payload, so a perturbed copy never
// collides with its source.
Sha256 digest(const ImageTensor& image);
Sha256 digest(const AudioWave& wave);
/// Digest of the media only (prompt excluded); all-zero for text-only input.
Sha256 media_digest(const MultimodalInput& input);
/// Digest of prompt and media together.
Sha256 content_digest(const MultimodalInput& input);

}  // namespace smoothguard
