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
#include <vector>

#include "smoothguard/media.hpp"

namespace smoothguard {

inline constexpr double kDefaultSigma = 0.1;
inline constexpr std::size_t kDefaultNumNoisy = 9;

struct NoiseConfig {
  double sigma_img = kDefaultSigma;
  double sigma_audio = kDefaultSigma;
  std::size_t num_noisy = kDefaultNumNoisy;
  std::uint64_t master_seed = 0;

  void validate() const;

  friend bool operator==(const NoiseConfig&, const NoiseConfig&) = default;
};

/// `num_noisy` perturbed copies followed by the clean copy at
/// `clean_index == num_noisy`.
struct PerturbedBatch {
  std::vector<MultimodalInput> samples;
  std::size_t clean_index = 0;
  /// seeds[i] == derive_seed(config.master_seed, i). The clean copy's entry
  /// is recorded for uniformity but never drawn from.
  std::vector<std::uint64_t> seeds;
  NoiseConfig config;

  std::size_t size() const noexcept { return samples.size(); }
  bool perturbed(std::size_t index) const noexcept { return index != clean_index; }
};

// Seeding and the noise stream are fixed algorithms so golden values are
// reproducible from any language:
//
//   mix64(z):  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//              z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//              return z ^ (z >> 31)
//   derive_seed(s, i) = mix64(s ^ (0x9E3779B97F4A7C15 * (i + 1)))
//   word(seed, k)     = mix64(seed + 0x9E3779B97F4A7C15 * (k + 1))
//
// Normal pair j uses words 2j and 2j+1 (Box-Muller):
//   u1 = ((word(2j)   >> 11) + 1) * 2^-53      in (0, 1]
//   u2 =  (word(2j+1) >> 11)      * 2^-53      in [0, 1)
//   r  = sqrt(-2 ln u1)
//   element 2j = sigma * r * cos(2 pi u2), element 2j+1 = sigma * r * sin(2 pi u2)

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master_seed,
                                    std::uint64_t sample_index) noexcept {
  return mix64(master_seed ^ (kGoldenGamma * (sample_index + 1)));
}

constexpr std::uint64_t stream_word(std::uint64_t seed,
                                    std::uint64_t counter) noexcept {
  return mix64(seed + kGoldenGamma * (counter + 1));
}

// Sub-seed offsets within one sample.
inline constexpr std::uint64_t kImageStream = 0;
inline constexpr std::uint64_t kAudioStream = 1;

/// `count` i.i.d. N(0, sigma^2) draws. Throws InvalidArgument for sigma < 0.
std::vector<double> gaussian_noise(std::size_t count, double sigma,
                                   std::uint64_t seed);

/// img + noise, clamped to [0, 1] per element.
ImageTensor perturb_image(const ImageTensor& image, double sigma,
                          std::uint64_t seed);
/// wave + noise, clamped to [-1, 1] per sample.
AudioWave perturb_audio(const AudioWave& wave, double sigma, std::uint64_t seed);

PerturbedBatch make_batch(const MultimodalInput& input,
                          const NoiseConfig& config);

}  // namespace smoothguard
