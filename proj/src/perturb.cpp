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

#include "smoothguard/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "smoothguard/error.hpp"

namespace smoothguard {

void NoiseConfig::validate() const {
  if (!(sigma_img >= 0.0) || !(sigma_audio >= 0.0)) {
    throw InvalidArgument("noise: sigma must be >= 0");
  }
}

std::vector<double> gaussian_noise(std::size_t count, double sigma,
                                   std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw InvalidArgument("noise: sigma must be >= 0");
  std::vector<double> out(count, 0.0);
  if (sigma == 0.0) return out;

  constexpr double kTwoPow53 = 0x1.0p-53;
  for (std::size_t j = 0; 2 * j < count; ++j) {
    const std::uint64_t w1 = stream_word(seed, 2 * j);
    const std::uint64_t w2 = stream_word(seed, 2 * j + 1);
    const double u1 = static_cast<double>((w1 >> 11) + 1) * kTwoPow53;
    const double u2 = static_cast<double>(w2 >> 11) * kTwoPow53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    out[2 * j] = sigma * r * std::cos(theta);
    if (2 * j + 1 < count) out[2 * j + 1] = sigma * r * std::sin(theta);
  }
  return out;
}

ImageTensor perturb_image(const ImageTensor& image, double sigma,
                          std::uint64_t seed) {
  if (sigma == 0.0) return image;
  const auto noise = gaussian_noise(image.size(), sigma, seed);
  const auto src = image.data();
  std::vector<float> out(src.size());
  for (std::size_t k = 0; k < src.size(); ++k) {
    out[k] = static_cast<float>(
        std::clamp(static_cast<double>(src[k]) + noise[k], 0.0, 1.0));
  }
  return ImageTensor(image.height(), image.width(), image.channels(),
                     std::move(out));
}

AudioWave perturb_audio(const AudioWave& wave, double sigma,
                        std::uint64_t seed) {
  if (sigma == 0.0) return wave;
  const auto noise = gaussian_noise(wave.size(), sigma, seed);
  const auto src = wave.samples();
  std::vector<float> out(src.size());
  for (std::size_t k = 0; k < src.size(); ++k) {
    out[k] = static_cast<float>(
        std::clamp(static_cast<double>(src[k]) + noise[k], -1.0, 1.0));
  }
  return AudioWave(wave.sample_rate(), std::move(out));
}

PerturbedBatch make_batch(const MultimodalInput& input,
                          const NoiseConfig& config) {
  input.validate();
  config.validate();

  PerturbedBatch batch;
  batch.config = config;
  batch.clean_index = config.num_noisy;
  batch.samples.reserve(config.num_noisy + 1);
  batch.seeds.reserve(config.num_noisy + 1);

  for (std::size_t i = 0; i < config.num_noisy; ++i) {
    const std::uint64_t seed = derive_seed(config.master_seed, i);
    MultimodalInput noisy{input.item_id, input.prompt, std::nullopt,
                          std::nullopt};
    if (input.image) {
      noisy.image = perturb_image(*input.image, config.sigma_img,
                                  derive_seed(seed, kImageStream));
    }
    if (input.audio) {
      noisy.audio = perturb_audio(*input.audio, config.sigma_audio,
                                  derive_seed(seed, kAudioStream));
    }
    batch.samples.push_back(std::move(noisy));
    batch.seeds.push_back(seed);
  }
  batch.samples.push_back(input);
  batch.seeds.push_back(derive_seed(config.master_seed, config.num_noisy));
  return batch;
}

}  // namespace smoothguard
