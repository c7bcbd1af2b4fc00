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

#include "smoothguard/media.hpp"

#include <jpeglib.h>
#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstring>
#include <fstream>
#include <iterator>

#include "smoothguard/error.hpp"

namespace smoothguard {

ImageTensor::ImageTensor(std::size_t height, std::size_t width,
                         std::size_t channels, std::vector<float> data)
    : height_(height), width_(width), channels_(channels),
      data_(std::move(data)) {
  if (height_ < 1 || width_ < 1) {
    throw InvalidArgument("image: height and width must be >= 1");
  }
  if (channels_ != 1 && channels_ != 3) {
    throw InvalidArgument("image: channels must be 1 or 3");
  }
  if (data_.size() != height_ * width_ * channels_) {
    throw InvalidArgument("image: data length != height * width * channels");
  }
  for (float v : data_) {
    if (!(v >= 0.0f && v <= 1.0f)) {
      throw InvalidArgument("image: element outside [0, 1]");
    }
  }
}

AudioWave::AudioWave(std::uint32_t sample_rate, std::vector<float> samples)
    : sample_rate_(sample_rate), samples_(std::move(samples)) {
  if (sample_rate_ == 0) throw InvalidArgument("audio: sample_rate must be > 0");
  for (float v : samples_) {
    if (!(v >= -1.0f && v <= 1.0f)) {
      throw InvalidArgument("audio: sample outside [-1, 1]");
    }
  }
}

void MultimodalInput::validate() const {
  if (prompt.empty()) throw InvalidArgument("input: prompt must be non-empty");
}

namespace {

constexpr std::uint8_t kPngSignature[8] = {0x89, 'P', 'N', 'G',
                                           '\r', '\n', 0x1A, '\n'};

bool is_png(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= 8 && std::memcmp(bytes.data(), kPngSignature, 8) == 0;
}

bool is_jpeg(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 &&
         bytes[2] == 0xFF;
}

std::vector<float> scale_bytes(std::span<const std::uint8_t> raw) {
  std::vector<float> out(raw.size());
  std::transform(raw.begin(), raw.end(), out.begin(),
                 [](std::uint8_t v) { return static_cast<float>(v) / 255.0f; });
  return out;
}

ImageTensor decode_png(std::span<const std::uint8_t> bytes) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    std::string msg = image.message;
    png_image_free(&image);
    throw DecodeError("png: " + msg);
  }
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> raw(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, raw.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw DecodeError("png: " + msg);
  }
  return ImageTensor(image.height, image.width, color ? 3 : 1,
                     scale_bytes(raw));
}

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

struct JpegOutput {
  std::vector<std::uint8_t> raw;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
};

// setjmp lives here, in a frame that owns no C++ objects.
bool run_jpeg_decode(std::span<const std::uint8_t> bytes, JpegOutput& out,
                     JpegErrorManager& err) {
  jpeg_decompress_struct cinfo{};
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    return false;
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space =
      cinfo.jpeg_color_space == JCS_GRAYSCALE ? JCS_GRAYSCALE : JCS_RGB;
  jpeg_start_decompress(&cinfo);
  out.height = cinfo.output_height;
  out.width = cinfo.output_width;
  out.channels = static_cast<std::size_t>(cinfo.output_components);
  const std::size_t stride = out.width * out.channels;
  out.raw.resize(stride * out.height);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = out.raw.data() + stride * cinfo.output_scanline;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return true;
}

ImageTensor decode_jpeg(std::span<const std::uint8_t> bytes) {
  JpegOutput out;
  JpegErrorManager err{};
  if (!run_jpeg_decode(bytes, out, err)) {
    throw DecodeError(std::string("jpeg: ") + err.message);
  }
  return ImageTensor(out.height, out.width, out.channels, scale_bytes(out.raw));
}

std::uint16_t read_u16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

std::uint32_t read_u32(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) |
         (static_cast<std::uint32_t>(b[at + 1]) << 8) |
         (static_cast<std::uint32_t>(b[at + 2]) << 16) |
         (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

void put_u16(Bytes& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(Bytes& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_tag(Bytes& out, const char* tag) { out.insert(out.end(), tag, tag + 4); }

constexpr std::uint16_t kWaveFormatPcm = 1;
constexpr std::uint16_t kWaveFormatExtensible = 0xFFFE;

}  // namespace

ImageTensor decode_image(std::span<const std::uint8_t> bytes) {
  if (is_png(bytes)) return decode_png(bytes);
  if (is_jpeg(bytes)) return decode_jpeg(bytes);
  throw UnsupportedFormat("image: only PNG and JPEG streams are supported");
}

Bytes encode_image(const ImageTensor& image) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width());
  png.height = static_cast<png_uint_32>(image.height());
  png.format = image.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;

  std::vector<std::uint8_t> raw(image.size());
  std::transform(image.data().begin(), image.data().end(), raw.begin(),
                 [](float v) {
                   return static_cast<std::uint8_t>(std::lround(v * 255.0f));
                 });

  png_alloc_size_t size = 0;
  if (!png_image_write_get_memory_size(png, size, 0, raw.data(), 0, nullptr)) {
    throw std::runtime_error(std::string("png encode: ") + png.message);
  }
  Bytes out(size);
  if (!png_image_write_to_memory(&png, out.data(), &size, 0, raw.data(), 0,
                                 nullptr)) {
    throw std::runtime_error(std::string("png encode: ") + png.message);
  }
  out.resize(size);
  return out;
}

AudioWave decode_audio(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw DecodeError("wav: missing RIFF/WAVE header");
  }
  std::optional<std::uint16_t> format;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits = 0;
  std::optional<std::span<const std::uint8_t>> data;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const auto* tag = bytes.data() + pos;
    const std::uint32_t len = read_u32(bytes, pos + 4);
    const std::size_t body = pos + 8;
    if (len > bytes.size() - body) {
      throw DecodeError("wav: chunk runs past end of stream");
    }
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      if (len < 16) throw DecodeError("wav: fmt chunk too short");
      format = read_u16(bytes, body);
      channels = read_u16(bytes, body + 2);
      sample_rate = read_u32(bytes, body + 4);
      bits = read_u16(bytes, body + 14);
      if (*format == kWaveFormatExtensible) {
        if (len < 40) throw DecodeError("wav: extensible fmt chunk too short");
        format = read_u16(bytes, body + 24);  // sub-format GUID prefix
      }
    } else if (std::memcmp(tag, "data", 4) == 0) {
      data = bytes.subspan(body, len);
    }
    pos = body + len + (len & 1u);  // chunks are word aligned
  }

  if (!format || !data) throw DecodeError("wav: missing fmt or data chunk");
  if (*format != kWaveFormatPcm || bits != 16) {
    throw UnsupportedFormat("wav: only 16-bit PCM is supported");
  }
  if (channels == 0) throw DecodeError("wav: zero channels");
  if (sample_rate == 0) throw DecodeError("wav: zero sample rate");

  const std::size_t frame_bytes = 2u * channels;
  const std::size_t frames = data->size() / frame_bytes;
  std::vector<float> samples(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    double sum = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      sum += static_cast<std::int16_t>(read_u16(*data, f * frame_bytes + 2 * c));
    }
    const double v = sum / channels / 32768.0;
    samples[f] = static_cast<float>(std::clamp(v, -1.0, 1.0));
  }
  return AudioWave(sample_rate, std::move(samples));
}

Bytes encode_audio(const AudioWave& wave) {
  const auto data_len = static_cast<std::uint32_t>(wave.size() * 2);
  Bytes out;
  out.reserve(44 + data_len);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_len);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, kWaveFormatPcm);
  put_u16(out, 1);
  put_u32(out, wave.sample_rate());
  put_u32(out, wave.sample_rate() * 2);  // byte rate
  put_u16(out, 2);                       // block align
  put_u16(out, 16);
  put_tag(out, "data");
  put_u32(out, data_len);
  for (float s : wave.samples()) {
    const long q = std::clamp(std::lround(static_cast<double>(s) * 32768.0),
                              -32768L, 32767L);
    put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
  return out;
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path,
                std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

ImageTensor load_image(const std::filesystem::path& path) {
  return decode_image(read_file(path));
}

AudioWave load_audio(const std::filesystem::path& path) {
  return decode_audio(read_file(path));
}

namespace {

std::span<const std::uint8_t> float_bytes(std::span<const float> values) {
  return {reinterpret_cast<const std::uint8_t*>(values.data()),
          values.size_bytes()};
}

}  // namespace

Sha256 digest(const ImageTensor& image) {
  return Sha256Builder()
      .update("image")
      .update_u64(image.height())
      .update_u64(image.width())
      .update_u64(image.channels())
      .update(float_bytes(image.data()))
      .finish();
}

Sha256 digest(const AudioWave& wave) {
  return Sha256Builder()
      .update("audio")
      .update_u64(wave.sample_rate())
      .update(float_bytes(wave.samples()))
      .finish();
}

Sha256 media_digest(const MultimodalInput& input) {
  if (!input.image && !input.audio) return Sha256{};
  Sha256Builder b;
  b.update(input.image ? std::span<const std::uint8_t>(digest(*input.image))
                       : std::span<const std::uint8_t>());
  b.update("|");
  b.update(input.audio ? std::span<const std::uint8_t>(digest(*input.audio))
                       : std::span<const std::uint8_t>());
  return b.finish();
}

Sha256 content_digest(const MultimodalInput& input) {
  const Sha256 media = media_digest(input);
  return Sha256Builder()
      .update_u64(input.prompt.size())
      .update(input.prompt)
      .update(media)
      .finish();
}

}  // namespace smoothguard
