// Copyright 2026 The emocurate Authors. All Rights Reserved.
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

#include "emocurate/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "emocurate/error.hpp"
#include "emocurate/util.hpp"

namespace emocurate {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
}
std::uint32_t get_u32(const std::uint8_t* p) {
  return p[0] | (p[1] << 8) | (p[2] << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
std::uint16_t get_u16(const std::uint8_t* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }

}  // namespace

std::string encode_wav_pcm16(std::span<const double> mono, int sample_rate) {
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(mono.size() * 2);
  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  put_u32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  put_u32(out, 16);
  put_u16(out, 1);  // PCM
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(sample_rate));
  put_u32(out, static_cast<std::uint32_t>(sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out += "data";
  put_u32(out, data_bytes);
  for (double x : mono) {
    double c = std::clamp(x, -1.0, 1.0);
    auto s = static_cast<std::int16_t>(std::lround(c * 32767.0));
    put_u16(out, static_cast<std::uint16_t>(s));
  }
  return out;
}

WavData decode_wav(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw Error(ErrorKind::kParse, "not a RIFF/WAVE file");
  }
  std::size_t pos = 12;
  int format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = bytes.data() + pos;
    std::uint32_t size = get_u32(chunk + 4);
    std::size_t body = pos + 8;
    if (body + size > bytes.size()) throw Error(ErrorKind::kParse, "truncated WAVE chunk");
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) throw Error(ErrorKind::kParse, "short fmt chunk");
      format = get_u16(bytes.data() + body);
      channels = get_u16(bytes.data() + body + 2);
      rate = get_u32(bytes.data() + body + 4);
      bits = get_u16(bytes.data() + body + 14);
      if (format == 0xFFFE && size >= 26) format = get_u16(bytes.data() + body + 24);
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) throw Error(ErrorKind::kParse, "data chunk before fmt chunk");
      if (channels <= 0 || rate == 0) throw Error(ErrorKind::kMissingStream, "WAVE without audio");
      WavData w;
      w.sample_rate = static_cast<int>(rate);
      w.channels = channels;
      const std::uint8_t* d = bytes.data() + body;
      if (format == 1 && bits == 16) {
        for (std::size_t i = 0; i + 1 < size; i += 2) {
          auto s = static_cast<std::int16_t>(get_u16(d + i));
          w.samples.push_back(s / 32768.0);
        }
      } else if (format == 1 && bits == 24) {
        for (std::size_t i = 0; i + 2 < size; i += 3) {
          std::int32_t s = d[i] | (d[i + 1] << 8) | (d[i + 2] << 16);
          if (s & 0x800000) s |= ~0xFFFFFF;
          w.samples.push_back(s / 8388608.0);
        }
      } else if (format == 1 && bits == 32) {
        for (std::size_t i = 0; i + 3 < size; i += 4) {
          w.samples.push_back(static_cast<std::int32_t>(get_u32(d + i)) / 2147483648.0);
        }
      } else if (format == 3 && bits == 32) {
        for (std::size_t i = 0; i + 3 < size; i += 4) {
          float f;
          std::uint32_t u = get_u32(d + i);
          std::memcpy(&f, &u, 4);
          w.samples.push_back(f);
        }
      } else {
        throw Error(ErrorKind::kParse, "unsupported WAVE encoding (format " + std::to_string(format) +
                                           ", " + std::to_string(bits) + " bits)");
      }
      return w;
    }
    pos = body + size + (size & 1);
  }
  throw Error(ErrorKind::kMissingStream, "WAVE file has no data chunk");
}

WavData read_wav(const std::filesystem::path& path) {
  auto bytes = read_binary_file(path);
  try {
    return decode_wav(bytes);
  } catch (const Error& e) {
    throw Error(e.kind(), e.what(), path.string());
  }
}

void write_wav(const std::filesystem::path& path, std::span<const double> mono, int sample_rate) {
  write_file_atomic(path, encode_wav_pcm16(mono, sample_rate));
}

}  // namespace emocurate
