// Copyright 2026 The GTFC Authors
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

#include "frontend/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace gtfc::frontend {

namespace {

std::uint32_t u32_at(const std::vector<std::uint8_t>& b, std::size_t p) {
  return std::uint32_t(b[p]) | std::uint32_t(b[p + 1]) << 8 |
         std::uint32_t(b[p + 2]) << 16 | std::uint32_t(b[p + 3]) << 24;
}

std::uint16_t u16_at(const std::vector<std::uint8_t>& b, std::size_t p) {
  return static_cast<std::uint16_t>(b[p] | b[p + 1] << 8);
}

void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u16(std::vector<std::uint8_t>& b, std::uint16_t v) {
  b.push_back(static_cast<std::uint8_t>(v));
  b.push_back(static_cast<std::uint8_t>(v >> 8));
}

[[noreturn]] void bad(const std::string& why) {
  throw Error(ErrorCode::kFormat, "WAV: " + why);
}

}  // namespace

WavData decode_wav(const std::vector<std::uint8_t>& b) {
  if (b.size() < 12 || std::memcmp(b.data(), "RIFF", 4) != 0 ||
      std::memcmp(b.data() + 8, "WAVE", 4) != 0) {
    bad("not a RIFF/WAVE file");
  }
  WavData out;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= b.size()) {
    const std::uint32_t size = u32_at(b, pos + 4);
    const std::size_t body = pos + 8;
    if (body + size > b.size()) bad("chunk runs past end of file");
    if (std::memcmp(b.data() + pos, "fmt ", 4) == 0) {
      if (size < 16) bad("fmt chunk too short");
      const std::uint16_t format = u16_at(b, body);
      const std::uint16_t channels = u16_at(b, body + 2);
      const std::uint16_t bits = u16_at(b, body + 14);
      if (format != 1) bad("only PCM (format 1) is supported");
      if (channels != 1) bad(std::to_string(channels) + " channels; mono required");
      if (bits != 16) bad(std::to_string(bits) + "-bit samples; 16-bit required");
      out.sample_rate = static_cast<int>(u32_at(b, body + 4));
      if (out.sample_rate <= 0) bad("invalid sample rate");
      have_fmt = true;
    } else if (std::memcmp(b.data() + pos, "data", 4) == 0) {
      if (!have_fmt) bad("data chunk before fmt chunk");
      if (size % 2) bad("odd data chunk size");
      out.samples.resize(size / 2);
      for (std::size_t i = 0; i < out.samples.size(); ++i) {
        const auto code = static_cast<std::int16_t>(u16_at(b, body + 2 * i));
        out.samples[i] = code / 32768.0;
      }
      return out;
    }
    pos = body + size + (size & 1);
  }
  bad(have_fmt ? "missing data chunk" : "missing fmt chunk");
}

WavData read_wav(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)),
                                  std::istreambuf_iterator<char>());
  try {
    return decode_wav(bytes);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_wav(int sample_rate, const std::vector<Real>& samples) {
  const auto data_bytes = static_cast<std::uint32_t>(2 * samples.size());
  std::vector<std::uint8_t> b;
  b.reserve(44 + data_bytes);
  b.insert(b.end(), {'R', 'I', 'F', 'F'});
  put_u32(b, 36 + data_bytes);
  b.insert(b.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put_u32(b, 16);
  put_u16(b, 1);  // PCM
  put_u16(b, 1);  // mono
  put_u32(b, static_cast<std::uint32_t>(sample_rate));
  put_u32(b, static_cast<std::uint32_t>(sample_rate) * 2);
  put_u16(b, 2);
  put_u16(b, 16);
  b.insert(b.end(), {'d', 'a', 't', 'a'});
  put_u32(b, data_bytes);
  for (Real s : samples) {
    const long code = std::clamp(std::lround(s * 32768.0), -32768L, 32767L);
    put_u16(b, static_cast<std::uint16_t>(static_cast<std::int16_t>(code)));
  }
  return b;
}

void write_wav(const std::filesystem::path& path, int sample_rate,
               const std::vector<Real>& samples) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto bytes = encode_wav(sample_rate, samples);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  os.write(reinterpret_cast<const char*>(bytes.data()),
           static_cast<std::streamsize>(bytes.size()));
  if (!os) throw Error(ErrorCode::kIo, "cannot write " + path.string());
}

}  // namespace gtfc::frontend
