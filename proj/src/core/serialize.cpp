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

#include "core/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace gtfc {

namespace {

constexpr char kMagic[4] = {'G', 'T', 'F', '1'};
constexpr std::uint32_t kMaxRank = 16;

template <class U>
void put_le(std::vector<std::uint8_t>& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
}

template <class U>
U get_le(const std::vector<std::uint8_t>& in, std::size_t& pos) {
  if (pos + sizeof(U) > in.size()) {
    throw Error(ErrorCode::kFormat, "truncated GTF1 data");
  }
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= U(in[pos + i]) << (8 * i);
  pos += sizeof(U);
  return v;
}

}  // namespace

Real round_to_f32(Real v) { return static_cast<Real>(static_cast<float>(v)); }

std::vector<std::uint8_t> encode_gtf1(const Tensor& t) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
  for (auto e : t.shape()) put_le<std::uint64_t>(out, e);
  out.reserve(out.size() + 4 * t.numel());
  for (Real v : t.data()) {
    put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  return out;
}

Tensor decode_gtf1(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw Error(ErrorCode::kFormat, "missing GTF1 magic");
  }
  std::size_t pos = 4;
  const auto rank = get_le<std::uint32_t>(bytes, pos);
  if (rank > kMaxRank) {
    throw Error(ErrorCode::kFormat, "implausible GTF1 rank " + std::to_string(rank));
  }
  Shape shape(rank);
  for (auto& e : shape) e = static_cast<std::size_t>(get_le<std::uint64_t>(bytes, pos));
  const std::size_t n = shape_numel(shape);
  if (bytes.size() - pos != 4 * n) {
    throw Error(ErrorCode::kFormat, "GTF1 payload holds " +
                                        std::to_string(bytes.size() - pos) +
                                        " bytes, shape " + shape_string(shape) +
                                        " needs " + std::to_string(4 * n));
  }
  std::vector<Real> values(n);
  for (auto& v : values) v = std::bit_cast<float>(get_le<std::uint32_t>(bytes, pos));
  return Tensor::from(shape, std::move(values));
}

void write_gtf1(const Tensor& t, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto bytes = encode_gtf1(t);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  os.write(reinterpret_cast<const char*>(bytes.data()),
           static_cast<std::streamsize>(bytes.size()));
  if (!os) throw Error(ErrorCode::kIo, "cannot write " + path.string());
}

Tensor read_gtf1(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)),
                                  std::istreambuf_iterator<char>());
  try {
    return decode_gtf1(bytes);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

}  // namespace gtfc
