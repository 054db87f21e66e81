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

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "core/tensor.hpp"

namespace gtfc {

// "GTF1" layout: magic, u32 rank, rank x u64 extents, row-major f32 values.
// Every integer and float is little-endian regardless of host order.
std::vector<std::uint8_t> encode_gtf1(const Tensor& t);
Tensor decode_gtf1(const std::vector<std::uint8_t>& bytes);

void write_gtf1(const Tensor& t, const std::filesystem::path& path);
Tensor read_gtf1(const std::filesystem::path& path);

// Rounds through f32, matching what a GTF1 round trip stores.
Real round_to_f32(Real v);

}  // namespace gtfc
