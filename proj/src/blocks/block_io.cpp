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

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "blocks/blocks.hpp"
#include "core/serialize.hpp"

namespace gtfc::blocks {

namespace {

std::string real_text(Real v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::map<std::string, std::string> parse_pairs(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find('=');
    if (line.empty() || line[0] == '#' || eq == std::string::npos) continue;
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

}  // namespace

std::string config_to_text(const GtfcConfig& c) {
  std::ostringstream os;
  os << "p=" << real_text(c.p) << '\n'
     << "groups=" << c.groups << '\n'
     << "gate=" << gate_op_name(c.gate) << '\n'
     << "rho_init=" << real_text(c.rho_init) << '\n'
     << "tau_init=" << real_text(c.tau_init) << '\n'
     << "attn_hidden=" << c.attn_hidden << '\n'
     << "epsilon=" << real_text(c.epsilon) << '\n'
     << "per_group_we=" << (c.per_group_we ? 1 : 0) << '\n'
     << "se_reduction=" << c.se_reduction << '\n';
  return os.str();
}

GtfcConfig config_from_text(const std::string& text) {
  const auto kv = parse_pairs(text);
  GtfcConfig c;
  try {
    for (const auto& [key, value] : kv) {
      if (key == "p") c.p = std::stod(value);
      else if (key == "groups") c.groups = std::stoul(value);
      else if (key == "gate") c.gate = parse_gate_op(value);
      else if (key == "rho_init") c.rho_init = std::stod(value);
      else if (key == "tau_init") c.tau_init = std::stod(value);
      else if (key == "attn_hidden") c.attn_hidden = std::stoul(value);
      else if (key == "epsilon") c.epsilon = std::stod(value);
      else if (key == "per_group_we") c.per_group_we = value == "1";
      else if (key == "se_reduction") c.se_reduction = std::stoul(value);
    }
  } catch (const std::logic_error& e) {
    throw Error(ErrorCode::kFormat, std::string("bad block config value: ") + e.what());
  }
  return c;
}

void Block::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  std::ofstream os(dir / "manifest.txt", std::ios::trunc);
  os << "kind=" << block_kind_name(kind_) << '\n' << "channels=" << channels_ << '\n';
  os << config_to_text(config_);
  for (const auto& p : params()) {
    write_gtf1(p.tensor, dir / (p.name + ".gtf"));
    os << "param=" << p.name << ' ' << shape_string(p.tensor.shape()) << '\n';
  }
  if (!os) throw Error(ErrorCode::kIo, "cannot write " + (dir / "manifest.txt").string());
}

Block Block::load(const std::filesystem::path& dir) {
  std::ifstream is(dir / "manifest.txt");
  if (!is) throw Error(ErrorCode::kIo, "cannot read " + (dir / "manifest.txt").string());
  std::stringstream buf;
  buf << is.rdbuf();
  const auto kv = parse_pairs(buf.str());
  if (!kv.count("kind") || !kv.count("channels")) {
    throw Error(ErrorCode::kFormat, dir.string() + ": manifest lacks kind/channels");
  }
  std::mt19937_64 unused(0);
  Block b(parse_block_kind(kv.at("kind")), std::stoul(kv.at("channels")),
          config_from_text(buf.str()), unused);
  for (auto& p : b.params()) {
    const Tensor stored = read_gtf1(dir / (p.name + ".gtf"));
    if (stored.shape() != p.tensor.shape()) {
      throw Error(ErrorCode::kShapeMismatch, dir.string() + "/" + p.name + " has shape " +
                                                 shape_string(stored.shape()));
    }
    auto dst = p.tensor.mutable_data();
    std::copy(stored.data().begin(), stored.data().end(), dst.begin());
  }
  return b;
}

}  // namespace gtfc::blocks
