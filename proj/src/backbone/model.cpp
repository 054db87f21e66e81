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

#include "backbone/model.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "core/serialize.hpp"

namespace gtfc::backbone {

using blocks::BlockKind;

namespace {

Tensor he_conv(std::size_t out, std::size_t in, std::size_t k, std::mt19937_64& rng) {
  return Tensor::randn({out, in, k, k}, rng, std::sqrt(2.0 / Real(in * k * k)), true);
}

std::string join(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::vector<std::size_t> split_list(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoul(item));
  return out;
}

std::size_t conv_extent(std::size_t ext, std::size_t stride) {
  return (ext + 2 - 3) / stride + 1;  // 3x3 kernel, pad 1
}

std::string block_prefix(std::size_t i) { return "res" + std::to_string(i); }

void add_bn(ParamList& out, const std::string& name, const BatchNormState& bn) {
  out.push_back({name + ".gamma", bn.gamma});
  out.push_back({name + ".beta", bn.beta});
}

void add_bn_buffers(ParamList& out, const std::string& name, const BatchNormState& bn) {
  out.push_back({name + ".running_mean", bn.running_mean});
  out.push_back({name + ".running_var", bn.running_var});
}

}  // namespace

InsertPos parse_insert_pos(const std::string& name) {
  if (name == "after_bn") return InsertPos::kAfterBn;
  if (name == "before_bn") return InsertPos::kBeforeBn;
  if (name == "before_conv") return InsertPos::kBeforeConv;
  throw Error(ErrorCode::kConfigError, "unknown insert position '" + name + "'");
}

std::string insert_pos_name(InsertPos pos) {
  switch (pos) {
    case InsertPos::kAfterBn: return "after_bn";
    case InsertPos::kBeforeBn: return "before_bn";
    case InsertPos::kBeforeConv: return "before_conv";
  }
  return "?";
}

std::size_t BasicBlockSpec::block_channels() const {
  return insert_pos == InsertPos::kBeforeConv ? in_channels : out_channels;
}

ModelSpec ModelSpec::desk() { return ModelSpec{}; }

ModelSpec ModelSpec::full() {
  ModelSpec s;
  s.stage_channels = {16, 32, 64, 128};
  s.blocks_per_stage = {3, 4, 6, 3};
  s.embedding_dim = 128;
  return s;
}

void ModelSpec::validate() const {
  if (stage_channels.empty() || stage_channels.size() != blocks_per_stage.size()) {
    throw Error(ErrorCode::kConfigError, "stage_channels and blocks_per_stage must match");
  }
  for (auto c : stage_channels) {
    if (c == 0) throw Error(ErrorCode::kConfigError, "zero-width stage");
  }
  for (auto b : blocks_per_stage) {
    if (b == 0) throw Error(ErrorCode::kConfigError, "empty stage");
  }
  if (embedding_dim == 0 || num_speakers < 2 || input_dim == 0) {
    throw Error(ErrorCode::kConfigError, "need embedding_dim > 0, >= 2 speakers, input_dim > 0");
  }
  block_config.validate();
  if (insert_kind == BlockKind::kTfGtfc) {
    for (const auto& b : residual_blocks()) {
      if (b.block_channels() % block_config.groups != 0) {
        throw Error(ErrorCode::kGroupMismatch,
                    std::to_string(b.block_channels()) + " channels cannot split into " +
                        std::to_string(block_config.groups) + " groups");
      }
    }
  }
}

std::vector<BasicBlockSpec> ModelSpec::residual_blocks() const {
  std::vector<BasicBlockSpec> out;
  std::size_t in = stage_channels.front();
  for (std::size_t s = 0; s < stage_channels.size(); ++s) {
    for (std::size_t b = 0; b < blocks_per_stage[s]; ++b) {
      BasicBlockSpec spec;
      spec.in_channels = in;
      spec.out_channels = stage_channels[s];
      spec.stride = (s > 0 && b == 0) ? 2 : 1;
      spec.insert_kind = insert_kind;
      spec.insert_pos = insert_pos;
      out.push_back(spec);
      in = stage_channels[s];
    }
  }
  return out;
}

std::size_t ModelSpec::downsampling() const {
  return std::size_t(1) << (stage_channels.size() - 1);
}

std::size_t ModelSpec::pooled_dim() const {
  std::size_t f = input_dim;
  for (const auto& b : residual_blocks()) f = conv_extent(f, b.stride);
  return stage_channels.back() * f;
}

std::string ModelSpec::to_text() const {
  std::ostringstream os;
  os << "format=gtfc-checkpoint\nversion=1\n"
     << "stage_channels=" << join(stage_channels) << '\n'
     << "blocks_per_stage=" << join(blocks_per_stage) << '\n'
     << "embedding_dim=" << embedding_dim << '\n'
     << "num_speakers=" << num_speakers << '\n'
     << "input_dim=" << input_dim << '\n'
     << "activation=swish\n"
     << "insert_kind=" << blocks::block_kind_name(insert_kind) << '\n'
     << "insert_pos=" << insert_pos_name(insert_pos) << '\n';
  std::istringstream cfg(blocks::config_to_text(block_config));
  std::string line;
  while (std::getline(cfg, line)) os << "block." << line << '\n';
  const auto res = residual_blocks();
  for (std::size_t i = 0; i < res.size(); ++i) {
    os << "residual." << i << '=' << res[i].in_channels << ',' << res[i].out_channels << ','
       << res[i].stride << ',' << blocks::block_kind_name(res[i].insert_kind) << ','
       << insert_pos_name(res[i].insert_pos) << '\n';
  }
  return os.str();
}

ModelSpec ModelSpec::from_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::string block_text;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find('=');
    if (line.empty() || line[0] == '#' || eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    if (key.rfind("block.", 0) == 0) {
      block_text += line.substr(6) + '\n';
    } else {
      kv[key] = line.substr(eq + 1);
    }
  }
  if (kv.count("format") && kv["format"] != "gtfc-checkpoint") {
    throw Error(ErrorCode::kFormat, "not a gtfc model spec");
  }
  if (kv.count("version") && kv["version"] != "1") {
    throw Error(ErrorCode::kFormat, "unsupported spec version " + kv["version"]);
  }
  ModelSpec s;
  try {
    if (kv.count("stage_channels")) s.stage_channels = split_list(kv["stage_channels"]);
    if (kv.count("blocks_per_stage")) s.blocks_per_stage = split_list(kv["blocks_per_stage"]);
    if (kv.count("embedding_dim")) s.embedding_dim = std::stoul(kv["embedding_dim"]);
    if (kv.count("num_speakers")) s.num_speakers = std::stoul(kv["num_speakers"]);
    if (kv.count("input_dim")) s.input_dim = std::stoul(kv["input_dim"]);
  } catch (const std::logic_error& e) {
    throw Error(ErrorCode::kFormat, std::string("bad model spec value: ") + e.what());
  }
  if (kv.count("insert_kind")) s.insert_kind = blocks::parse_block_kind(kv["insert_kind"]);
  if (kv.count("insert_pos")) s.insert_pos = parse_insert_pos(kv["insert_pos"]);
  s.block_config = blocks::config_from_text(block_text);
  return s;
}

ResidualBlock make_residual_block(const BasicBlockSpec& spec, const blocks::GtfcConfig& config,
                                  std::mt19937_64& rng) {
  ResidualBlock b;
  b.spec = spec;
  b.conv1 = he_conv(spec.out_channels, spec.in_channels, 3, rng);
  b.bn1 = BatchNormState::init(spec.out_channels);
  b.conv2 = he_conv(spec.out_channels, spec.out_channels, 3, rng);
  b.bn2 = BatchNormState::init(spec.out_channels);
  if (spec.has_projection()) {
    b.proj = he_conv(spec.out_channels, spec.in_channels, 1, rng);
    b.proj_bn = BatchNormState::init(spec.out_channels);
  }
  b.recal = blocks::Block(spec.insert_kind, spec.block_channels(), config, rng);
  return b;
}

Tensor apply_block_batched(const blocks::Block& block, const Tensor& x) {
  if (block.kind() == BlockKind::kNone) return x;
  if (x.rank() != 4) throw Error(ErrorCode::kShapeMismatch, "expected (N, C, F, T)");
  if (x.dim(0) == 1) return reshape(block.forward(select(x, 0)), x.shape());
  std::vector<Tensor> outs;
  outs.reserve(x.dim(0));
  for (std::size_t n = 0; n < x.dim(0); ++n) outs.push_back(block.forward(select(x, n)));
  return stack(outs);
}

Tensor basic_block(const Tensor& x, ResidualBlock& b, Mode mode) {
  const auto pos = b.spec.insert_pos;
  const Tensor branch_in = pos == InsertPos::kBeforeConv ? apply_block_batched(b.recal, x) : x;
  const Tensor h = swish(batchnorm(conv2d(branch_in, b.conv1, b.spec.stride, 1), b.bn1, mode));
  Tensor y = conv2d(h, b.conv2, 1, 1);
  if (pos == InsertPos::kBeforeBn) y = apply_block_batched(b.recal, y);
  y = batchnorm(y, b.bn2, mode);
  if (pos == InsertPos::kAfterBn) y = apply_block_batched(b.recal, y);
  const Tensor shortcut =
      b.spec.has_projection() ? batchnorm(conv2d(x, b.proj, b.spec.stride, 0), b.proj_bn, mode)
                              : x;
  return swish(y + shortcut);
}

Model::Model(const ModelSpec& spec, std::uint64_t seed) : spec_(spec) {
  spec_.validate();
  std::mt19937_64 rng(seed);
  const std::size_t c0 = spec_.stage_channels.front();
  stem_conv_ = he_conv(c0, 1, 3, rng);
  stem_bn_ = BatchNormState::init(c0);
  for (const auto& b : spec_.residual_blocks()) {
    blocks_.push_back(make_residual_block(b, spec_.block_config, rng));
  }
  const std::size_t pooled = spec_.pooled_dim();
  embed_w_ = Tensor::randn({pooled, spec_.embedding_dim}, rng, std::sqrt(1.0 / Real(pooled)),
                           true);
  embed_b_ = Tensor::zeros({spec_.embedding_dim}, true);
  // A small classifier keeps the initial logits near zero, so the first
  // loss sits close to ln(num_speakers).
  cls_w_ = Tensor::randn({spec_.embedding_dim, spec_.num_speakers}, rng, 0.01, true);
  cls_b_ = Tensor::zeros({spec_.num_speakers}, true);
}

Tensor Model::forward(const Tensor& x, Mode mode) {
  if (x.rank() != 4 || x.dim(1) != 1 || x.dim(2) != spec_.input_dim) {
    throw Error(ErrorCode::kShapeMismatch, "model input must be (N, 1, " +
                                               std::to_string(spec_.input_dim) + ", T), got " +
                                               shape_string(x.shape()));
  }
  if (x.dim(3) < spec_.min_frames()) {
    throw Error(ErrorCode::kTooShort, std::to_string(x.dim(3)) + " frames; need at least " +
                                          std::to_string(spec_.min_frames()));
  }
  Tensor h = swish(batchnorm(conv2d(x, stem_conv_, 1, 1), stem_bn_, mode));
  for (auto& b : blocks_) h = basic_block(h, b, mode);
  return linear(temporal_pool(h), embed_w_, embed_b_);
}

Tensor Model::logits(const Tensor& embeddings) const {
  return linear(embeddings, cls_w_, cls_b_);
}

std::vector<Real> Model::embed(const Tensor& features) {
  if (features.rank() != 2 || features.dim(1) != spec_.input_dim) {
    throw Error(ErrorCode::kShapeMismatch, "features must be (T, " +
                                               std::to_string(spec_.input_dim) + ")");
  }
  const Tensor map = reshape(transpose(features.detach()),
                             {1, 1, spec_.input_dim, features.dim(0)});
  const Tensor e = forward(map, Mode::kEval);
  return {e.data().begin(), e.data().end()};
}

ParamList Model::params() const {
  ParamList out{{"stem.conv", stem_conv_}};
  add_bn(out, "stem.bn", stem_bn_);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const auto& b = blocks_[i];
    const std::string p = block_prefix(i);
    out.push_back({p + ".conv1", b.conv1});
    add_bn(out, p + ".bn1", b.bn1);
    out.push_back({p + ".conv2", b.conv2});
    add_bn(out, p + ".bn2", b.bn2);
    if (b.spec.has_projection()) {
      out.push_back({p + ".proj", b.proj});
      add_bn(out, p + ".proj_bn", b.proj_bn);
    }
    for (const auto& r : b.recal.params()) out.push_back({p + ".recal." + r.name, r.tensor});
  }
  out.push_back({"embed.w", embed_w_});
  out.push_back({"embed.b", embed_b_});
  out.push_back({"classifier.w", cls_w_});
  out.push_back({"classifier.b", cls_b_});
  return out;
}

ParamList Model::buffers() const {
  ParamList out;
  add_bn_buffers(out, "stem.bn", stem_bn_);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const auto& b = blocks_[i];
    const std::string p = block_prefix(i);
    add_bn_buffers(out, p + ".bn1", b.bn1);
    add_bn_buffers(out, p + ".bn2", b.bn2);
    if (b.spec.has_projection()) add_bn_buffers(out, p + ".proj_bn", b.proj_bn);
  }
  return out;
}

std::vector<Model::ModuleCount> Model::param_ledger() const {
  std::vector<ModuleCount> out;
  const std::size_t c0 = spec_.stage_channels.front();
  out.push_back({"stem.conv", c0 * 9});
  out.push_back({"stem.bn", 2 * c0});
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const auto& s = blocks_[i].spec;
    const std::string p = block_prefix(i);
    out.push_back({p + ".conv1", s.out_channels * s.in_channels * 9});
    out.push_back({p + ".bn1", 2 * s.out_channels});
    out.push_back({p + ".conv2", s.out_channels * s.out_channels * 9});
    out.push_back({p + ".bn2", 2 * s.out_channels});
    if (s.has_projection()) {
      out.push_back({p + ".proj", s.out_channels * s.in_channels});
      out.push_back({p + ".proj_bn", 2 * s.out_channels});
    }
    if (s.insert_kind != BlockKind::kNone) {
      out.push_back({p + ".recal",
                     blocks::param_count(s.insert_kind, s.block_channels(), spec_.block_config)});
    }
  }
  out.push_back({"embed", spec_.pooled_dim() * spec_.embedding_dim + spec_.embedding_dim});
  out.push_back({"classifier", spec_.embedding_dim * spec_.num_speakers + spec_.num_speakers});
  return out;
}

std::size_t Model::num_params() const {
  std::size_t n = 0;
  for (const auto& m : param_ledger()) n += m.count;
  return n;
}

void Model::save(const std::filesystem::path& dir) const {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "tensors");
  {
    std::ofstream os(dir / "spec.txt", std::ios::trunc);
    os << spec_.to_text();
    if (!os) throw Error(ErrorCode::kIo, "cannot write " + (dir / "spec.txt").string());
  }
  std::ofstream manifest(dir / "manifest.txt", std::ios::trunc);
  auto put = [&](const NamedParam& p) {
    write_gtf1(p.tensor, dir / "tensors" / (p.name + ".gtf"));
    manifest << "tensors/" << p.name << ".gtf\t" << shape_string(p.tensor.shape()) << '\n';
  };
  for (const auto& p : params()) {
    if (p.name.find(".recal.") == std::string::npos) put(p);
  }
  for (const auto& b : buffers()) put(b);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    if (blocks_[i].recal.kind() == BlockKind::kNone) continue;
    const std::string name = "block_" + std::to_string(i);
    blocks_[i].recal.save(dir / name);
    manifest << name << "/\t" << blocks::block_kind_name(blocks_[i].recal.kind()) << '\n';
  }
  if (!manifest) throw Error(ErrorCode::kIo, "cannot write " + (dir / "manifest.txt").string());
}

Model Model::load(const std::filesystem::path& dir) {
  std::ifstream is(dir / "spec.txt");
  if (!is) throw Error(ErrorCode::kIo, "cannot read " + (dir / "spec.txt").string());
  std::stringstream buf;
  buf << is.rdbuf();
  Model m(ModelSpec::from_text(buf.str()), 0);
  auto fill = [&](const NamedParam& p, const std::filesystem::path& file) {
    const Tensor stored = read_gtf1(file);
    if (stored.shape() != p.tensor.shape()) {
      throw Error(ErrorCode::kShapeMismatch, file.string() + " has shape " +
                                                 shape_string(stored.shape()) + ", expected " +
                                                 shape_string(p.tensor.shape()));
    }
    auto dst = Tensor(p.tensor).mutable_data();
    std::copy(stored.data().begin(), stored.data().end(), dst.begin());
  };
  for (const auto& p : m.params()) {
    if (p.name.find(".recal.") == std::string::npos) {
      fill(p, dir / "tensors" / (p.name + ".gtf"));
    }
  }
  for (const auto& b : m.buffers()) fill(b, dir / "tensors" / (b.name + ".gtf"));
  for (std::size_t i = 0; i < m.blocks_.size(); ++i) {
    if (m.blocks_[i].recal.kind() == BlockKind::kNone) continue;
    m.blocks_[i].recal = blocks::Block::load(dir / ("block_" + std::to_string(i)));
  }
  return m;
}

}  // namespace gtfc::backbone
