// Copyright 2026 The HIER Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "hier/binary_io.hpp"
#include "hier/config.hpp"
#include "hier/error.hpp"
#include "hier/model.hpp"

// Checkpoint container, little-endian:
//
//   "HCK1" | u32 version=1 | u32 length + config text (key = value lines)
//   u32 L | L x (u32 length + label name)
//   u32 block count | per block: u32 length + name, u32 rows, u32 cols,
//                     rows x cols f64

namespace hier {

inline constexpr char kCheckpointMagic[4] = {'H', 'C', 'K', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct ParameterBlock {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  friend bool operator==(const ParameterBlock&, const ParameterBlock&) = default;
};

struct Checkpoint {
  Config config;
  std::vector<std::string> label_names;
  std::vector<ParameterBlock> blocks;
};

inline Checkpoint snapshot(const HierModel& model) {
  Checkpoint ck;
  ck.config = model.config();
  ck.label_names = model.labels().names;
  for (const auto& p : model.parameters()) {
    ck.blocks.push_back({p.name, p.tensor.rows(), p.tensor.cols(),
                         std::vector<double>(p.tensor.values().begin(), p.tensor.values().end())});
  }
  return ck;
}

/// Copies block values into the model's parameters; names and shapes must match exactly.
inline void restore(HierModel& model, const Checkpoint& ck) {
  auto params = model.parameters();
  if (params.size() != ck.blocks.size())
    throw ValidationError("checkpoint: " + std::to_string(ck.blocks.size()) + " blocks, model has " +
                          std::to_string(params.size()) + " parameters");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& block = ck.blocks[i];
    Tensor& t = params[i].tensor;
    if (block.name != params[i].name) throw ValidationError("checkpoint: expected block " + params[i].name + ", found " + block.name);
    if (block.rows != t.rows() || block.cols != t.cols())
      throw ValidationError("checkpoint: shape mismatch for " + block.name);
    auto dst = t.mutable_values();
    std::copy(block.values.begin(), block.values.end(), dst.begin());
  }
}

/// Rebuilds a model for `labels`, whose names must equal the checkpoint's.
inline HierModel load_model(const Checkpoint& ck, const LabelSet& labels) {
  if (labels.names != ck.label_names) throw ValidationError("checkpoint: label set does not match the dataset");
  HierModel model(ck.config, labels);
  restore(model, ck);
  return model;
}

inline std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ck) {
  io::ByteWriter w;
  w.raw(kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.str(serialize_config(ck.config));
  w.u32(io::ByteWriter::checked_u32(ck.label_names.size(), "label count"));
  for (const auto& name : ck.label_names) w.str(name);
  w.u32(io::ByteWriter::checked_u32(ck.blocks.size(), "block count"));
  for (const auto& b : ck.blocks) {
    w.str(b.name);
    w.u32(io::ByteWriter::checked_u32(b.rows, "rows"));
    w.u32(io::ByteWriter::checked_u32(b.cols, "cols"));
    for (double v : b.values) w.f64(v);
  }
  return w.take();
}

inline Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes, "checkpoint");
  r.need(4, "magic");
  if (std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) throw ParseError("checkpoint: bad magic (expected \"HCK1\")", 0);
  (void)r.u32("magic");
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion)
    throw ParseError("checkpoint: unsupported version " + std::to_string(version), r.offset() - 4);
  Checkpoint ck;
  ck.config = parse_config(r.str("config"));
  const std::uint32_t n_labels = r.u32("label count");
  for (std::uint32_t i = 0; i < n_labels; ++i) ck.label_names.push_back(r.str("label name"));
  const std::uint32_t n_blocks = r.u32("block count");
  for (std::uint32_t i = 0; i < n_blocks; ++i) {
    ParameterBlock b;
    b.name = r.str("block name");
    b.rows = r.u32("rows");
    b.cols = r.u32("cols");
    r.need(b.rows * b.cols * 8, "block values");
    b.values.resize(b.rows * b.cols);
    for (double& v : b.values) v = r.f64("block values");
    ck.blocks.push_back(std::move(b));
  }
  if (!r.at_end()) throw ParseError("checkpoint: trailing bytes", r.offset());
  return ck;
}

inline void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  io::write_file(path, encode_checkpoint(ck));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(io::read_file(path));
}

}  // namespace hier
