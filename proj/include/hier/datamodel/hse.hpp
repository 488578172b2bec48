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

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hier/binary_io.hpp"
#include "hier/datamodel/types.hpp"
#include "hier/error.hpp"

// HIER Serialized Embeddings (HSE), little-endian:
//
//   "HSE1" | u32 version=1 | u32 d | u32 L
//   L x (u32 byte length, UTF-8 label name)
//   L x d f32 label embeddings
//   u32 sample count
//   per sample: u32 byte length + UTF-8 id, u32 n_text, u32 n_video,
//               u32 label, (n_text + n_video) x d f32 tokens (text first)

namespace hier::hse {

inline constexpr char kMagic[4] = {'H', 'S', 'E', '1'};
inline constexpr std::uint32_t kVersion = 1;


/// Serializes `ds`. Values are narrowed to f32; a value that overflows f32 is an error.
inline std::vector<std::uint8_t> encode(const Dataset& ds) {
  validate(ds);
  io::ByteWriter w;
  w.raw(kMagic);
  w.u32(kVersion);
  w.u32(io::ByteWriter::checked_u32(ds.d(), "d"));
  w.u32(io::ByteWriter::checked_u32(ds.labels.size(), "label count"));
  for (const auto& name : ds.labels.names) w.str(name);
  for (double v : ds.labels.embeddings) w.f32(v);
  w.u32(io::ByteWriter::checked_u32(ds.samples.size(), "sample count"));
  for (const auto& s : ds.samples) {
    w.str(s.id);
    w.u32(io::ByteWriter::checked_u32(s.sequence.n_text, "n_text"));
    w.u32(io::ByteWriter::checked_u32(s.sequence.n_video, "n_video"));
    w.u32(io::ByteWriter::checked_u32(s.label, "label"));
    for (double v : s.sequence.tokens) w.f32(v);
  }
  return w.take();
}

/// Parses an HSE buffer. Structural problems raise ParseError with the byte
/// offset; invariant violations (NaN tokens, bad labels) raise ValidationError
/// naming the sample. Either way nothing partial is returned.
inline Dataset decode(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes, "hse");
  r.need(4, "magic");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw ParseError("hse: bad magic (expected \"HSE1\")", 0);
  (void)r.u32("magic");
  const std::uint32_t version = r.u32("version");
  if (version != kVersion)
    throw ParseError("hse: unsupported version " + std::to_string(version), r.offset() - 4);
  const std::uint32_t d = r.u32("d");
  const std::uint32_t n_labels = r.u32("label count");
  if (d == 0) throw ParseError("hse: d must be positive", r.offset() - 8);

  Dataset ds;
  ds.labels.d = d;
  for (std::uint32_t i = 0; i < n_labels; ++i) ds.labels.names.push_back(r.str("label name"));
  r.need(static_cast<std::size_t>(n_labels) * d * 4, "label embeddings");
  ds.labels.embeddings.resize(static_cast<std::size_t>(n_labels) * d);
  for (double& v : ds.labels.embeddings) v = r.f32("label embeddings");
  validate(ds.labels);

  const std::uint32_t count = r.u32("sample count");
  for (std::uint32_t s = 0; s < count; ++s) {
    Sample sample;
    sample.id = r.str("sample id");
    const std::uint32_t n_text = r.u32("n_text");
    const std::uint32_t n_video = r.u32("n_video");
    sample.label = r.u32("label index");
    const std::size_t n = static_cast<std::size_t>(n_text) + n_video;
    r.need(n * d * 4, "token matrix");
    std::vector<double> tokens(n * d);
    for (double& v : tokens) v = r.f32("token matrix");
    sample.sequence = TokenSequence::from_rows(d, std::move(tokens), n_text);
    validate(sample, ds.labels);
    ds.samples.push_back(std::move(sample));
  }
  if (!r.at_end()) throw ParseError("hse: trailing bytes after last sample", r.offset());
  return ds;
}

inline void write_file(const Dataset& ds, const std::filesystem::path& path) { io::write_file(path, encode(ds)); }

inline Dataset read_file(const std::filesystem::path& path) { return decode(io::read_file(path)); }

/// Human-readable mirror: one JSON object per sample.
inline std::string to_jsonl(const Dataset& ds) {
  std::string out;
  for (const auto& s : ds.samples) {
    nlohmann::json tokens = nlohmann::json::array();
    for (std::size_t i = 0; i < s.sequence.size(); ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (double v : s.sequence.token(i)) row.push_back(static_cast<float>(v));
      tokens.push_back(std::move(row));
    }
    nlohmann::json line = {{"id", s.id},
                           {"label", s.label},
                           {"label_name", ds.labels.names.at(s.label)},
                           {"n_text", s.sequence.n_text},
                           {"n_video", s.sequence.n_video},
                           {"tokens", std::move(tokens)}};
    out += line.dump();
    out += '\n';
  }
  return out;
}

}  // namespace hier::hse

namespace hier {

/// Loads an externally exported embedding file (HSE format).
inline Dataset ingest_embeddings(const std::filesystem::path& path) { return hse::read_file(path); }

}  // namespace hier
