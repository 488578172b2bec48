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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hier/error.hpp"
#include "hier/numerics/tensor.hpp"

namespace hier {

enum class Modality { kText, kVideo };

/// Unified multimodal token matrix: text tokens first, then video tokens.
struct TokenSequence {
  std::size_t d = 0;
  std::vector<double> tokens;  // n x d, row-major
  std::vector<Modality> modality_tags;
  std::size_t n_text = 0;
  std::size_t n_video = 0;

  std::size_t size() const noexcept { return n_text + n_video; }

  Tensor as_tensor() const { return Tensor(size(), d, tokens); }

  std::span<const double> token(std::size_t i) const {
    return std::span<const double>(tokens).subspan(i * d, d);
  }

  static TokenSequence from_rows(std::size_t d, std::vector<double> tokens, std::size_t n_text) {
    TokenSequence seq;
    seq.d = d;
    const std::size_t n = d == 0 ? 0 : tokens.size() / d;
    seq.tokens = std::move(tokens);
    seq.n_text = std::min(n_text, n);
    seq.n_video = n - seq.n_text;
    seq.modality_tags.assign(seq.n_text, Modality::kText);
    seq.modality_tags.resize(n, Modality::kVideo);
    return seq;
  }
};

struct LabelSet {
  std::vector<std::string> names;
  std::size_t d = 0;
  std::vector<double> embeddings;  // L x d

  std::size_t size() const noexcept { return names.size(); }
  Tensor as_tensor(bool requires_grad = false) const { return Tensor(size(), d, embeddings, requires_grad); }
  std::span<const double> embedding(std::size_t i) const {
    return std::span<const double>(embeddings).subspan(i * d, d);
  }
};

struct Sample {
  TokenSequence sequence;
  std::size_t label = 0;
  std::string id;
};

enum class Split { kTrain, kValidation, kTest };

inline std::string_view to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kValidation: return "validation";
    case Split::kTest: return "test";
  }
  return "train";
}

struct Dataset {
  std::vector<Sample> samples;
  LabelSet labels;
  Split split = Split::kTrain;

  std::size_t d() const noexcept { return labels.d; }
  std::size_t num_classes() const noexcept { return labels.size(); }
  bool empty() const noexcept { return samples.empty(); }
};

/// Throws ValidationError naming the first offending label or sample.
inline void validate(const LabelSet& labels) {
  if (labels.size() < 2) throw ValidationError("label set: need at least 2 labels");
  if (labels.d == 0) throw ValidationError("label set: embedding width is zero");
  if (labels.embeddings.size() != labels.size() * labels.d)
    throw ValidationError("label set: embedding matrix has wrong size");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!seen.insert(labels.names[i]).second)
      throw ValidationError("label set: duplicate label name '" + labels.names[i] + "'");
    bool nonzero = false;
    for (double v : labels.embedding(i)) {
      if (!std::isfinite(v)) throw ValidationError("label '" + labels.names[i] + "': non-finite embedding");
      nonzero = nonzero || v != 0.0;
    }
    if (!nonzero) throw ValidationError("label '" + labels.names[i] + "': zero embedding");
  }
}

inline void validate(const Sample& s, const LabelSet& labels) {
  const auto& seq = s.sequence;
  if (seq.d != labels.d)
    throw ValidationError("sample " + s.id + ": token width " + std::to_string(seq.d) + " != dataset width " +
                          std::to_string(labels.d));
  if (seq.size() == 0) throw ValidationError("sample " + s.id + ": no tokens");
  if (seq.tokens.size() != seq.size() * seq.d || seq.modality_tags.size() != seq.size())
    throw ValidationError("sample " + s.id + ": token matrix does not match n_text + n_video");
  for (double v : seq.tokens)
    if (!std::isfinite(v)) throw ValidationError("sample " + s.id + ": non-finite token value");
  if (s.label >= labels.size())
    throw ValidationError("sample " + s.id + ": label index " + std::to_string(s.label) + " out of range");
}

inline void validate(const Dataset& ds) {
  validate(ds.labels);
  for (const auto& s : ds.samples) validate(s, ds.labels);
}

}  // namespace hier
