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
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hier/error.hpp"
#include "hier/nn.hpp"
#include "hier/numerics.hpp"

namespace hier {

/// Bottleneck pair encoder (2d -> b -> d) plus the two intent heads.
struct RelationEncoder {
  Linear compress;       // 2d -> b
  Linear expand;         // b -> d
  Linear concept_head;   // d -> L
  Linear relation_head;  // d -> L

  /// Bottleneck width defaults to d / 2.
  static RelationEncoder init(std::size_t d, std::size_t num_classes, std::mt19937_64& rng,
                              std::size_t bottleneck = 0) {
    if (bottleneck == 0) bottleneck = std::max<std::size_t>(1, d / 2);
    if (bottleneck >= 2 * d) throw InvalidArgument("relation encoder: bottleneck must be narrower than 2d");
    RelationEncoder enc;
    enc.compress = Linear::init(2 * d, bottleneck, rng);
    enc.expand = Linear::init(bottleneck, d, rng);
    enc.concept_head = Linear::init(d, num_classes, rng);
    enc.relation_head = Linear::init(d, num_classes, rng);
    return enc;
  }

  std::size_t d() const { return expand.out(); }
  std::size_t bottleneck() const { return compress.out(); }
  std::size_t num_classes() const { return concept_head.out(); }

  void append_to(ParameterList& params, const std::string& prefix) const {
    compress.append_to(params, prefix + ".compress");
    expand.append_to(params, prefix + ".expand");
    concept_head.append_to(params, prefix + ".concept_head");
    relation_head.append_to(params, prefix + ".relation_head");
  }
};

/// r = expand(ReLU(compress(ReLU([a; b])))) for each row of `pair_inputs` (P x 2d).
inline Tensor encode_concatenated(const Tensor& pair_inputs, const RelationEncoder& enc) {
  if (pair_inputs.cols() != enc.compress.in()) throw DimensionError("encode_relation: input width mismatch");
  return enc.expand(relu(enc.compress(relu(pair_inputs))));
}

/// Relation vector (1 x d) for one concept pair, concatenated in argument order.
inline Tensor encode_relation(const Tensor& c_i, const Tensor& c_j, const RelationEncoder& enc) {
  if (c_i.size() != enc.d() || c_j.size() != enc.d()) throw DimensionError("encode_relation: concept width mismatch");
  const auto row = [](const Tensor& t) { return t.rows() == 1 ? t : transpose(t); };
  return encode_concatenated(concat_cols(row(c_i), row(c_j)), enc);
}

/// Applies a classification head to every row.
inline Tensor classify(const Tensor& vectors, const Linear& head) {
  if (vectors.cols() != head.in()) throw DimensionError("classify: head input width mismatch");
  return head(vectors);
}

/// CE(s_i, g) + CE(s_j, g) + CE(s_ij, g) for a single pair.
inline Tensor relation_loss(const Tensor& concept_logits_i, const Tensor& concept_logits_j,
                            const Tensor& relation_logits, std::size_t g) {
  return add(add(cross_entropy(concept_logits_i, g), cross_entropy(concept_logits_j, g)),
             cross_entropy(relation_logits, g));
}

enum class JsMode {
  kStandard,       // (KL(p||m) + KL(q||m)) / 2
  kVerbatim,  // (KL(p||m) + KL(m||q)) / 2
};

/// Divergence between two distributions, m = (p + q) / 2.
inline double js_divergence(std::span<const double> p, std::span<const double> q, JsMode mode = JsMode::kStandard) {
  if (p.size() != q.size()) throw DimensionError("js_score: logit lengths differ");
  std::vector<double> m(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) m[i] = 0.5 * (p[i] + q[i]);
  const double first = vmath::kl_divergence(p, m);
  const double second = mode == JsMode::kStandard ? vmath::kl_divergence(q, m) : vmath::kl_divergence(m, q);
  return 0.5 * (first + second);
}

/// JS score between the class distributions of a concept and of a relation.
inline double js_score(std::span<const double> concept_logits, std::span<const double> relation_logits,
                       JsMode mode = JsMode::kStandard) {
  if (concept_logits.size() != relation_logits.size()) throw DimensionError("js_score: logit lengths differ");
  const auto p = vmath::softmax(concept_logits);
  const auto q = vmath::softmax(relation_logits);
  return js_divergence(p, q, mode);
}

struct ScoredRelation {
  std::size_t i = 0;
  std::size_t j = 0;
  double score = 0.0;
  std::size_t row = 0;  // row of this pair in PairScores::relations
};

/// Encoded and scored relations for every unordered concept pair.
struct PairScores {
  Tensor concept_logits;   // k x L
  Tensor relations;        // P x d, one row per pair in (i, j) lexicographic order
  Tensor relation_logits;  // P x L
  std::vector<ScoredRelation> scored;
};

/// Lexicographic comparison of two rows; decides concatenation order so a
/// pair's encoding does not depend on how the concepts were enumerated.
inline bool row_precedes(const Tensor& m, std::size_t a, std::size_t b) {
  auto ra = m.row_values(a);
  auto rb = m.row_values(b);
  return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
}

/// Encodes and scores all k(k-1)/2 pairs: JS_ij = js(s_i, s_ij) + js(s_j, s_ij).
inline PairScores score_all_pairs(const Tensor& concepts, const RelationEncoder& enc,
                                  JsMode mode = JsMode::kStandard) {
  const std::size_t k = concepts.rows();
  if (k < 2) throw InvalidArgument("score_all_pairs: need at least 2 concepts");
  std::vector<std::size_t> first, second;
  std::vector<ScoredRelation> scored;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j) {
      const bool swap = row_precedes(concepts, j, i);
      first.push_back(swap ? j : i);
      second.push_back(swap ? i : j);
      scored.push_back({i, j, 0.0, scored.size()});
    }

  PairScores out;
  out.concept_logits = classify(concepts, enc.concept_head);
  out.relations = encode_concatenated(concat_cols(gather_rows(concepts, first), gather_rows(concepts, second)), enc);
  out.relation_logits = classify(out.relations, enc.relation_head);
  for (auto& rel : scored) {
    const auto s_ij = out.relation_logits.row_values(rel.row);
    rel.score = js_score(out.concept_logits.row_values(rel.i), s_ij, mode) +
                js_score(out.concept_logits.row_values(rel.j), s_ij, mode);
  }
  out.scored = std::move(scored);
  return out;
}

/// Pair-averaged relation loss over every scored pair.
inline Tensor relation_loss(const PairScores& pairs, std::size_t g) {
  const std::size_t count = pairs.scored.size();
  std::vector<std::size_t> is, js;
  for (const auto& rel : pairs.scored) {
    is.push_back(rel.i);
    js.push_back(rel.j);
  }
  const std::vector<std::size_t> targets(count, g);
  return add(add(cross_entropy(gather_rows(pairs.concept_logits, is), targets),
                 cross_entropy(gather_rows(pairs.concept_logits, js), targets)),
             cross_entropy(pairs.relation_logits, targets));
}

struct RelationSet {
  std::vector<ScoredRelation> selected;
  double retention_ratio = 1.0;

  std::size_t size() const { return selected.size(); }
};

/// Number of relations kept: max(1, floor(ratio * count)), capped by `budget`.
inline std::size_t retained_count(std::size_t count, double retention_ratio,
                                  std::optional<std::size_t> budget = std::nullopt) {
  // Small slack so products like 0.29 * 100 are not floored to 28.
  auto kept = static_cast<std::size_t>(std::floor(retention_ratio * static_cast<double>(count) + 1e-9));
  kept = std::max<std::size_t>(1, kept);
  if (budget) kept = std::min(kept, *budget);
  return std::min(kept, count);
}

/// Strict order used for selection: higher score first, then smaller (i, j).
inline bool ranks_before(const ScoredRelation& a, const ScoredRelation& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.i != b.i) return a.i < b.i;
  return a.j < b.j;
}

/// Keeps the top retained_count(...) relations in (-score, i, j) order.
inline RelationSet select_relations(std::span<const ScoredRelation> scored, double retention_ratio,
                                    std::optional<std::size_t> budget = std::nullopt) {
  if (scored.empty()) throw InvalidArgument("select_relations: empty input");
  if (!(retention_ratio > 0.0 && retention_ratio <= 1.0))
    throw InvalidArgument("select_relations: retention ratio must lie in (0, 1]");
  const std::size_t kept = retained_count(scored.size(), retention_ratio, budget);
  std::vector<ScoredRelation> all(scored.begin(), scored.end());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(kept), all.end(), ranks_before);
  all.resize(kept);
  return {std::move(all), retention_ratio};
}

/// Relation vectors (l x d) of the selected pairs, in selection order.
inline Tensor selected_vectors(const PairScores& pairs, const RelationSet& selection) {
  std::vector<std::size_t> rows;
  for (const auto& rel : selection.selected) rows.push_back(rel.row);
  return gather_rows(pairs.relations, rows);
}

}  // namespace hier
