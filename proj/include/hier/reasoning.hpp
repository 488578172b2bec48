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

#include <cmath>
#include <memory>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "hier/error.hpp"
#include "hier/nn.hpp"
#include "hier/numerics.hpp"

namespace hier {

/// Mock vocabulary: 0 = negative response, 1 = affirmative response,
/// 2 .. L+1 = intent labels, then one entry per instruction token.
struct Vocabulary {
  static constexpr std::size_t kNegative = 0;
  static constexpr std::size_t kAffirmative = 1;
  static constexpr std::size_t kFirstLabel = 2;

  std::size_t num_labels = 0;
  std::size_t num_instructions = 0;

  std::size_t label_token(std::size_t c) const { return kFirstLabel + c; }
  std::size_t instruction_token(std::size_t t) const { return kFirstLabel + num_labels + t; }
  std::size_t size() const { return kFirstLabel + num_labels + num_instructions; }
};

/// Instruction tokens; each owns one row of the learned instruction table.
enum class Instruction : std::size_t {
  kContext = 0,         // CoT-1 opener
  kContextFocus,        // CoT-1 scene summary cue
  kConceptAnalysis,     // CoT-2 opener
  kJudgeUsefulness,     // usefulness-judgment cue, shared by CoT-2 and CoT-3
  kRelationReasoning,   // CoT-3 opener
  kAnswer,              // final query position
  kUnified,             // single instruction used when stages are collapsed
  kCount,
};

inline constexpr std::size_t kNumInstructions = static_cast<std::size_t>(Instruction::kCount);

enum class Stage { kCot1 = 1, kCot2 = 2, kCot3 = 3 };

enum class SegmentKind { kInstruction, kContext, kConceptSlot, kRelationSlot };

enum class PromptTemplate {
  kStaged,     // three CoT stages, each with its own instructions
  kCollapsed,  // one instruction up front, no per-stage cues
};

inline std::string_view to_string(SegmentKind k) {
  switch (k) {
    case SegmentKind::kInstruction: return "instruction";
    case SegmentKind::kContext: return "context";
    case SegmentKind::kConceptSlot: return "concept";
    case SegmentKind::kRelationSlot: return "relation";
  }
  return "?";
}

struct Segment {
  Stage stage = Stage::kCot1;
  SegmentKind kind = SegmentKind::kInstruction;
  std::size_t source = 0;  // instruction id, token index, concept index or relation index

  friend bool operator==(const Segment&, const Segment&) = default;
};

/// Realized prompt: one row of `vectors` per segment.
struct PromptSequence {
  std::vector<Segment> segments;
  Tensor vectors;                          // length x d
  std::vector<std::size_t> concept_slots;  // position of concept m
  std::vector<std::size_t> relation_slots; // position of relation r

  std::size_t size() const { return segments.size(); }
  std::size_t slot_count() const { return concept_slots.size() + relation_slots.size(); }
};

namespace detail {

inline std::size_t rows_of(const Tensor& t) { return t.defined() ? t.rows() : 0; }

}  // namespace detail

/// Canonical layout (staged template):
///   cot1: [Context, ContextFocus] z_1 .. z_n
///   cot2: [ConceptAnalysis, JudgeUsefulness] c_1 .. c_k
///   cot3: [RelationReasoning, JudgeUsefulness] r_1 .. r_l [Answer]
/// The collapsed template keeps the same content but emits a single
/// [Unified] instruction before the context and drops the per-stage cues.
/// `concepts` and `relations` may be undefined or have zero rows.
inline PromptSequence assemble_prompt(const Tensor& tokens, const Tensor& concepts, const Tensor& relations,
                                      const Tensor& instruction_table,
                                      PromptTemplate layout = PromptTemplate::kStaged) {
  const std::size_t d = tokens.cols();
  if (instruction_table.cols() != d || instruction_table.rows() != kNumInstructions)
    throw DimensionError("assemble_prompt: instruction table must be " + std::to_string(kNumInstructions) + " x d");
  const std::size_t k = detail::rows_of(concepts);
  const std::size_t l = detail::rows_of(relations);
  if ((k > 0 && concepts.cols() != d) || (l > 0 && relations.cols() != d))
    throw DimensionError("assemble_prompt: concept/relation width differs from token width");

  PromptSequence prompt;
  std::vector<Tensor> pieces;
  auto instructions = [&](Stage stage, std::initializer_list<Instruction> ids) {
    if (ids.size() == 0) return;
    std::vector<std::size_t> rows;
    for (Instruction id : ids) {
      rows.push_back(static_cast<std::size_t>(id));
      prompt.segments.push_back({stage, SegmentKind::kInstruction, static_cast<std::size_t>(id)});
    }
    pieces.push_back(gather_rows(instruction_table, rows));
  };
  auto content = [&](Stage stage, SegmentKind kind, const Tensor& rows, std::size_t count,
                     std::vector<std::size_t>* slots) {
    for (std::size_t i = 0; i < count; ++i) {
      if (slots) slots->push_back(prompt.segments.size());
      prompt.segments.push_back({stage, kind, i});
    }
    if (count > 0) pieces.push_back(rows);
  };

  const bool staged = layout == PromptTemplate::kStaged;
  if (staged) {
    instructions(Stage::kCot1, {Instruction::kContext, Instruction::kContextFocus});
  } else {
    instructions(Stage::kCot1, {Instruction::kUnified});
  }
  content(Stage::kCot1, SegmentKind::kContext, tokens, tokens.rows(), nullptr);
  if (staged) instructions(Stage::kCot2, {Instruction::kConceptAnalysis, Instruction::kJudgeUsefulness});
  content(Stage::kCot2, SegmentKind::kConceptSlot, concepts, k, &prompt.concept_slots);
  if (staged) instructions(Stage::kCot3, {Instruction::kRelationReasoning, Instruction::kJudgeUsefulness});
  content(Stage::kCot3, SegmentKind::kRelationSlot, relations, l, &prompt.relation_slots);
  instructions(Stage::kCot3, {Instruction::kAnswer});

  prompt.vectors = concat_rows(pieces);
  return prompt;
}

/// Stand-in for the fine-tuned multimodal LLM: maps a realized prompt to
/// same-length hidden states and owns a generation head (d -> V).
class ReasonerBackend {
 public:
  virtual ~ReasonerBackend() = default;
  virtual std::size_t width() const = 0;
  virtual Tensor forward(const Tensor& x) const = 0;
  virtual const Linear& generation_head() const = 0;
  virtual void append_to(ParameterList& params, const std::string& prefix) const = 0;
  virtual std::string_view kind() const = 0;
};

/// Hidden states equal the inputs.
class IdentityBackend final : public ReasonerBackend {
 public:
  IdentityBackend(std::size_t d, std::size_t vocab, std::mt19937_64& rng) : d_(d), head_(Linear::init(d, vocab, rng)) {}

  std::size_t width() const override { return d_; }
  Tensor forward(const Tensor& x) const override { return x; }
  const Linear& generation_head() const override { return head_; }
  void append_to(ParameterList& params, const std::string& prefix) const override {
    head_.append_to(params, prefix + ".head");
  }
  std::string_view kind() const override { return "identity"; }

 private:
  std::size_t d_;
  Linear head_;
};

/// Small causal transformer without normalization layers: each layer is a
/// single-head causal self-attention block followed by a ReLU feed-forward
/// block, both residual.
class AttentionBackend final : public ReasonerBackend {
 public:
  struct Layer {
    Linear query, key, value, output, ff_in, ff_out;
  };

  AttentionBackend(std::size_t d, std::size_t vocab, std::size_t num_layers, std::mt19937_64& rng) : d_(d) {
    for (std::size_t i = 0; i < num_layers; ++i) {
      Layer layer{Linear::init(d, d, rng), Linear::init(d, d, rng),     Linear::init(d, d, rng),
                  Linear::init(d, d, rng), Linear::init(d, 2 * d, rng), Linear::init(2 * d, d, rng)};
      layers_.push_back(std::move(layer));
    }
    head_ = Linear::init(d, vocab, rng);
  }

  std::size_t width() const override { return d_; }

  Tensor forward(const Tensor& x) const override {
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d_));
    Tensor h = x;
    for (const auto& layer : layers_) {
      Tensor scores = scale(matmul(layer.query(h), transpose(layer.key(h))), inv_sqrt_d);
      Tensor attended = matmul(causal_softmax(scores), layer.value(h));
      h = add(h, layer.output(attended));
      h = add(h, layer.ff_out(relu(layer.ff_in(h))));
    }
    return h;
  }

  const Linear& generation_head() const override { return head_; }

  void append_to(ParameterList& params, const std::string& prefix) const override {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const std::string p = prefix + ".layer" + std::to_string(i);
      const auto& l = layers_[i];
      l.query.append_to(params, p + ".query");
      l.key.append_to(params, p + ".key");
      l.value.append_to(params, p + ".value");
      l.output.append_to(params, p + ".output");
      l.ff_in.append_to(params, p + ".ff_in");
      l.ff_out.append_to(params, p + ".ff_out");
    }
    head_.append_to(params, prefix + ".head");
  }

  std::string_view kind() const override { return "attention"; }

 private:
  std::size_t d_;
  std::vector<Layer> layers_;
  Linear head_;
};

/// Runs the backend over the realized prompt.
inline Tensor reason(const PromptSequence& prompt, const ReasonerBackend& backend) {
  if (prompt.vectors.cols() != backend.width())
    throw DimensionError("reason: prompt width " + std::to_string(prompt.vectors.cols()) + " != backend width " +
                         std::to_string(backend.width()));
  Tensor hidden = backend.forward(prompt.vectors);
  if (hidden.rows() != prompt.vectors.rows()) throw DimensionError("reason: backend changed the sequence length");
  return hidden;
}

/// Self-evolution gate: a copy of the generation head plus the vocabulary
/// positions of the affirmative and negative responses.
struct EvolutionGate {
  Linear head;
  std::size_t idx_pos = Vocabulary::kAffirmative;
  std::size_t idx_neg = Vocabulary::kNegative;

  /// Deep copy of `backend`'s head; frozen gates do not require gradients.
  static EvolutionGate copy_from(const ReasonerBackend& backend, bool frozen = false) {
    const auto copy = [frozen](const Tensor& t) {
      return Tensor(t.rows(), t.cols(), std::vector<double>(t.values().begin(), t.values().end()), !frozen);
    };
    const Linear& src = backend.generation_head();
    EvolutionGate gate;
    gate.head = {copy(src.weight), copy(src.bias)};
    return gate;
  }
};

/// Scores are clamped to [kScoreMargin, 1 - kScoreMargin].
inline constexpr double kScoreMargin = 1e-12;

/// score = exp(l[pos]) / (exp(l[pos]) + exp(l[neg])) with l = head(feature),
/// evaluated as a sigmoid of the logit gap. Returns one score per row (m x 1).
inline Tensor evolution_scores(const Tensor& features, const EvolutionGate& gate) {
  if (gate.idx_pos == gate.idx_neg) throw InvalidArgument("evolution_scores: response indices must differ");
  if (gate.idx_pos >= gate.head.out() || gate.idx_neg >= gate.head.out())
    throw InvalidArgument("evolution_scores: response index outside the vocabulary");
  if (features.cols() != gate.head.in()) throw DimensionError("evolution_scores: feature width mismatch");
  Tensor logits = gate.head(features);
  Tensor gap = sub(slice_cols(logits, gate.idx_pos, gate.idx_pos + 1), slice_cols(logits, gate.idx_neg, gate.idx_neg + 1));
  return clamp(sigmoid(gap), kScoreMargin, 1.0 - kScoreMargin);
}

/// Feature' = score * feature, row by row.
inline Tensor refine_features(const Tensor& features, const Tensor& scores) {
  if (scores.size() != features.rows())
    throw DimensionError("refine_features: " + std::to_string(scores.size()) + " scores for " +
                         std::to_string(features.rows()) + " features");
  return scale_rows(features, scores.cols() == 1 ? scores : transpose(scores));
}

/// Cross-entropy of the last position's label-token logits against `g`.
inline Tensor task_loss(const Tensor& hidden_states, std::size_t g, const Linear& head, const Vocabulary& vocab) {
  if (g >= vocab.num_labels) throw InvalidArgument("task_loss: label " + std::to_string(g) + " out of range");
  const Tensor last = slice_rows(hidden_states, hidden_states.rows() - 1, hidden_states.rows());
  const Tensor logits = slice_cols(head(last), vocab.label_token(0), vocab.label_token(vocab.num_labels));
  return cross_entropy(logits, g);
}

/// L = L_task + beta * L_relation.
inline Tensor total_loss(const Tensor& task, const Tensor& relation, double beta) {
  if (beta < 0.0) throw InvalidArgument("total_loss: beta must be >= 0");
  if (!relation.defined()) return task;
  return add(task, scale(relation, beta));
}

}  // namespace hier
