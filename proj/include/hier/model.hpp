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
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "hier/clustering.hpp"
#include "hier/config.hpp"
#include "hier/datamodel/types.hpp"
#include "hier/error.hpp"
#include "hier/nn.hpp"
#include "hier/numerics.hpp"
#include "hier/reasoning.hpp"
#include "hier/relations.hpp"

namespace hier {

enum class Ablation { kNone, kConcept, kRelation, kCot, kEvolution };

inline Ablation parse_ablation(std::string_view s) {
  if (s == "none") return Ablation::kNone;
  if (s == "concept") return Ablation::kConcept;
  if (s == "relation") return Ablation::kRelation;
  if (s == "cot") return Ablation::kCot;
  if (s == "evolution") return Ablation::kEvolution;
  throw InvalidArgument("unknown ablation '" + std::string(s) + "' (expected none|concept|relation|cot|evolution)");
}

/// Returns `config` with the given switch turned on.
inline Config with_ablation(Config config, Ablation which) {
  switch (which) {
    case Ablation::kNone: break;
    case Ablation::kConcept: config.ablate_concept = true; break;
    case Ablation::kRelation: config.ablate_relation = true; break;
    case Ablation::kCot: config.ablate_cot = true; break;
    case Ablation::kEvolution: config.ablate_evolution = true; break;
  }
  return config;
}

/// Stable 64-bit seed for per-sample clustering, derived from the run seed
/// and the sample id (FNV-1a followed by a splitmix64 finalizer).
inline std::uint64_t sample_seed(std::uint64_t run_seed, std::string_view id) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : id) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  std::uint64_t z = h ^ (run_seed + 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

struct ForwardOptions {
  // Build the relation auxiliary loss (needs the sample label).
  bool relation_loss = false;
  // Replace every gate score with this constant.
  std::optional<double> fixed_score;
};

struct ForwardResult {
  Tensor class_logits;   // 1 x L
  Tensor relation_loss;  // undefined unless requested and relations are active
  std::size_t prediction = 0;
  Tensor concepts;       // k x d, undefined when concepts are ablated
  std::vector<ScoredRelation> relations;  // selected, in rank order
  std::vector<double> concept_scores;
  std::vector<double> relation_scores;
  PromptSequence prompt;
};

/// The full hierarchical pipeline: clustering -> relation selection ->
/// staged prompt -> backend pass -> self-evolution gating -> backend pass ->
/// label-token prediction at the last position.
class HierModel {
 public:
  HierModel(const Config& config, LabelSet labels) : config_(config), labels_(std::move(labels)) {
    validate(config_);
    if (labels_.size() < 2) throw InvalidArgument("model: need at least 2 labels");
    config_.d = labels_.d;
    labels_tensor_ = labels_.as_tensor();
    vocab_ = {labels_.size(), kNumInstructions};

    std::mt19937_64 rng(config_.seed);
    const double a = config_.alpha_init;
    alpha_raw_ = Tensor::scalar(std::log(a / (1.0 - a)), true);
    relation_ = RelationEncoder::init(config_.d, labels_.size(), rng);
    instructions_ = uniform_parameter(kNumInstructions, config_.d, 1.0 / std::sqrt(static_cast<double>(config_.d)), rng);
    if (config_.backend == "identity") {
      backend_ = std::make_unique<IdentityBackend>(config_.d, vocab_.size(), rng);
    } else {
      backend_ = std::make_unique<AttentionBackend>(config_.d, vocab_.size(), config_.backend_layers, rng);
    }
    gate_ = EvolutionGate::copy_from(*backend_, config_.freeze_gate_head);
  }

  HierModel(HierModel&&) = default;
  HierModel& operator=(HierModel&&) = default;

  const Config& config() const { return config_; }
  const LabelSet& labels() const { return labels_; }
  const Vocabulary& vocabulary() const { return vocab_; }
  const ReasonerBackend& backend() const { return *backend_; }
  const EvolutionGate& gate() const { return gate_; }
  EvolutionGate& gate() { return gate_; }
  const RelationEncoder& relation_encoder() const { return relation_; }
  const Tensor& instruction_table() const { return instructions_; }

  Tensor alpha_tensor() const { return sigmoid(alpha_raw_); }
  double alpha() const { return alpha_tensor().item(); }

  /// Every parameter, including a frozen gate head (checkpoint order).
  ParameterList parameters() const {
    ParameterList p;
    p.push_back({"clustering.alpha_raw", alpha_raw_});
    relation_.append_to(p, "relation");
    p.push_back({"prompt.instructions", instructions_});
    backend_->append_to(p, "backend");
    gate_.head.append_to(p, "gate.head");
    return p;
  }

  ParameterList trainable_parameters() const {
    ParameterList p;
    for (auto& np : parameters())
      if (np.tensor.requires_grad()) p.push_back(np);
    return p;
  }

  ClusteringOptions clustering_options(std::size_t n_tokens) const {
    ClusteringOptions o;
    o.k = std::min(config_.k, n_tokens);
    o.iterations = config_.iterations;
    o.mass_normalize = config_.mass_normalize;
    o.label_axis_weights = config_.label_axis_weights;
    o.unit_centroids = config_.unit_centroids;
    return o;
  }

  ForwardResult forward(const Sample& sample, const ForwardOptions& options = {}) const {
    const TokenSequence& seq = sample.sequence;
    if (seq.d != config_.d)
      throw DimensionError("model: sample " + sample.id + " has width " + std::to_string(seq.d) + ", model expects " +
                           std::to_string(config_.d));
    ForwardResult out;
    const Tensor tokens = seq.as_tensor();

    // Mid level: concepts, or raw tokens when concepts are ablated.
    Tensor relation_source = tokens;
    if (!config_.ablate_concept) {
      auto [concepts, assignments] = cluster(tokens, labels_tensor_, alpha_tensor(),
                                             clustering_options(tokens.rows()), sample_seed(config_.seed, sample.id));
      out.concepts = concepts.centroids;
      relation_source = concepts.centroids;
    }

    // High level: scored and selected relations.
    Tensor relation_vectors;
    if (!config_.ablate_relation && relation_source.rows() >= 2) {
      PairScores pairs = score_all_pairs(relation_source, relation_, config_.js_mode);
      RelationSet selection = select_relations(pairs.scored, config_.retention_ratio, config_.l);
      relation_vectors = selected_vectors(pairs, selection);
      out.relations = std::move(selection.selected);
      if (options.relation_loss) out.relation_loss = relation_loss(pairs, sample.label);
    }

    out.prompt = assemble_prompt(tokens, out.concepts, relation_vectors, instructions_,
                                 config_.ablate_cot ? PromptTemplate::kCollapsed : PromptTemplate::kStaged);
    Tensor hidden = reason(out.prompt, *backend_);

    std::vector<std::size_t> slots = out.prompt.concept_slots;
    slots.insert(slots.end(), out.prompt.relation_slots.begin(), out.prompt.relation_slots.end());
    if (!slots.empty()) {
      const Tensor features = gather_rows(hidden, slots);
      std::optional<double> fixed = options.fixed_score;
      if (config_.ablate_evolution) fixed = 1.0;
      const Tensor scores =
          fixed ? Tensor(slots.size(), 1, std::vector<double>(slots.size(), *fixed)) : evolution_scores(features, gate_);
      const Tensor refined = refine_features(features, scores);

      const std::size_t nc = out.prompt.concept_slots.size();
      for (std::size_t i = 0; i < slots.size(); ++i)
        (i < nc ? out.concept_scores : out.relation_scores).push_back(scores.values()[i]);

      // Substitute refined features at their slot positions, then run the final pass.
      const std::size_t len = out.prompt.size();
      std::vector<std::size_t> source(len);
      for (std::size_t p = 0; p < len; ++p) source[p] = p;
      for (std::size_t i = 0; i < slots.size(); ++i) source[slots[i]] = len + i;
      const Tensor revised = gather_rows(concat_rows({out.prompt.vectors, refined}), std::move(source));
      hidden = backend_->forward(revised);
    }

    const Tensor last = slice_rows(hidden, hidden.rows() - 1, hidden.rows());
    out.class_logits =
        slice_cols(backend_->generation_head()(last), vocab_.label_token(0), vocab_.label_token(vocab_.num_labels));
    auto logits = out.class_logits.values();
    out.prediction = static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
    return out;
  }

  /// L_task + beta * L_relation for one labelled sample.
  Tensor loss(const Sample& sample, const ForwardOptions& base = {}) const {
    ForwardOptions options = base;
    options.relation_loss = config_.beta > 0.0;
    ForwardResult r = forward(sample, options);
    return total_loss(cross_entropy(r.class_logits, sample.label), r.relation_loss, config_.beta);
  }

 private:
  Config config_;
  LabelSet labels_;
  Tensor labels_tensor_;
  Vocabulary vocab_;
  Tensor alpha_raw_;
  RelationEncoder relation_;
  Tensor instructions_;
  std::unique_ptr<ReasonerBackend> backend_;
  EvolutionGate gate_;
};

}  // namespace hier
