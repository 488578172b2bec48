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

#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "hier/datamodel.hpp"
#include "hier/model.hpp"
#include "hier/reasoning.hpp"
#include "test_util.hpp"

namespace hier {
namespace {

using test::random_tensor;

Tensor instruction_table(std::size_t d, std::mt19937_64& rng) { return random_tensor(kNumInstructions, d, rng); }

std::vector<double> vec(std::span<const double> s) { return {s.begin(), s.end()}; }

// Prompt assembly

TEST(PromptTest, GoldenStagedLayout) {
  std::mt19937_64 rng(1);
  const Tensor z = random_tensor(2, 3, rng);
  const Tensor c = random_tensor(2, 3, rng);
  const Tensor r = random_tensor(1, 3, rng);
  const Tensor table = instruction_table(3, rng);
  const PromptSequence p = assemble_prompt(z, c, r, table);

  using S = Stage;
  using K = SegmentKind;
  const std::vector<Segment> golden{
      {S::kCot1, K::kInstruction, 0}, {S::kCot1, K::kInstruction, 1}, {S::kCot1, K::kContext, 0},
      {S::kCot1, K::kContext, 1},     {S::kCot2, K::kInstruction, 2}, {S::kCot2, K::kInstruction, 3},
      {S::kCot2, K::kConceptSlot, 0}, {S::kCot2, K::kConceptSlot, 1}, {S::kCot3, K::kInstruction, 4},
      {S::kCot3, K::kInstruction, 3}, {S::kCot3, K::kRelationSlot, 0}, {S::kCot3, K::kInstruction, 5},
  };
  EXPECT_EQ(p.segments, golden);
  EXPECT_EQ(p.concept_slots, (std::vector<std::size_t>{6, 7}));
  EXPECT_EQ(p.relation_slots, (std::vector<std::size_t>{10}));
  ASSERT_EQ(p.vectors.rows(), 12u);
  EXPECT_EQ(vec(p.vectors.row_values(2)), vec(z.row_values(0)));
  EXPECT_EQ(vec(p.vectors.row_values(7)), vec(c.row_values(1)));
  EXPECT_EQ(vec(p.vectors.row_values(10)), vec(r.row_values(0)));
  EXPECT_EQ(vec(p.vectors.row_values(9)), vec(table.row_values(3)));
  EXPECT_EQ(vec(p.vectors.row_values(11)), vec(table.row_values(5)));
}

TEST(PromptTest, SlotCountIsKPlusL) {
  std::mt19937_64 rng(2);
  const Tensor table = instruction_table(4, rng);
  for (std::size_t k : {1u, 3u, 6u})
    for (std::size_t l : {0u, 2u, 5u}) {
      const Tensor rel = l > 0 ? random_tensor(l, 4, rng) : Tensor();
      const auto p = assemble_prompt(random_tensor(5, 4, rng), random_tensor(k, 4, rng), rel, table);
      EXPECT_EQ(p.slot_count(), k + l);
      EXPECT_EQ(p.size(), 2 + 5 + 2 + k + 2 + l + 1);
    }
}

TEST(PromptTest, EmptyRelationsKeepCot3Instructions) {
  std::mt19937_64 rng(3);
  const auto p = assemble_prompt(random_tensor(3, 4, rng), random_tensor(2, 4, rng), Tensor(), instruction_table(4, rng));
  EXPECT_TRUE(p.relation_slots.empty());
  std::size_t cot3_instructions = 0;
  for (const auto& s : p.segments) {
    EXPECT_NE(s.kind, SegmentKind::kRelationSlot);
    cot3_instructions += s.stage == Stage::kCot3 && s.kind == SegmentKind::kInstruction;
  }
  EXPECT_EQ(cot3_instructions, 3u);
}

TEST(PromptTest, StageOrderAndSlotPlacement) {
  std::mt19937_64 rng(4);
  const auto p = assemble_prompt(random_tensor(6, 4, rng), random_tensor(3, 4, rng), random_tensor(2, 4, rng),
                                 instruction_table(4, rng));
  for (std::size_t i = 1; i < p.size(); ++i) EXPECT_LE(p.segments[i - 1].stage, p.segments[i].stage);
  for (const auto& s : p.segments) {
    if (s.kind == SegmentKind::kConceptSlot) {
      EXPECT_EQ(s.stage, Stage::kCot2);
    }
    if (s.kind == SegmentKind::kRelationSlot) {
      EXPECT_EQ(s.stage, Stage::kCot3);
    }
  }
  for (std::size_t m = 0; m < p.concept_slots.size(); ++m) EXPECT_EQ(p.segments[p.concept_slots[m]].source, m);
}

TEST(PromptTest, CollapsedLayout) {
  std::mt19937_64 rng(5);
  const auto p = assemble_prompt(random_tensor(2, 3, rng), random_tensor(2, 3, rng), random_tensor(1, 3, rng),
                                 instruction_table(3, rng), PromptTemplate::kCollapsed);
  ASSERT_EQ(p.size(), 7u);
  EXPECT_EQ(p.segments.front(), (Segment{Stage::kCot1, SegmentKind::kInstruction, 6}));
  EXPECT_EQ(p.segments.back(), (Segment{Stage::kCot3, SegmentKind::kInstruction, 5}));
  std::size_t instructions = 0;
  for (const auto& s : p.segments) instructions += s.kind == SegmentKind::kInstruction;
  EXPECT_EQ(instructions, 2u);
  EXPECT_EQ(p.concept_slots, (std::vector<std::size_t>{3, 4}));
  EXPECT_EQ(p.relation_slots, (std::vector<std::size_t>{5}));
}

TEST(PromptTest, DimensionMismatchThrows) {
  std::mt19937_64 rng(6);
  const Tensor table = instruction_table(4, rng);
  EXPECT_THROW(assemble_prompt(random_tensor(2, 4, rng), random_tensor(2, 3, rng), Tensor(), table), DimensionError);
  EXPECT_THROW(assemble_prompt(random_tensor(2, 5, rng), Tensor(), Tensor(), table), DimensionError);
}

// Backends

TEST(BackendTest, IdentityExposesInjectedConcepts) {
  std::mt19937_64 rng(7);
  const IdentityBackend backend(4, 9, rng);
  const Tensor c = random_tensor(3, 4, rng);
  const auto p = assemble_prompt(random_tensor(5, 4, rng), c, Tensor(), instruction_table(4, rng));
  const Tensor hidden = reason(p, backend);
  const Tensor features = gather_rows(hidden, p.concept_slots);
  EXPECT_EQ(vec(features.values()), vec(c.values()));
}

TEST(BackendTest, OutputLengthMatchesInput) {
  std::mt19937_64 rng(8);
  const AttentionBackend backend(6, 12, 2, rng);
  std::uniform_int_distribution<std::size_t> n(1, 12);
  for (int t = 0; t < 10; ++t) {
    const auto p = assemble_prompt(random_tensor(n(rng), 6, rng), random_tensor(n(rng), 6, rng),
                                   random_tensor(n(rng), 6, rng), instruction_table(6, rng));
    const Tensor hidden = reason(p, backend);
    EXPECT_EQ(hidden.rows(), p.size());
    EXPECT_EQ(hidden.cols(), 6u);
  }
  const auto wrong = assemble_prompt(random_tensor(2, 5, rng), Tensor(), Tensor(), instruction_table(5, rng));
  EXPECT_THROW(reason(wrong, backend), DimensionError);
}

TEST(BackendTest, AttentionIsBitDeterministicAndCausal) {
  std::mt19937_64 data(9);
  const Tensor x = random_tensor(7, 5, data);
  std::mt19937_64 r1(42), r2(42);
  const AttentionBackend a(5, 10, 2, r1);
  const AttentionBackend b(5, 10, 2, r2);
  EXPECT_EQ(vec(a.forward(x).values()), vec(b.forward(x).values()));
  auto changed = vec(x.values());
  for (std::size_t j = 0; j < 5; ++j) changed[6 * 5 + j] += 1.0;
  const Tensor h0 = a.forward(x);
  const Tensor h1 = a.forward(Tensor(7, 5, changed));
  for (std::size_t i = 0; i < 6 * 5; ++i) EXPECT_EQ(h0.values()[i], h1.values()[i]);
}

// Gate

EvolutionGate hand_gate(double pos_bias, double neg_bias) {
  EvolutionGate g;
  g.head = {Tensor(2, 3, std::vector<double>(6, 0.0), true), Tensor(1, 3, {neg_bias, pos_bias, 0.0}, true)};
  return g;
}

TEST(GateTest, EqualLogitsGiveHalf) {
  const auto s = evolution_scores(Tensor(1, 2, {0.3, -0.4}), hand_gate(0.7, 0.7));
  EXPECT_DOUBLE_EQ(s.item(), 0.5);
}

TEST(GateTest, UnitGapGivesSigmoidOfOne) {
  const auto s = evolution_scores(Tensor(1, 2, {0.3, -0.4}), hand_gate(1.0, 0.0));
  EXPECT_NEAR(s.item(), 0.7310585786, 1e-9);
}

TEST(GateTest, StrictlyIncreasingInGapAndInsideUnitInterval) {
  double prev = 0.0;
  for (double gap = -20.0; gap <= 20.0; gap += 0.25) {
    const double s = evolution_scores(Tensor(1, 2, {0, 0}), hand_gate(gap, 0.0)).item();
    EXPECT_GT(s, prev);
    EXPECT_GT(s, 0.0);
    EXPECT_LT(s, 1.0);
    prev = s;
  }
  for (double gap : {-800.0, -50.0, 50.0, 800.0}) {
    const double s = evolution_scores(Tensor(1, 2, {0, 0}), hand_gate(gap, 0.0)).item();
    EXPECT_GT(s, 0.0);
    EXPECT_LT(s, 1.0);
  }
}

TEST(GateTest, MatchesTwoWaySoftmaxOnRandomHeads) {
  std::mt19937_64 rng(10);
  EvolutionGate g;
  g.head = {random_tensor(4, 6, rng), random_tensor(1, 6, rng)};
  g.idx_pos = 4;
  g.idx_neg = 2;
  const Tensor f = random_tensor(5, 4, rng);
  const Tensor s = evolution_scores(f, g);
  const Tensor logits = g.head(f);
  ASSERT_EQ(s.rows(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    const double a = logits.at(i, 4), b = logits.at(i, 2), m = std::max(a, b);
    EXPECT_NEAR(s.at(i, 0), std::exp(a - m) / (std::exp(a - m) + std::exp(b - m)), 1e-12);
  }
}

TEST(GateTest, InvalidIndicesThrow) {
  EvolutionGate g = hand_gate(0, 0);
  g.idx_pos = g.idx_neg;
  EXPECT_THROW(evolution_scores(Tensor::zeros(1, 2), g), InvalidArgument);
  g.idx_pos = 3;
  EXPECT_THROW(evolution_scores(Tensor::zeros(1, 2), g), InvalidArgument);
}

TEST(GateTest, CopyIsIndependentOfBackendHead) {
  std::mt19937_64 rng(11);
  const IdentityBackend backend(3, 6, rng);
  EvolutionGate g = EvolutionGate::copy_from(backend);
  EXPECT_EQ(vec(g.head.weight.values()), vec(backend.generation_head().weight.values()));
  g.head.weight.mutable_values()[0] += 1.0;
  EXPECT_NE(g.head.weight.values()[0], backend.generation_head().weight.values()[0]);
  EXPECT_TRUE(g.head.weight.requires_grad());
  EXPECT_FALSE(EvolutionGate::copy_from(backend, true).head.weight.requires_grad());
}

TEST(RefineTest, UnitScoreIsIdentityAndHalfHalvesNorm) {
  std::mt19937_64 rng(12);
  const Tensor f = random_tensor(3, 5, rng);
  EXPECT_EQ(vec(refine_features(f, Tensor(3, 1, {1, 1, 1})).values()), vec(f.values()));
  const Tensor half = refine_features(f, Tensor(1, 3, {0.5, 0.5, 0.5}));
  for (std::size_t i = 0; i < 3; ++i)
    EXPECT_DOUBLE_EQ(vmath::norm(half.row_values(i)), 0.5 * vmath::norm(f.row_values(i)));
  EXPECT_THROW(refine_features(f, Tensor(2, 1, {1, 1})), DimensionError);
}

TEST(RefineTest, GateGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(13);
  EvolutionGate g;
  g.head = {random_tensor(6, 8, rng, true), random_tensor(1, 8, rng, true)};
  const Tensor f = random_tensor(4, 6, rng);
  const Tensor w = random_tensor(4, 6, rng);
  const auto r = check_gradients([&] { return sum(mul(refine_features(f, evolution_scores(f, g)), w)); },
                                 {g.head.weight, g.head.bias});
  EXPECT_LT(r.max_relative_error, 1e-4);
}

// Losses

TEST(TaskLossTest, UniformLogitsGiveLnL) {
  std::mt19937_64 rng(14);
  const Vocabulary vocab{5, kNumInstructions};
  Linear head{Tensor::zeros(4, vocab.size()), Tensor::zeros(1, vocab.size())};
  EXPECT_NEAR(task_loss(random_tensor(6, 4, rng), 3, head, vocab).item(), std::log(5.0), 1e-12);
  EXPECT_THROW(task_loss(random_tensor(6, 4, rng), 5, head, vocab), InvalidArgument);
}

TEST(TaskLossTest, OracleBackendIsNearlyLossless) {
  const std::size_t L = 4, d = 4;
  const Vocabulary vocab{L, kNumInstructions};
  std::vector<double> w(d * vocab.size(), 0.0);
  for (std::size_t c = 0; c < L; ++c) w[c * vocab.size() + vocab.label_token(c)] = 12.0;
  const Linear head{Tensor(d, vocab.size(), w), Tensor::zeros(1, vocab.size())};
  for (std::size_t g = 0; g < L; ++g) {
    std::vector<double> h(3 * d, 0.3);
    for (std::size_t j = 0; j < d; ++j) h[2 * d + j] = j == g ? 1.0 : 0.0;
    EXPECT_LT(task_loss(Tensor(3, d, h), g, head, vocab).item(), 0.01);
  }
}

TEST(TaskLossTest, BatchOfIdenticalSamplesEqualsSingle) {
  std::mt19937_64 rng(15);
  const Tensor row = random_tensor(1, 6, rng);
  const Tensor batch = concat_rows({row, row, row, row});
  const std::vector<std::size_t> targets(4, 2);
  EXPECT_NEAR(cross_entropy(batch, targets).item(), cross_entropy(row, 2).item(), 1e-12);
}

TEST(TotalLossTest, Examples) {
  EXPECT_DOUBLE_EQ(total_loss(Tensor::scalar(1.7), Tensor::scalar(3.0), 0.0).item(), 1.7);
  EXPECT_NEAR(total_loss(Tensor::scalar(1.0), Tensor::scalar(2.0), 0.01).item(), 1.02, 1e-15);
  EXPECT_DOUBLE_EQ(total_loss(Tensor::scalar(0.4), Tensor(), 0.01).item(), 0.4);
  EXPECT_THROW(total_loss(Tensor::scalar(1.0), Tensor::scalar(1.0), -0.1), InvalidArgument);
}

// Whole pipeline

Dataset tiny_dataset(std::size_t d, std::size_t tokens, std::size_t classes) {
  SyntheticOptions o;
  o.n_classes = classes;
  o.samples_per_class = 2;
  o.d = d;
  o.tokens_per_sample = tokens;
  o.seed = 3;
  return generate_synthetic(o);
}

Config tiny_config(std::size_t k, std::size_t l) {
  Config c;
  c.k = k;
  c.l = l;
  c.iterations = 5;
  c.seed = 1;
  return c;
}

TEST(PipelineTest, EqualResponseLogitsMatchHalfScores) {
  const Dataset ds = tiny_dataset(8, 6, 3);
  HierModel model(tiny_config(3, 2), ds.labels);
  auto& head = model.gate().head;
  auto w = head.weight.mutable_values();
  const std::size_t V = head.out();
  for (std::size_t r = 0; r < head.in(); ++r) w[r * V + Vocabulary::kAffirmative] = w[r * V + Vocabulary::kNegative];
  auto b = head.bias.mutable_values();
  b[Vocabulary::kAffirmative] = b[Vocabulary::kNegative];
  for (const auto& s : ds.samples) {
    const auto gated = model.forward(s);
    const auto fixed = model.forward(s, {.fixed_score = 0.5});
    for (double sc : gated.concept_scores) EXPECT_DOUBLE_EQ(sc, 0.5);
    for (std::size_t c = 0; c < gated.class_logits.size(); ++c)
      EXPECT_NEAR(gated.class_logits.values()[c], fixed.class_logits.values()[c], 1e-9);
  }
}

TEST(PipelineTest, EveryAblationRunsWithItsStructure) {
  const Dataset ds = tiny_dataset(8, 6, 3);
  const Sample& s = ds.samples[0];
  for (Ablation a : {Ablation::kNone, Ablation::kConcept, Ablation::kRelation, Ablation::kCot, Ablation::kEvolution}) {
    HierModel model(with_ablation(tiny_config(3, 2), a), ds.labels);
    const auto r = model.forward(s, {.relation_loss = true, .fixed_score = std::nullopt});
    EXPECT_EQ(r.class_logits.size(), 3u);
    EXPECT_TRUE(std::isfinite(model.loss(s).item()));
    switch (a) {
      case Ablation::kNone:
        EXPECT_EQ(r.prompt.concept_slots.size(), 3u);
        EXPECT_EQ(r.prompt.relation_slots.size(), 1u);  // floor(0.5 * 3 pairs)
        EXPECT_TRUE(r.relation_loss.defined());
        break;
      case Ablation::kConcept:
        EXPECT_TRUE(r.prompt.concept_slots.empty());
        EXPECT_FALSE(r.concepts.defined());
        EXPECT_EQ(r.relations.size(), 2u);  // ratio 0.5 of 15 token pairs, capped at l = 2
        break;
      case Ablation::kRelation:
        EXPECT_TRUE(r.prompt.relation_slots.empty());
        EXPECT_TRUE(r.relations.empty());
        EXPECT_FALSE(r.relation_loss.defined());
        break;
      case Ablation::kCot: {
        std::size_t instructions = 0;
        for (const auto& seg : r.prompt.segments) instructions += seg.kind == SegmentKind::kInstruction;
        EXPECT_EQ(instructions, 2u);
        break;
      }
      case Ablation::kEvolution:
        for (double sc : r.concept_scores) EXPECT_EQ(sc, 1.0);
        for (double sc : r.relation_scores) EXPECT_EQ(sc, 1.0);
        break;
    }
  }
  EXPECT_THROW(parse_ablation("bogus"), InvalidArgument);
}

TEST(PipelineTest, ForwardIsDeterministic) {
  const Dataset ds = tiny_dataset(8, 6, 3);
  HierModel a(tiny_config(3, 2), ds.labels);
  HierModel b(tiny_config(3, 2), ds.labels);
  for (const auto& s : ds.samples)
    EXPECT_EQ(vec(a.forward(s).class_logits.values()), vec(b.forward(s).class_logits.values()));
}

TEST(PipelineTest, WidthMismatchIsRejected) {
  const Dataset ds = tiny_dataset(8, 6, 3);
  const HierModel model(tiny_config(3, 2), ds.labels);
  Sample bad = ds.samples[0];
  bad.sequence = TokenSequence::from_rows(4, std::vector<double>(24, 0.5), 3);
  EXPECT_THROW(model.forward(bad), DimensionError);
}

TEST(PipelineTest, EndToEndGradientPerParameterGroup) {
  const Dataset ds = tiny_dataset(8, 4, 2);
  Config cfg = tiny_config(2, 1);
  cfg.iterations = 30;
  cfg.beta = 0.5;
  const HierModel model(cfg, ds.labels);
  const Sample& s = ds.samples[0];
  const auto params = model.trainable_parameters();
  std::vector<std::string> groups{"clustering.", "relation.compress", "relation.concept_head", "relation.relation_head",
                                  "prompt.", "backend.layer", "backend.head", "gate."};
  for (const auto& group : groups) {
    std::vector<Tensor> leaves;
    for (const auto& p : params)
      if (p.name.rfind(group, 0) == 0) leaves.push_back(p.tensor);
    ASSERT_FALSE(leaves.empty()) << group;
    GradientCheckOptions opt;
    opt.max_coordinates = 12;
    const auto r = check_gradients([&] { return model.loss(s); }, leaves, opt);
    EXPECT_LT(r.max_relative_error, 1e-4) << group << " analytic " << r.analytic << " numeric " << r.numeric;
    EXPECT_GT(r.probes, 0u);
  }
}

}  // namespace
}  // namespace hier
