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

#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "hier/datamodel.hpp"
#include "hier/numerics/vector_math.hpp"

namespace hier {
namespace {

std::size_t nearest_anchor(std::span<const double> token, const LabelSet& labels) {
  std::size_t best = 0;
  double best_cos = -2.0;
  for (std::size_t c = 0; c < labels.size(); ++c) {
    const double cs = vmath::cosine(token, labels.embedding(c));
    if (cs > best_cos) {
      best_cos = cs;
      best = c;
    }
  }
  return best;
}

TEST(SyntheticTest, NoiselessTokensEqualTheirAnchor) {
  SyntheticOptions o;
  o.noise_std = 0.0;
  o.distractor_fraction = 0.0;
  o.samples_per_class = 5;
  const Dataset ds = generate_synthetic(o);
  for (const auto& s : ds.samples)
    for (std::size_t t = 0; t < s.sequence.size(); ++t) {
      const auto tok = s.sequence.token(t);
      const auto anchor = ds.labels.embedding(s.label);
      for (std::size_t j = 0; j < ds.d(); ++j) EXPECT_EQ(tok[j], anchor[j]);
    }
}

TEST(SyntheticTest, NoiselessNearestAnchorVoteIsPerfectWithDistractors) {
  SyntheticOptions o;
  o.noise_std = 0.0;
  const Dataset ds = generate_synthetic(o);
  for (const auto& s : ds.samples) {
    std::vector<std::size_t> votes(ds.num_classes(), 0);
    for (std::size_t t = 0; t < s.sequence.size(); ++t) ++votes[nearest_anchor(s.sequence.token(t), ds.labels)];
    EXPECT_EQ(static_cast<std::size_t>(std::max_element(votes.begin(), votes.end()) - votes.begin()), s.label);
  }
}

TEST(SyntheticTest, DistractorFractionIsHonoured) {
  SyntheticOptions o;
  o.noise_std = 0.0;
  o.tokens_per_sample = 12;
  const Dataset ds = generate_synthetic(o);
  for (const auto& s : ds.samples) {
    std::size_t foreign = 0;
    for (std::size_t t = 0; t < s.sequence.size(); ++t) foreign += nearest_anchor(s.sequence.token(t), ds.labels) != s.label;
    EXPECT_EQ(foreign, 3u);
  }
}

TEST(SyntheticTest, SameSeedIsBitIdentical) {
  SyntheticOptions o;
  o.seed = 42;
  const Dataset a = generate_synthetic(o);
  const Dataset b = generate_synthetic(o);
  ASSERT_EQ(a.samples.size(), b.samples.size());
  EXPECT_EQ(a.labels.embeddings, b.labels.embeddings);
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    EXPECT_EQ(a.samples[i].id, b.samples[i].id);
    EXPECT_EQ(a.samples[i].sequence.tokens, b.samples[i].sequence.tokens);
  }
  o.seed = 43;
  EXPECT_NE(generate_synthetic(o).labels.embeddings, a.labels.embeddings);
}

TEST(SyntheticTest, ShapesAndModalities) {
  SyntheticOptions o;
  o.tokens_per_sample = 7;
  const Dataset ds = generate_synthetic(o);
  EXPECT_EQ(ds.samples.size(), o.n_classes * o.samples_per_class);
  for (const auto& s : ds.samples) {
    EXPECT_EQ(s.sequence.n_text, 4u);
    EXPECT_EQ(s.sequence.n_video, 3u);
    EXPECT_EQ(s.sequence.modality_tags.front(), Modality::kText);
    EXPECT_EQ(s.sequence.modality_tags.back(), Modality::kVideo);
  }
  EXPECT_NO_THROW(validate(ds));
}

TEST(SyntheticTest, InvalidSizesThrow) {
  SyntheticOptions o;
  o.n_classes = 1;
  EXPECT_THROW(generate_synthetic(o), InvalidArgument);
  o = {};
  o.d = 3;
  EXPECT_THROW(generate_synthetic(o), InvalidArgument);
  o = {};
  o.tokens_per_sample = 0;
  EXPECT_THROW(generate_synthetic(o), InvalidArgument);
}

// Oracle: multinomial logistic regression on the mean token, plain batch
// gradient descent.
double linear_probe_train_accuracy(const Dataset& ds) {
  const std::size_t d = ds.d(), L = ds.num_classes(), n = ds.samples.size();
  std::vector<std::vector<double>> x(n, std::vector<double>(d + 1, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    const auto& seq = ds.samples[i].sequence;
    for (std::size_t t = 0; t < seq.size(); ++t)
      for (std::size_t j = 0; j < d; ++j) x[i][j] += seq.token(t)[j] / static_cast<double>(seq.size());
    x[i][d] = 1.0;
  }
  std::vector<std::vector<double>> w(L, std::vector<double>(d + 1, 0.0));
  for (int step = 0; step < 500; ++step) {
    std::vector<std::vector<double>> grad(L, std::vector<double>(d + 1, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> logits(L);
      for (std::size_t c = 0; c < L; ++c) logits[c] = vmath::dot(w[c], x[i]);
      const auto p = vmath::softmax(logits);
      for (std::size_t c = 0; c < L; ++c) {
        const double e = p[c] - (c == ds.samples[i].label ? 1.0 : 0.0);
        for (std::size_t j = 0; j <= d; ++j) grad[c][j] += e * x[i][j] / static_cast<double>(n);
      }
    }
    for (std::size_t c = 0; c < L; ++c)
      for (std::size_t j = 0; j <= d; ++j) w[c][j] -= 1.0 * grad[c][j];
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < L; ++c)
      if (vmath::dot(w[c], x[i]) > vmath::dot(w[best], x[i])) best = c;
    correct += best == ds.samples[i].label;
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

TEST(SyntheticTest, LinearProbeOnMeanTokenSeparatesClasses) {
  SyntheticOptions o;
  o.n_classes = 4;
  o.samples_per_class = 50;
  o.d = 16;
  o.noise_std = 0.1;
  EXPECT_GE(linear_probe_train_accuracy(generate_synthetic(o)), 0.99);
}

TEST(SplitTest, StratifiedAndDisjoint) {
  SyntheticOptions o;
  o.samples_per_class = 20;
  const Dataset ds = generate_synthetic(o);
  const auto splits = split_dataset(ds, 0.7, 0.15, 1);
  EXPECT_EQ(splits.train.samples.size(), 4u * 14u);
  EXPECT_EQ(splits.validation.samples.size(), 4u * 3u);
  EXPECT_EQ(splits.test.samples.size(), 4u * 3u);
  std::set<std::string> ids;
  for (const Dataset* part : {&splits.train, &splits.validation, &splits.test})
    for (const auto& s : part->samples) EXPECT_TRUE(ids.insert(s.id).second) << s.id;
  EXPECT_EQ(splits.test.split, Split::kTest);
  EXPECT_THROW(split_dataset(ds, 0.9, 0.2, 1), InvalidArgument);
}

Dataset small_dataset() {
  SyntheticOptions o;
  o.n_classes = 3;
  o.samples_per_class = 2;
  o.d = 5;
  o.tokens_per_sample = 4;
  o.seed = 11;
  return generate_synthetic(o);
}

TEST(HseTest, RoundTripPreservesEveryF32Bit) {
  const Dataset original = small_dataset();
  const auto bytes = hse::encode(original);
  const Dataset decoded = hse::decode(bytes);
  EXPECT_EQ(hse::encode(decoded), bytes);
  ASSERT_EQ(decoded.samples.size(), original.samples.size());
  EXPECT_EQ(decoded.labels.names, original.labels.names);
  for (std::size_t i = 0; i < original.samples.size(); ++i) {
    const auto& a = original.samples[i];
    const auto& b = decoded.samples[i];
    EXPECT_EQ(a.id, b.id);
    EXPECT_EQ(a.label, b.label);
    EXPECT_EQ(a.sequence.n_text, b.sequence.n_text);
    for (std::size_t j = 0; j < a.sequence.tokens.size(); ++j)
      EXPECT_EQ(std::bit_cast<std::uint32_t>(static_cast<float>(a.sequence.tokens[j])),
                std::bit_cast<std::uint32_t>(static_cast<float>(b.sequence.tokens[j])));
  }
}

TEST(HseTest, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "hier_datamodel_test.hse";
  const Dataset original = small_dataset();
  hse::write_file(original, path);
  const Dataset loaded = ingest_embeddings(path);
  EXPECT_EQ(hse::encode(loaded), hse::encode(original));
  std::filesystem::remove(path);
}

TEST(HseTest, HeaderLayoutIsLittleEndian) {
  const auto bytes = hse::encode(small_dataset());
  ASSERT_GE(bytes.size(), 16u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "HSE1");
  EXPECT_EQ(bytes[4], 1);  // version
  EXPECT_EQ(bytes[8], 5);  // d
  EXPECT_EQ(bytes[12], 3);  // L
  EXPECT_EQ(bytes[5] | bytes[6] | bytes[7], 0);
}

TEST(HseTest, TruncationReportsByteOffset) {
  const auto bytes = hse::encode(small_dataset());
  for (std::size_t cut : {std::size_t{2}, std::size_t{10}, std::size_t{30}, bytes.size() / 2, bytes.size() - 1}) {
    const std::vector<std::uint8_t> partial(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
    try {
      hse::decode(partial);
      FAIL() << "no error at cut " << cut;
    } catch (const ParseError& e) {
      EXPECT_LE(e.offset(), cut);
      EXPECT_NE(std::string(e.what()).find("byte offset " + std::to_string(e.offset())), std::string::npos);
      EXPECT_NE(std::string(e.what()).find("truncated"), std::string::npos) << e.what();
    }
  }
}

TEST(HseTest, BadMagicAndVersionAreRejected) {
  auto bytes = hse::encode(small_dataset());
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(hse::decode(bad_magic), ParseError);
  auto bad_version = bytes;
  bad_version[4] = 2;
  try {
    hse::decode(bad_version);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), 4u);
  }
  bytes.push_back(0);
  EXPECT_THROW(hse::decode(bytes), ParseError);
}

TEST(HseTest, NanTokenIsRejectedWithSampleId) {
  const Dataset ds = small_dataset();
  auto bytes = hse::encode(ds);
  // Offset of the first token of the first sample.
  std::size_t off = 16;
  for (const auto& name : ds.labels.names) off += 4 + name.size();
  off += ds.labels.embeddings.size() * 4 + 4;
  off += 4 + ds.samples[0].id.size() + 12;
  const auto nan_bits = std::bit_cast<std::uint32_t>(std::numeric_limits<float>::quiet_NaN());
  for (int i = 0; i < 4; ++i) bytes[off + i] = static_cast<std::uint8_t>(nan_bits >> (8 * i));
  try {
    hse::decode(bytes);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find(ds.samples[0].id), std::string::npos) << e.what();
  }
}

TEST(HseTest, LabelIndexOutOfRangeIsRejected) {
  Dataset ds = small_dataset();
  auto bytes = hse::encode(ds);
  std::size_t off = 16;
  for (const auto& name : ds.labels.names) off += 4 + name.size();
  off += ds.labels.embeddings.size() * 4 + 4;
  off += 4 + ds.samples[0].id.size() + 8;
  bytes[off] = 9;
  EXPECT_THROW(hse::decode(bytes), ValidationError);
}

TEST(ValidationTest, WidthMismatchAcrossSamplesIsRejected) {
  Dataset ds = small_dataset();
  ds.samples[1].sequence = TokenSequence::from_rows(4, std::vector<double>(8, 1.0), 1);
  EXPECT_THROW(validate(ds), ValidationError);
  EXPECT_THROW(hse::encode(ds), ValidationError);
}

TEST(ValidationTest, LabelSetInvariants) {
  Dataset ds = small_dataset();
  ds.labels.names[1] = ds.labels.names[0];
  EXPECT_THROW(validate(ds), ValidationError);
  ds = small_dataset();
  std::fill_n(ds.labels.embeddings.begin(), ds.d(), 0.0);
  EXPECT_THROW(validate(ds), ValidationError);
}

TEST(JsonlMirrorTest, OneObjectPerSample) {
  const Dataset ds = small_dataset();
  std::istringstream in(hse::to_jsonl(ds));
  std::string line;
  std::size_t count = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    const auto& s = ds.samples[count];
    EXPECT_EQ(j["id"], s.id);
    EXPECT_EQ(j["label"], s.label);
    EXPECT_EQ(j["label_name"], ds.labels.names[s.label]);
    EXPECT_EQ(j["tokens"].size(), s.sequence.size());
    EXPECT_EQ(j["tokens"][0].get<std::vector<float>>()[0], static_cast<float>(s.sequence.tokens[0]));
    ++count;
  }
  EXPECT_EQ(count, ds.samples.size());
}

}  // namespace
}  // namespace hier
