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
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "hier/datamodel/types.hpp"
#include "hier/error.hpp"

namespace hier {

struct SyntheticOptions {
  std::size_t n_classes = 4;
  std::size_t samples_per_class = 50;
  std::size_t d = 16;
  std::size_t tokens_per_sample = 12;
  double noise_std = 0.1;
  std::uint64_t seed = 0;
  // Fraction of each sample's tokens drawn from other classes' anchors.
  double distractor_fraction = 0.25;
};

/// Class-anchor mixture: every class gets a random unit anchor, which doubles
/// as its label embedding. A sample's tokens are its anchor plus isotropic
/// Gaussian noise, except for floor(distractor_fraction * n) tokens centred on
/// other anchors. Pure function of `options`.
inline Dataset generate_synthetic(const SyntheticOptions& options) {
  if (options.n_classes < 2) throw InvalidArgument("generate_synthetic: n_classes must be >= 2");
  if (options.d < 4) throw InvalidArgument("generate_synthetic: d must be >= 4");
  if (options.samples_per_class == 0 || options.tokens_per_sample == 0)
    throw InvalidArgument("generate_synthetic: empty samples requested");
  if (options.noise_std < 0.0) throw InvalidArgument("generate_synthetic: noise_std must be >= 0");
  if (options.distractor_fraction < 0.0 || options.distractor_fraction >= 0.5)
    throw InvalidArgument("generate_synthetic: distractor_fraction must lie in [0, 0.5)");

  const std::size_t d = options.d;
  const std::size_t n = options.tokens_per_sample;
  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Dataset ds;
  ds.labels.d = d;
  for (std::size_t c = 0; c < options.n_classes; ++c) {
    std::vector<double> anchor(d);
    double norm = 0.0;
    while (norm < 1e-6) {
      for (double& v : anchor) v = gauss(rng);
      norm = 0.0;
      for (double v : anchor) norm += v * v;
      norm = std::sqrt(norm);
    }
    for (double& v : anchor) v /= norm;
    ds.labels.names.push_back("intent_" + std::to_string(c));
    ds.labels.embeddings.insert(ds.labels.embeddings.end(), anchor.begin(), anchor.end());
  }

  const auto n_distract = static_cast<std::size_t>(options.distractor_fraction * static_cast<double>(n));
  std::uniform_int_distribution<std::size_t> other_class(0, options.n_classes - 2);
  for (std::size_t c = 0; c < options.n_classes; ++c) {
    for (std::size_t s = 0; s < options.samples_per_class; ++s) {
      std::vector<std::size_t> sources(n, c);
      for (std::size_t t = 0; t < n_distract; ++t) {
        const std::size_t o = other_class(rng);
        sources[t] = o >= c ? o + 1 : o;
      }
      std::shuffle(sources.begin(), sources.end(), rng);

      std::vector<double> tokens(n * d);
      for (std::size_t t = 0; t < n; ++t) {
        const auto anchor = ds.labels.embedding(sources[t]);
        for (std::size_t j = 0; j < d; ++j) {
          const double noise = options.noise_std > 0.0 ? options.noise_std * gauss(rng) : 0.0;
          tokens[t * d + j] = anchor[j] + noise;
        }
      }
      Sample sample;
      sample.sequence = TokenSequence::from_rows(d, std::move(tokens), (n + 1) / 2);
      sample.label = c;
      sample.id = "syn-" + std::to_string(c) + "-" + std::to_string(s);
      ds.samples.push_back(std::move(sample));
    }
  }
  std::shuffle(ds.samples.begin(), ds.samples.end(), rng);
  return ds;
}

struct DatasetSplits {
  Dataset train;
  Dataset validation;
  Dataset test;
};

/// Stratified split: within each class, the first round(train_fraction * m)
/// samples (after a seeded shuffle) go to train, the next
/// round(validation_fraction * m) to validation, the rest to test.
inline DatasetSplits split_dataset(const Dataset& ds, double train_fraction, double validation_fraction,
                                   std::uint64_t seed) {
  if (train_fraction <= 0.0 || validation_fraction < 0.0 || train_fraction + validation_fraction > 1.0)
    throw InvalidArgument("split_dataset: fractions must be positive and sum to at most 1");
  std::vector<std::vector<std::size_t>> by_class(ds.num_classes());
  for (std::size_t i = 0; i < ds.samples.size(); ++i) by_class.at(ds.samples[i].label).push_back(i);

  DatasetSplits out;
  out.train.labels = out.validation.labels = out.test.labels = ds.labels;
  out.train.split = Split::kTrain;
  out.validation.split = Split::kValidation;
  out.test.split = Split::kTest;
  std::mt19937_64 rng(seed);
  for (auto& members : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    const auto m = static_cast<double>(members.size());
    const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * m));
    const auto n_val = std::min(members.size() - std::min(n_train, members.size()),
                                static_cast<std::size_t>(std::llround(validation_fraction * m)));
    for (std::size_t r = 0; r < members.size(); ++r) {
      Dataset& target = r < n_train ? out.train : (r < n_train + n_val ? out.validation : out.test);
      target.samples.push_back(ds.samples[members[r]]);
    }
  }
  // Interleave classes within each split.
  for (Dataset* part : {&out.train, &out.validation, &out.test})
    std::shuffle(part->samples.begin(), part->samples.end(), rng);
  return out;
}

}  // namespace hier
