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
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hier/config.hpp"
#include "hier/datamodel.hpp"
#include "hier/error.hpp"
#include "hier/harness/checkpoint.hpp"
#include "hier/harness/metrics.hpp"
#include "hier/harness/optimizer.hpp"
#include "hier/model.hpp"

namespace hier {

/// Builds the train/validation/test splits described by `config`.
inline DatasetSplits load_data(const Config& config) {
  Dataset all;
  if (!config.hse_path.empty()) {
    all = ingest_embeddings(config.hse_path);
  } else {
    SyntheticOptions o;
    o.n_classes = config.synthetic_classes;
    o.samples_per_class = config.synthetic_samples_per_class;
    o.d = config.d;
    o.tokens_per_sample = config.synthetic_tokens;
    o.noise_std = config.synthetic_noise;
    o.distractor_fraction = config.synthetic_distractors;
    o.seed = config.data_seed;
    all = generate_synthetic(o);
  }
  return split_dataset(all, config.train_fraction, config.validation_fraction, config.data_seed);
}

struct Evaluation {
  Metrics metrics;
  double loss = 0.0;  // mean total loss
  std::vector<std::size_t> predictions;
};

inline Evaluation evaluate(const HierModel& model, const Dataset& data) {
  if (data.labels.names != model.labels().names) throw ValidationError("evaluate: label-set mismatch");
  Evaluation ev;
  std::vector<std::size_t> truth;
  for (const auto& s : data.samples) {
    ForwardOptions options;
    options.relation_loss = model.config().beta > 0.0;
    const ForwardResult r = model.forward(s, options);
    ev.loss += total_loss(cross_entropy(r.class_logits, s.label), r.relation_loss, model.config().beta).item();
    ev.predictions.push_back(r.prediction);
    truth.push_back(s.label);
  }
  if (!data.samples.empty()) ev.loss /= static_cast<double>(data.samples.size());
  ev.metrics = compute_metrics(truth, ev.predictions, data.num_classes());
  return ev;
}

inline Metrics evaluate(const Checkpoint& checkpoint, const Dataset& data) {
  if (data.labels.names != checkpoint.label_names) throw ValidationError("evaluate: label-set mismatch");
  return evaluate(load_model(checkpoint, data.labels), data).metrics;
}

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double validation_loss = 0.0;
  Metrics validation;
  double alpha = 0.0;
};

inline nlohmann::json to_json(const EpochRecord& r) {
  return {{"epoch", r.epoch},
          {"train_loss", r.train_loss},
          {"validation_loss", r.validation_loss},
          {"validation", to_json(r.validation)},
          {"alpha", r.alpha}};
}

struct TrainResult {
  Checkpoint checkpoint;  // validation-best parameters
  std::size_t best_epoch = 0;
  std::vector<EpochRecord> history;
};

/// Minimizes L_task + beta * L_relation with AdamW over mini-batches.
/// After each epoch the model is scored on `validation` (on `train` when
/// validation is empty); the returned checkpoint is the epoch with the best
/// accuracy, ties going to the lower validation loss, then the earlier epoch.
inline TrainResult train(const Config& config, const Dataset& train_set, const Dataset& validation,
                         const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  if (train_set.empty()) throw InvalidArgument("train: empty training set");
  HierModel model(config, train_set.labels);
  AdamW optimizer(model.trainable_parameters(),
                  {config.learning_rate, 0.9, 0.999, 1e-8, config.weight_decay});
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(train_set.samples.size());
  std::iota(order.begin(), order.end(), 0);
  const Dataset& selection_set = validation.empty() ? train_set : validation;

  TrainResult result;
  double best_acc = -1.0, best_loss = 0.0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      optimizer.zero_grad();
      try {
        Tensor batch_loss;
        for (std::size_t b = start; b < end; ++b) {
          const Sample& s = train_set.samples[order[b]];
          Tensor l = model.loss(s);
          if (!std::isfinite(l.item())) throw NumericError("non-finite loss");
          epoch_loss += l.item();
          batch_loss = batch_loss.defined() ? add(batch_loss, l) : l;
        }
        scale(batch_loss, 1.0 / static_cast<double>(end - start)).backward();
      } catch (const NumericError& e) {
        throw DivergenceError("train: diverged at epoch " + std::to_string(epoch) + ", batch starting at sample " +
                              train_set.samples[order[start]].id + " (step " + std::to_string(optimizer.steps() + 1) +
                              "): " + e.what());
      }
      optimizer.step();
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = epoch_loss / static_cast<double>(order.size());
    const Evaluation ev = evaluate(model, selection_set);
    rec.validation_loss = ev.loss;
    rec.validation = ev.metrics;
    rec.alpha = model.alpha();
    if (!std::isfinite(rec.train_loss) || !std::isfinite(rec.validation_loss))
      throw DivergenceError("train: non-finite loss after epoch " + std::to_string(epoch));
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (ev.metrics.acc > best_acc || (ev.metrics.acc == best_acc && ev.loss < best_loss)) {
      best_acc = ev.metrics.acc;
      best_loss = ev.loss;
      result.best_epoch = epoch;
      result.checkpoint = snapshot(model);
    }
  }
  return result;
}

struct SweepResult {
  std::vector<std::uint64_t> seeds;
  std::vector<Metrics> runs;  // test metrics per seed
  MetricSummary summary;
};

/// Trains and tests once per seed (the seed drives initialization, batching
/// and clustering; the data split is fixed by config.data_seed).
inline SweepResult run_seed_sweep(const Config& config, const std::vector<std::uint64_t>& seeds) {
  if (seeds.size() < 2) throw InvalidArgument("run_seed_sweep: need at least 2 seeds");
  const DatasetSplits data = load_data(config);
  SweepResult out;
  out.seeds = seeds;
  for (std::uint64_t seed : seeds) {
    Config c = config;
    c.seed = seed;
    const TrainResult trained = train(c, data.train, data.validation);
    out.runs.push_back(evaluate(trained.checkpoint, data.test));
  }
  out.summary = summarize(out.runs);
  return out;
}

}  // namespace hier
