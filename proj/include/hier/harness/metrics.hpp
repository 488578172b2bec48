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
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hier/error.hpp"

namespace hier {

/// confusion[truth][prediction] counts.
using ConfusionMatrix = std::vector<std::vector<std::size_t>>;

struct Metrics {
  double acc = 0.0;
  double macro_f1 = 0.0;
  double macro_p = 0.0;
  double macro_r = 0.0;
  double weighted_f1 = 0.0;
  double weighted_p = 0.0;
  std::vector<double> per_class_f1;
  ConfusionMatrix confusion;

  friend bool operator==(const Metrics&, const Metrics&) = default;
};

inline ConfusionMatrix confusion_matrix(std::span<const std::size_t> truth, std::span<const std::size_t> predicted,
                                        std::size_t num_classes) {
  if (truth.size() != predicted.size()) throw DimensionError("confusion_matrix: length mismatch");
  ConfusionMatrix m(num_classes, std::vector<std::size_t>(num_classes, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] >= num_classes || predicted[i] >= num_classes)
      throw InvalidArgument("confusion_matrix: class index out of range");
    ++m[truth[i]][predicted[i]];
  }
  return m;
}

namespace detail {

inline double safe_ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

}  // namespace detail

/// All metrics derive from the confusion matrix. Per-class precision, recall
/// and F1 use 0 for 0/0. Macro averages weight classes uniformly; weighted
/// averages weight by support (row sums).
inline Metrics compute_metrics(const ConfusionMatrix& confusion) {
  const std::size_t n = confusion.size();
  for (const auto& row : confusion)
    if (row.size() != n) throw DimensionError("compute_metrics: confusion matrix must be square");
  Metrics m;
  m.confusion = confusion;
  m.per_class_f1.assign(n, 0.0);
  std::vector<double> support(n, 0.0), predicted(n, 0.0);
  double total = 0.0, correct = 0.0;
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t p = 0; p < n; ++p) {
      const auto c = static_cast<double>(confusion[t][p]);
      support[t] += c;
      predicted[p] += c;
      total += c;
      if (t == p) correct += c;
    }
  m.acc = detail::safe_ratio(correct, total);
  if (n == 0) return m;
  for (std::size_t c = 0; c < n; ++c) {
    const auto tp = static_cast<double>(confusion[c][c]);
    const double precision = detail::safe_ratio(tp, predicted[c]);
    const double recall = detail::safe_ratio(tp, support[c]);
    const double f1 = detail::safe_ratio(2.0 * precision * recall, precision + recall);
    m.per_class_f1[c] = f1;
    m.macro_p += precision;
    m.macro_r += recall;
    m.macro_f1 += f1;
    m.weighted_p += detail::safe_ratio(support[c], total) * precision;
    m.weighted_f1 += detail::safe_ratio(support[c], total) * f1;
  }
  const auto dn = static_cast<double>(n);
  m.macro_p /= dn;
  m.macro_r /= dn;
  m.macro_f1 /= dn;
  return m;
}

inline Metrics compute_metrics(std::span<const std::size_t> truth, std::span<const std::size_t> predicted,
                               std::size_t num_classes) {
  return compute_metrics(confusion_matrix(truth, predicted, num_classes));
}

inline nlohmann::json to_json(const Metrics& m) {
  return {{"acc", m.acc},
          {"macro_f1", m.macro_f1},
          {"macro_p", m.macro_p},
          {"macro_r", m.macro_r},
          {"weighted_f1", m.weighted_f1},
          {"weighted_p", m.weighted_p},
          {"per_class_f1", m.per_class_f1},
          {"confusion", m.confusion}};
}

/// Mean and sample standard deviation of each scalar metric across runs.
struct MetricSummary {
  struct Stat {
    double mean = 0.0;
    double std = 0.0;
  };
  Stat acc, macro_f1, macro_p, macro_r, weighted_f1, weighted_p;
  std::size_t runs = 0;
};

inline MetricSummary::Stat mean_std(const std::vector<double>& xs) {
  MetricSummary::Stat s;
  if (xs.empty()) return s;
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return s;
  double ss = 0.0;
  for (double x : xs) ss += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  return s;
}

inline MetricSummary summarize(const std::vector<Metrics>& runs) {
  if (runs.size() < 2) throw InvalidArgument("summarize: need at least 2 runs");
  auto collect = [&](double Metrics::*field) {
    std::vector<double> xs;
    for (const auto& r : runs) xs.push_back(r.*field);
    return mean_std(xs);
  };
  MetricSummary s;
  s.acc = collect(&Metrics::acc);
  s.macro_f1 = collect(&Metrics::macro_f1);
  s.macro_p = collect(&Metrics::macro_p);
  s.macro_r = collect(&Metrics::macro_r);
  s.weighted_f1 = collect(&Metrics::weighted_f1);
  s.weighted_p = collect(&Metrics::weighted_p);
  s.runs = runs.size();
  return s;
}

inline nlohmann::json to_json(const MetricSummary& s) {
  auto stat = [](const MetricSummary::Stat& x) { return nlohmann::json{{"mean", x.mean}, {"std", x.std}}; };
  return {{"runs", s.runs},
          {"acc", stat(s.acc)},
          {"macro_f1", stat(s.macro_f1)},
          {"macro_p", stat(s.macro_p)},
          {"macro_r", stat(s.macro_r)},
          {"weighted_f1", stat(s.weighted_f1)},
          {"weighted_p", stat(s.weighted_p)}};
}

}  // namespace hier
