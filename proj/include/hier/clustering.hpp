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
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "hier/datamodel/types.hpp"
#include "hier/error.hpp"
#include "hier/numerics.hpp"

// Label-guided soft spherical k-means. Every step is built from
// differentiable ops, so a loss on the final concepts back-propagates through
// the whole unrolled loop into tokens, label embeddings and alpha.

namespace hier {

/// Soft token-to-cluster memberships (n x k, rows sum to 1).
struct AssignmentMatrix {
  Tensor probs;
  std::size_t iteration = 0;
};

struct ConceptSet {
  Tensor centroids;      // k x d
  std::size_t k = 0;
  Tensor alpha;          // 1 x 1, in [0, 1]
  Tensor label_weights;  // k x L, from the last label-guidance step
};

struct ClusteringOptions {
  std::size_t k = 50;
  std::size_t iterations = 30;
  // Divide each centroid by its soft mass sum_i p(i, m).
  bool mass_normalize = false;
  // Normalize label weights over labels per centroid instead of over centroids per label.
  bool label_axis_weights = false;
  // Rescale centroids to unit length after every iteration.
  bool unit_centroids = false;
};

/// Spherical k-means++ seeding with D(z, c) = 1 - cos(z, c). The first index
/// is uniform; each later one is drawn with probability proportional to the
/// squared distance to the nearest chosen seed. Chosen tokens are never
/// repeated; if every remaining weight is zero the pick is uniform over the
/// unchosen tokens.
inline std::vector<std::size_t> seed_indices(const Tensor& tokens, std::size_t k, std::uint64_t seed) {
  const std::size_t n = tokens.rows();
  if (k == 0) throw InvalidArgument("seed_centroids: k must be >= 1");
  if (k > n) {
    throw InvalidArgument("seed_centroids: k = " + std::to_string(k) + " exceeds token count " +
                          std::to_string(n));
  }
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> chosen;
  std::vector<bool> taken(n, false);
  std::vector<double> min_dist_sq(n, std::numeric_limits<double>::infinity());

  auto take = [&](std::size_t idx) {
    chosen.push_back(idx);
    taken[idx] = true;
    for (std::size_t i = 0; i < n; ++i) {
      const double dist = std::max(0.0, 1.0 - vmath::cosine(tokens.row_values(i), tokens.row_values(idx)));
      min_dist_sq[i] = std::min(min_dist_sq[i], dist * dist);
    }
  };

  take(std::uniform_int_distribution<std::size_t>(0, n - 1)(rng));
  while (chosen.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (!taken[i]) total += min_dist_sq[i];
    std::size_t pick = n;
    if (total > 0.0) {
      const double u = std::uniform_real_distribution<double>(0.0, total)(rng);
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (taken[i] || min_dist_sq[i] == 0.0) continue;
        acc += min_dist_sq[i];
        pick = i;
        if (u < acc) break;
      }
    } else {
      std::vector<std::size_t> free;
      for (std::size_t i = 0; i < n; ++i)
        if (!taken[i]) free.push_back(i);
      pick = free[std::uniform_int_distribution<std::size_t>(0, free.size() - 1)(rng)];
    }
    take(pick);
  }
  return chosen;
}

/// Seed centroids as rows gathered from `tokens`; gradients flow back to the
/// selected tokens.
inline Tensor seed_centroids(const Tensor& tokens, std::size_t k, std::uint64_t seed) {
  return gather_rows(tokens, seed_indices(tokens, k, seed));
}

inline Tensor seed_centroids(const TokenSequence& tokens, std::size_t k, std::uint64_t seed) {
  return seed_centroids(tokens.as_tensor(), k, seed);
}

/// p(i, m) = exp(cos(z_i, c_m)) / sum_j exp(cos(z_i, c_j)).
inline AssignmentMatrix soft_assign(const Tensor& tokens, const Tensor& centroids, std::size_t iteration = 0) {
  if (tokens.cols() != centroids.cols()) throw DimensionError("soft_assign: token and centroid widths differ");
  return {softmax(cosine_matrix(tokens, centroids), Axis::kCols), iteration};
}

/// c_m = sum_i p(i, m) z_i, optionally divided by the soft mass sum_i p(i, m).
inline Tensor update_centroids(const Tensor& tokens, const AssignmentMatrix& assignments,
                               bool mass_normalize = false) {
  if (assignments.probs.rows() != tokens.rows())
    throw DimensionError("update_centroids: assignment rows must match token count");
  Tensor centroids = matmul(transpose(assignments.probs), tokens);
  if (mass_normalize) {
    centroids = scale_rows(centroids, transpose(reciprocal(column_sums(assignments.probs))));
  }
  return centroids;
}

struct GuidedCentroids {
  Tensor centroids;  // k x d
  Tensor weights;    // k x L
};

/// Label guidance. For label i and centroid m,
///   W(i, m) = exp(cos(c_m, y_i)) / sum_{j=1..k} exp(cos(c_j, y_i)),
///   c~_m = alpha * c_m + (1 - alpha) * sum_i W(i, m) y_i.
/// With `label_axis_weights` the softmax runs over labels for each centroid.
inline GuidedCentroids label_guidance(const Tensor& centroids, const Tensor& labels, const Tensor& alpha,
                                      bool label_axis_weights = false) {
  if (alpha.size() != 1) throw DimensionError("label_guidance: alpha must be a scalar");
  const double a = alpha.item();
  if (a < 0.0 || a > 1.0) throw InvalidArgument("label_guidance: alpha must lie in [0, 1]");
  if (centroids.cols() != labels.cols()) throw DimensionError("label_guidance: centroid and label widths differ");

  Tensor weights = softmax(cosine_matrix(centroids, labels), label_axis_weights ? Axis::kCols : Axis::kRows);
  Tensor anchor_mix = matmul(weights, labels);
  Tensor one_minus_alpha = affine(alpha, -1.0, 1.0);
  Tensor guided = add(mul_scalar(centroids, alpha), mul_scalar(anchor_mix, one_minus_alpha));
  return {std::move(guided), std::move(weights)};
}

/// Seeds k centroids from `tokens`, then repeats
/// {soft_assign, update_centroids, label_guidance} for options.iterations.
/// Returns the final concepts and the last assignment matrix.
inline std::pair<ConceptSet, AssignmentMatrix> cluster_from(const Tensor& tokens, const Tensor& labels,
                                                            const Tensor& alpha,
                                                            const std::vector<std::size_t>& seeds,
                                                            const ClusteringOptions& options) {
  if (options.iterations == 0) throw InvalidArgument("cluster: iterations must be >= 1");
  if (seeds.empty()) throw InvalidArgument("cluster: no seeds");
  Tensor centroids = gather_rows(tokens, seeds);
  AssignmentMatrix assignments;
  Tensor weights;
  for (std::size_t u = 1; u <= options.iterations; ++u) {
    assignments = soft_assign(tokens, centroids, u);
    centroids = update_centroids(tokens, assignments, options.mass_normalize);
    auto guided = label_guidance(centroids, labels, alpha, options.label_axis_weights);
    centroids = std::move(guided.centroids);
    weights = std::move(guided.weights);
    if (options.unit_centroids) centroids = normalize_rows(centroids);
  }
  ConceptSet concepts{centroids, seeds.size(), alpha, weights};
  return {std::move(concepts), std::move(assignments)};
}

inline std::pair<ConceptSet, AssignmentMatrix> cluster(const Tensor& tokens, const Tensor& labels,
                                                       const Tensor& alpha, const ClusteringOptions& options,
                                                       std::uint64_t seed) {
  return cluster_from(tokens, labels, alpha, seed_indices(tokens, options.k, seed), options);
}

inline std::pair<ConceptSet, AssignmentMatrix> cluster(const TokenSequence& tokens, const LabelSet& labels,
                                                       double alpha, const ClusteringOptions& options,
                                                       std::uint64_t seed) {
  return cluster(tokens.as_tensor(), labels.as_tensor(), Tensor::scalar(alpha), options, seed);
}

}  // namespace hier
