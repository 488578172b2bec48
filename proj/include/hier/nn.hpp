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
#include <random>
#include <string>
#include <vector>

#include "hier/numerics.hpp"

namespace hier {

/// A trainable tensor with a stable name, used for checkpoints and optimizers.
struct NamedParameter {
  std::string name;
  Tensor tensor;
};

using ParameterList = std::vector<NamedParameter>;

/// Fresh trainable leaf with entries uniform in [-bound, bound].
inline Tensor uniform_parameter(std::size_t rows, std::size_t cols, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> v(rows * cols);
  for (double& x : v) x = dist(rng);
  return Tensor(rows, cols, std::move(v), true);
}

/// y = x W + b with W stored in x out.
struct Linear {
  Tensor weight;  // in x out
  Tensor bias;    // 1 x out

  static Linear init(std::size_t in, std::size_t out, std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    Linear l;
    l.weight = uniform_parameter(in, out, bound, rng);
    l.bias = uniform_parameter(1, out, bound, rng);
    return l;
  }

  std::size_t in() const { return weight.rows(); }
  std::size_t out() const { return weight.cols(); }

  Tensor operator()(const Tensor& x) const { return add_row(matmul(x, weight), bias); }

  /// Independent trainable copy.
  Linear clone() const { return {weight.clone_leaf(), bias.clone_leaf()}; }

  void append_to(ParameterList& params, const std::string& prefix) const {
    params.push_back({prefix + ".weight", weight});
    params.push_back({prefix + ".bias", bias});
  }
};

}  // namespace hier
