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
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "hier/error.hpp"
#include "hier/numerics/tensor.hpp"

namespace hier {

/// Denominator floor for relative error, so components whose true gradient
/// is ~0 are judged on absolute error instead of amplified roundoff.
inline constexpr double kRelativeErrorFloor = 1e-5;

inline double relative_error(double analytic, double numeric) {
  const double den = std::max({std::abs(analytic), std::abs(numeric), kRelativeErrorFloor});
  return std::abs(analytic - numeric) / den;
}

struct GradientCheckOptions {
  double step = 1e-6;
  // Coordinates probed per leaf; 0 probes all of them.
  std::size_t max_coordinates = 0;
  std::uint64_t seed = 0;
};

struct GradientCheckResult {
  double max_relative_error = 0.0;
  std::size_t leaf = 0;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t probes = 0;
};

/// Compares reverse-mode gradients of the scalar `f()` with respect to each
/// leaf in `leaves` against central finite differences. `f` must read the
/// leaves it is given; their values are perturbed in place and restored.
inline GradientCheckResult check_gradients(const std::function<Tensor()>& f, std::vector<Tensor> leaves,
                                           const GradientCheckOptions& options = {}) {
  for (auto& leaf : leaves) {
    if (!leaf.is_leaf() || !leaf.requires_grad())
      throw InvalidArgument("check_gradients: every probed tensor must be a leaf requiring grad");
    leaf.zero_grad();
  }
  const Tensor y = f();
  if (y.size() != 1) throw DimensionError("check_gradients: function must return a scalar");
  y.backward();

  GradientCheckResult result;
  std::mt19937_64 rng(options.seed);
  for (std::size_t l = 0; l < leaves.size(); ++l) {
    Tensor& leaf = leaves[l];
    std::vector<double> analytic(leaf.size(), 0.0);
    if (leaf.has_grad()) std::copy(leaf.grad().begin(), leaf.grad().end(), analytic.begin());

    std::vector<std::size_t> coords(leaf.size());
    std::iota(coords.begin(), coords.end(), 0);
    if (options.max_coordinates != 0 && coords.size() > options.max_coordinates) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(options.max_coordinates);
    }
    auto values = leaf.mutable_values();
    for (std::size_t i : coords) {
      const double saved = values[i];
      values[i] = saved + options.step;
      const double up = f().item();
      values[i] = saved - options.step;
      const double down = f().item();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * options.step);
      const double err = relative_error(analytic[i], numeric);
      ++result.probes;
      if (err >= result.max_relative_error) {
        result.max_relative_error = err;
        result.leaf = l;
        result.index = i;
        result.analytic = analytic[i];
        result.numeric = numeric;
      }
    }
  }
  return result;
}

/// Single-input form: `f` maps the probed tensor to a scalar. Returns the max
/// relative error between reverse-mode and central-difference gradients.
template <typename F>
double check_gradient(F&& f, Tensor x, double step = 1e-6) {
  GradientCheckOptions options;
  options.step = step;
  return check_gradients([&] { return f(x); }, {x}, options).max_relative_error;
}

}  // namespace hier
