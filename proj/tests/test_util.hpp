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

#include <random>
#include <vector>

#include "hier/numerics.hpp"

namespace hier::test {

inline std::vector<double> gaussian(std::size_t n, std::mt19937_64& rng, double stddev = 1.0) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

inline Tensor random_tensor(std::size_t rows, std::size_t cols, std::mt19937_64& rng, bool requires_grad = false,
                            double stddev = 1.0) {
  return Tensor(rows, cols, gaussian(rows * cols, rng, stddev), requires_grad);
}

inline std::vector<double> random_distribution(std::size_t n, std::mt19937_64& rng) {
  return vmath::softmax(gaussian(n, rng, 2.0));
}

}  // namespace hier::test
