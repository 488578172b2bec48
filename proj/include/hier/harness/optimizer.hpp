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
#include <vector>

#include "hier/nn.hpp"

namespace hier {

/// Adam with decoupled weight decay.
class AdamW {
 public:
  struct Options {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.01;
  };

  AdamW(ParameterList params, Options options) : params_(std::move(params)), options_(options) {
    for (const auto& p : params_) {
      first_.emplace_back(p.tensor.size(), 0.0);
      second_.emplace_back(p.tensor.size(), 0.0);
    }
  }

  void zero_grad() {
    for (auto& p : params_) p.tensor.zero_grad();
  }

  void step() {
    ++t_;
    const double c1 = 1.0 - std::pow(options_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(options_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Tensor& t = params_[i].tensor;
      if (!t.has_grad()) continue;
      auto values = t.mutable_values();
      auto grad = t.grad();
      auto& m = first_[i];
      auto& v = second_[i];
      for (std::size_t j = 0; j < values.size(); ++j) {
        m[j] = options_.beta1 * m[j] + (1.0 - options_.beta1) * grad[j];
        v[j] = options_.beta2 * v[j] + (1.0 - options_.beta2) * grad[j] * grad[j];
        const double update = (m[j] / c1) / (std::sqrt(v[j] / c2) + options_.epsilon);
        values[j] -= options_.learning_rate * (update + options_.weight_decay * values[j]);
      }
    }
  }

  std::size_t steps() const { return t_; }

 private:
  ParameterList params_;
  Options options_;
  std::vector<std::vector<double>> first_, second_;
  std::size_t t_ = 0;
};

}  // namespace hier
