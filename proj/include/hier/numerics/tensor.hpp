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
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "hier/error.hpp"

namespace hier {

namespace detail {

// One vertex of the reverse-mode graph. Children own their parents, so the
// whole graph is released when the last handle to the root goes away.
struct Node {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  bool leaf = true;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};

}  // namespace detail

/// Dense row-major 2-D tensor of doubles with reverse-mode differentiation.
///
/// A Tensor is a cheap handle; copies alias the same storage. Vectors are
/// represented as 1 x n rows and scalars as 1 x 1.
class Tensor {
 public:
  Tensor() = default;

  Tensor(std::size_t rows, std::size_t cols, std::vector<double> values, bool requires_grad = false)
      : node_(std::make_shared<detail::Node>()) {
    if (values.size() != rows * cols) {
      throw DimensionError("tensor: " + std::to_string(values.size()) + " values for shape " +
                           std::to_string(rows) + "x" + std::to_string(cols));
    }
    for (double v : values) {
      if (!std::isfinite(v)) throw NumericError("tensor: non-finite value in leaf");
    }
    node_->rows = rows;
    node_->cols = cols;
    node_->value = std::move(values);
    node_->requires_grad = requires_grad;
  }

  static Tensor zeros(std::size_t rows, std::size_t cols, bool requires_grad = false) {
    return Tensor(rows, cols, std::vector<double>(rows * cols, 0.0), requires_grad);
  }

  static Tensor scalar(double v, bool requires_grad = false) { return Tensor(1, 1, {v}, requires_grad); }

  static Tensor row(std::vector<double> values, bool requires_grad = false) {
    const std::size_t n = values.size();
    return Tensor(1, n, std::move(values), requires_grad);
  }

  bool defined() const noexcept { return node_ != nullptr; }
  std::size_t rows() const noexcept { return node_->rows; }
  std::size_t cols() const noexcept { return node_->cols; }
  std::size_t size() const noexcept { return node_->value.size(); }
  bool requires_grad() const noexcept { return node_->requires_grad; }
  bool is_leaf() const noexcept { return node_->leaf; }
  const char* op() const noexcept { return node_->op; }

  std::span<const double> values() const noexcept { return node_->value; }
  double at(std::size_t r, std::size_t c) const { return node_->value[r * node_->cols + c]; }
  std::span<const double> row_values(std::size_t r) const {
    return std::span<const double>(node_->value).subspan(r * node_->cols, node_->cols);
  }

  double item() const {
    if (size() != 1) throw DimensionError("item: tensor is not a scalar");
    return node_->value[0];
  }

  /// Gradient buffer; empty until a backward pass has reached this tensor.
  std::span<const double> grad() const noexcept { return node_->grad; }
  bool has_grad() const noexcept { return !node_->grad.empty(); }

  void zero_grad() {
    if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
  }

  /// In-place access for optimizers and finite-difference probes. Leaves only.
  std::span<double> mutable_values() {
    if (!node_->leaf) throw InvalidArgument("mutable_values: only leaf tensors may be mutated");
    return node_->value;
  }

  /// Copy of the values with no graph attached.
  Tensor detach() const { return Tensor(rows(), cols(), node_->value, false); }

  /// Deep copy that keeps the requires_grad flag but shares nothing.
  Tensor clone_leaf() const { return Tensor(rows(), cols(), node_->value, node_->requires_grad); }

  /// Reverse pass from a scalar root. Leaf gradients accumulate; interior
  /// gradients are reset on every call.
  void backward() const {
    if (size() != 1) throw DimensionError("backward: root must be a scalar");
    if (!node_->requires_grad) return;

    std::vector<detail::Node*> order;
    std::unordered_set<detail::Node*> seen;
    std::vector<std::pair<detail::Node*, std::size_t>> stack{{node_.get(), 0}};
    seen.insert(node_.get());
    while (!stack.empty()) {
      auto& [n, next] = stack.back();
      if (next < n->parents.size()) {
        detail::Node* p = n->parents[next++].get();
        if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
      } else {
        order.push_back(n);
        stack.pop_back();
      }
    }

    for (detail::Node* n : order) {
      if (!n->leaf) n->grad.assign(n->value.size(), 0.0);
    }
    node_->ensure_grad();
    node_->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      detail::Node* n = *it;
      if (n->backward) {
        for (auto& p : n->parents) {
          if (p->requires_grad) p->ensure_grad();
        }
        n->backward(*n);
      }
    }
  }

  const std::shared_ptr<detail::Node>& node() const noexcept { return node_; }

  /// Builds an interior node. When no parent requires gradients the node keeps
  /// no graph edges, so constant subexpressions are freed immediately.
  /// Otherwise parents are stored in argument order and `backward` must skip
  /// any parent whose requires_grad is false.
  static Tensor make(const char* op, std::size_t rows, std::size_t cols, std::vector<double> values,
                     std::vector<Tensor> parents, std::function<void(detail::Node&)> backward) {
    for (double v : values) {
      if (!std::isfinite(v)) throw NumericError(std::string(op) + ": produced a non-finite value");
    }
    Tensor out;
    out.node_ = std::make_shared<detail::Node>();
    out.node_->rows = rows;
    out.node_->cols = cols;
    out.node_->value = std::move(values);
    out.node_->leaf = false;
    out.node_->op = op;
    bool any = false;
    for (const auto& p : parents) any = any || p.requires_grad();
    if (any) {
      out.node_->requires_grad = true;
      out.node_->parents.reserve(parents.size());
      for (auto& p : parents) out.node_->parents.push_back(p.node_);
      out.node_->backward = std::move(backward);
    }
    return out;
  }

 private:
  std::shared_ptr<detail::Node> node_;
};

}  // namespace hier
