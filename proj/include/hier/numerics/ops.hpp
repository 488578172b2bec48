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
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "hier/error.hpp"
#include "hier/numerics/tensor.hpp"

// Differentiable operations on Tensor. Every op validates shapes, checks its
// output for non-finite values, and registers a backward closure when any
// input requires gradients.

namespace hier {

/// Guard added to norm products and log arguments.
inline constexpr double kEpsilon = 1e-12;

enum class Axis { kRows, kCols };

namespace detail {

inline double* grad_ptr(Node& n, std::size_t parent) {
  Node& p = *n.parents[parent];
  return p.requires_grad ? p.grad.data() : nullptr;
}

inline const std::vector<double>& parent_value(const Node& n, std::size_t parent) {
  return n.parents[parent]->value;
}

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()));
  }
}

}  // namespace detail

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions " + std::to_string(a.cols()) + " and " +
                         std::to_string(b.rows()) + " disagree");
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(m * n, 0.0);
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double x = av[i * k + p];
      if (x == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += x * bv[p * n + j];
    }
  }
  return Tensor::make("matmul", m, n, std::move(out), {a, b}, [m, k, n](detail::Node& node) {
    const auto& A = detail::parent_value(node, 0);
    const auto& B = detail::parent_value(node, 1);
    const auto& G = node.grad;
    if (double* ga = detail::grad_ptr(node, 0)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double s = 0.0;
          for (std::size_t j = 0; j < n; ++j) s += G[i * n + j] * B[p * n + j];
          ga[i * k + p] += s;
        }
    }
    if (double* gb = detail::grad_ptr(node, 1)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double x = A[i * k + p];
          if (x == 0.0) continue;
          for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += x * G[i * n + j];
        }
    }
  });
}

inline Tensor transpose(const Tensor& a) {
  const std::size_t r = a.rows(), c = a.cols();
  std::vector<double> out(r * c);
  auto av = a.values();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = av[i * c + j];
  return Tensor::make("transpose", c, r, std::move(out), {a}, [r, c](detail::Node& node) {
    double* ga = detail::grad_ptr(node, 0);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += node.grad[j * r + i];
  });
}

inline Tensor add(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "add");
  std::vector<double> out(a.values().begin(), a.values().end());
  auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return Tensor::make("add", a.rows(), a.cols(), std::move(out), {a, b}, [](detail::Node& node) {
    for (std::size_t p = 0; p < 2; ++p)
      if (double* g = detail::grad_ptr(node, p))
        for (std::size_t i = 0; i < node.grad.size(); ++i) g[i] += node.grad[i];
  });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "sub");
  std::vector<double> out(a.values().begin(), a.values().end());
  auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return Tensor::make("sub", a.rows(), a.cols(), std::move(out), {a, b}, [](detail::Node& node) {
    if (double* g = detail::grad_ptr(node, 0))
      for (std::size_t i = 0; i < node.grad.size(); ++i) g[i] += node.grad[i];
    if (double* g = detail::grad_ptr(node, 1))
      for (std::size_t i = 0; i < node.grad.size(); ++i) g[i] -= node.grad[i];
  });
}

/// Elementwise product.
inline Tensor mul(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return Tensor::make("mul", a.rows(), a.cols(), std::move(out), {a, b}, [](detail::Node& node) {
    const auto& A = detail::parent_value(node, 0);
    const auto& B = detail::parent_value(node, 1);
    if (double* g = detail::grad_ptr(node, 0))
      for (std::size_t i = 0; i < node.grad.size(); ++i) g[i] += node.grad[i] * B[i];
    if (double* g = detail::grad_ptr(node, 1))
      for (std::size_t i = 0; i < node.grad.size(); ++i) g[i] += node.grad[i] * A[i];
  });
}

/// scale * a + shift, elementwise, with constant coefficients.
inline Tensor affine(const Tensor& a, double scale, double shift = 0.0) {
  std::vector<double> out(a.size());
  auto av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = scale * av[i] + shift;
  return Tensor::make("affine", a.rows(), a.cols(), std::move(out), {a}, [scale](detail::Node& node) {
    double* g = detail::grad_ptr(node, 0);
    for (std::size_t i = 0; i < node.grad.size(); ++i) g[i] += scale * node.grad[i];
  });
}

inline Tensor scale(const Tensor& a, double factor) { return affine(a, factor, 0.0); }

/// Adds a 1 x c row to every row of an r x c matrix.
inline Tensor add_row(const Tensor& a, const Tensor& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw DimensionError("add_row: bias shape mismatch");
  const std::size_t r = a.rows(), c = a.cols();
  std::vector<double> out(a.values().begin(), a.values().end());
  auto bv = row.values();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] += bv[j];
  return Tensor::make("add_row", r, c, std::move(out), {a, row}, [r, c](detail::Node& node) {
    if (double* g = detail::grad_ptr(node, 0))
      for (std::size_t i = 0; i < node.grad.size(); ++i) g[i] += node.grad[i];
    if (double* g = detail::grad_ptr(node, 1))
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) g[j] += node.grad[i * c + j];
  });
}

/// Multiplies every element of `a` by the 1 x 1 tensor `s`.
inline Tensor mul_scalar(const Tensor& a, const Tensor& s) {
  if (s.size() != 1) throw DimensionError("mul_scalar: factor must be 1x1");
  const double k = s.item();
  std::vector<double> out(a.size());
  auto av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = k * av[i];
  return Tensor::make("mul_scalar", a.rows(), a.cols(), std::move(out), {a, s}, [](detail::Node& node) {
    const auto& A = detail::parent_value(node, 0);
    const double k = detail::parent_value(node, 1)[0];
    if (double* g = detail::grad_ptr(node, 0))
      for (std::size_t i = 0; i < node.grad.size(); ++i) g[i] += k * node.grad[i];
    if (double* g = detail::grad_ptr(node, 1)) {
      double acc = 0.0;
      for (std::size_t i = 0; i < node.grad.size(); ++i) acc += A[i] * node.grad[i];
      g[0] += acc;
    }
  });
}

/// Scales row i of `a` (r x c) by s[i], where `s` is r x 1.
inline Tensor scale_rows(const Tensor& a, const Tensor& s) {
  if (s.cols() != 1 || s.rows() != a.rows()) throw DimensionError("scale_rows: need one factor per row");
  const std::size_t r = a.rows(), c = a.cols();
  std::vector<double> out(a.size());
  auto av = a.values();
  auto sv = s.values();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = sv[i] * av[i * c + j];
  return Tensor::make("scale_rows", r, c, std::move(out), {a, s}, [r, c](detail::Node& node) {
    const auto& A = detail::parent_value(node, 0);
    const auto& S = detail::parent_value(node, 1);
    if (double* g = detail::grad_ptr(node, 0))
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) g[i * c + j] += S[i] * node.grad[i * c + j];
    if (double* g = detail::grad_ptr(node, 1))
      for (std::size_t i = 0; i < r; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < c; ++j) acc += A[i * c + j] * node.grad[i * c + j];
        g[i] += acc;
      }
  });
}

inline Tensor relu(const Tensor& x) {
  std::vector<double> out(x.size());
  auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  return Tensor::make("relu", x.rows(), x.cols(), std::move(out), {x}, [](detail::Node& node) {
    const auto& X = detail::parent_value(node, 0);
    double* g = detail::grad_ptr(node, 0);
    for (std::size_t i = 0; i < node.grad.size(); ++i)
      if (X[i] > 0.0) g[i] += node.grad[i];
  });
}

inline Tensor sigmoid(const Tensor& x) {
  std::vector<double> out(x.size());
  auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = xv[i];
    out[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  }
  return Tensor::make("sigmoid", x.rows(), x.cols(), std::move(out), {x}, [](detail::Node& node) {
    double* g = detail::grad_ptr(node, 0);
    for (std::size_t i = 0; i < node.grad.size(); ++i) {
      const double y = node.value[i];
      g[i] += node.grad[i] * y * (1.0 - y);
    }
  });
}

/// Elementwise clamp to [lo, hi]; gradient passes only where unclamped.
inline Tensor clamp(const Tensor& x, double lo, double hi) {
  std::vector<double> out(x.size());
  auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::clamp(xv[i], lo, hi);
  return Tensor::make("clamp", x.rows(), x.cols(), std::move(out), {x}, [lo, hi](detail::Node& node) {
    const auto& X = detail::parent_value(node, 0);
    double* g = detail::grad_ptr(node, 0);
    for (std::size_t i = 0; i < node.grad.size(); ++i)
      if (X[i] >= lo && X[i] <= hi) g[i] += node.grad[i];
  });
}

/// Elementwise 1 / x. Fails on zero.
inline Tensor reciprocal(const Tensor& x) {
  std::vector<double> out(x.size());
  auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / xv[i];
  return Tensor::make("reciprocal", x.rows(), x.cols(), std::move(out), {x}, [](detail::Node& node) {
    double* g = detail::grad_ptr(node, 0);
    for (std::size_t i = 0; i < node.grad.size(); ++i) g[i] -= node.grad[i] * node.value[i] * node.value[i];
  });
}

/// Softmax along `axis`: kCols normalizes each row, kRows normalizes each column.
inline Tensor softmax(const Tensor& x, Axis axis = Axis::kCols) {
  const std::size_t r = x.rows(), c = x.cols();
  const bool along_cols = axis == Axis::kCols;
  const std::size_t groups = along_cols ? r : c;
  const std::size_t len = along_cols ? c : r;
  auto index = [=](std::size_t g, std::size_t t) { return along_cols ? g * c + t : t * c + g; };
  std::vector<double> out(x.size());
  auto xv = x.values();
  for (std::size_t g = 0; g < groups; ++g) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < len; ++t) mx = std::max(mx, xv[index(g, t)]);
    double total = 0.0;
    for (std::size_t t = 0; t < len; ++t) {
      const double e = std::exp(xv[index(g, t)] - mx);
      out[index(g, t)] = e;
      total += e;
    }
    for (std::size_t t = 0; t < len; ++t) out[index(g, t)] /= total;
  }
  return Tensor::make("softmax", r, c, std::move(out), {x}, [groups, len, index](detail::Node& node) {
    double* gx = detail::grad_ptr(node, 0);
    for (std::size_t g = 0; g < groups; ++g) {
      double dot = 0.0;
      for (std::size_t t = 0; t < len; ++t) dot += node.grad[index(g, t)] * node.value[index(g, t)];
      for (std::size_t t = 0; t < len; ++t) {
        const std::size_t i = index(g, t);
        gx[i] += node.value[i] * (node.grad[i] - dot);
      }
    }
  });
}

/// Row-wise softmax of a square matrix restricted to the lower triangle
/// (column j <= row i); entries above the diagonal are exactly zero.
inline Tensor causal_softmax(const Tensor& x) {
  if (x.rows() != x.cols()) throw DimensionError("causal_softmax: matrix must be square");
  const std::size_t n = x.rows();
  std::vector<double> out(n * n, 0.0);
  auto xv = x.values();
  for (std::size_t i = 0; i < n; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j <= i; ++j) mx = std::max(mx, xv[i * n + j]);
    double total = 0.0;
    for (std::size_t j = 0; j <= i; ++j) {
      out[i * n + j] = std::exp(xv[i * n + j] - mx);
      total += out[i * n + j];
    }
    for (std::size_t j = 0; j <= i; ++j) out[i * n + j] /= total;
  }
  return Tensor::make("causal_softmax", n, n, std::move(out), {x}, [n](detail::Node& node) {
    double* gx = detail::grad_ptr(node, 0);
    for (std::size_t i = 0; i < n; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j <= i; ++j) dot += node.grad[i * n + j] * node.value[i * n + j];
      for (std::size_t j = 0; j <= i; ++j) gx[i * n + j] += node.value[i * n + j] * (node.grad[i * n + j] - dot);
    }
  });
}

/// Pairwise cosine similarities between the rows of `a` (m x d) and `b` (n x d):
/// out(i, j) = <a_i, b_j> / (|a_i| |b_j| + kEpsilon). Zero rows give 0.
inline Tensor cosine_matrix(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.cols()) throw DimensionError("cosine_matrix: vector lengths disagree");
  const std::size_t m = a.rows(), n = b.rows(), d = a.cols();
  auto av = a.values();
  auto bv = b.values();
  std::vector<double> na(m), nb(n), dots(m * n), out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t t = 0; t < d; ++t) s += av[i * d + t] * av[i * d + t];
    na[i] = std::sqrt(s);
  }
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (std::size_t t = 0; t < d; ++t) s += bv[j * d + t] * bv[j * d + t];
    nb[j] = std::sqrt(s);
  }
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < d; ++t) s += av[i * d + t] * bv[j * d + t];
      dots[i * n + j] = s;
      out[i * n + j] = s / (na[i] * nb[j] + kEpsilon);
    }
  return Tensor::make(
      "cosine_matrix", m, n, std::move(out), {a, b},
      [m, n, d, na = std::move(na), nb = std::move(nb), dots = std::move(dots)](detail::Node& node) {
        const auto& A = detail::parent_value(node, 0);
        const auto& B = detail::parent_value(node, 1);
        double* ga = detail::grad_ptr(node, 0);
        double* gb = detail::grad_ptr(node, 1);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) {
            const double g = node.grad[i * n + j];
            if (g == 0.0) continue;
            const double den = na[i] * nb[j] + kEpsilon;
            const double f = dots[i * n + j] / den;
            // d/da (dot / den) = b / den - f * nb * (a / na) / den
            const double ka = na[i] > 0.0 ? f * nb[j] / (na[i] * den) : 0.0;
            const double kb = nb[j] > 0.0 ? f * na[i] / (nb[j] * den) : 0.0;
            for (std::size_t t = 0; t < d; ++t) {
              if (ga) ga[i * d + t] += g * (B[j * d + t] / den - ka * A[i * d + t]);
              if (gb) gb[j * d + t] += g * (A[i * d + t] / den - kb * B[j * d + t]);
            }
          }
      });
}

/// Cosine similarity of two equal-length vectors (any shapes with equal size).
inline Tensor cosine_similarity(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size()) throw DimensionError("cosine_similarity: vector lengths disagree");
  auto as_row = [](const Tensor& t) {
    if (t.rows() == 1) return t;
    return transpose(t);
  };
  if ((a.rows() != 1 && a.cols() != 1) || (b.rows() != 1 && b.cols() != 1))
    throw DimensionError("cosine_similarity: arguments must be vectors");
  return cosine_matrix(as_row(a), as_row(b));
}

/// Divides each row by (its norm + kEpsilon).
inline Tensor normalize_rows(const Tensor& x) {
  const std::size_t r = x.rows(), c = x.cols();
  auto xv = x.values();
  std::vector<double> norms(r), out(x.size());
  for (std::size_t i = 0; i < r; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += xv[i * c + j] * xv[i * c + j];
    norms[i] = std::sqrt(s);
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = xv[i * c + j] / (norms[i] + kEpsilon);
  }
  return Tensor::make("normalize_rows", r, c, std::move(out), {x}, [r, c, norms = std::move(norms)](detail::Node& node) {
    const auto& X = detail::parent_value(node, 0);
    double* g = detail::grad_ptr(node, 0);
    for (std::size_t i = 0; i < r; ++i) {
      const double den = norms[i] + kEpsilon;
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += node.grad[i * c + j] * X[i * c + j];
      const double k = norms[i] > 0.0 ? dot / (norms[i] * den * den) : 0.0;
      for (std::size_t j = 0; j < c; ++j) g[i * c + j] += node.grad[i * c + j] / den - k * X[i * c + j];
    }
  });
}

inline Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  return Tensor::make("sum", 1, 1, {s}, {x}, [](detail::Node& node) {
    double* g = detail::grad_ptr(node, 0);
    const std::size_t n = node.parents[0]->value.size();
    for (std::size_t i = 0; i < n; ++i) g[i] += node.grad[0];
  });
}

inline Tensor mean(const Tensor& x) {
  if (x.size() == 0) throw DimensionError("mean: empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

/// 1 x c tensor of per-column sums.
inline Tensor column_sums(const Tensor& x) {
  const std::size_t r = x.rows(), c = x.cols();
  std::vector<double> out(c, 0.0);
  auto xv = x.values();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j] += xv[i * c + j];
  return Tensor::make("column_sums", 1, c, std::move(out), {x}, [r, c](detail::Node& node) {
    double* g = detail::grad_ptr(node, 0);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) g[i * c + j] += node.grad[j];
  });
}

/// Stacks tensors with equal column counts vertically.
inline Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows: nothing to concatenate");
  const std::size_t c = parts.front().cols();
  std::size_t r = 0;
  for (const auto& p : parts) {
    if (p.cols() != c) throw DimensionError("concat_rows: column counts disagree");
    r += p.rows();
  }
  std::vector<double> out;
  out.reserve(r * c);
  for (const auto& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());
  return Tensor::make("concat_rows", r, c, std::move(out), parts, [](detail::Node& node) {
    std::size_t offset = 0;
    for (std::size_t p = 0; p < node.parents.size(); ++p) {
      const std::size_t len = node.parents[p]->value.size();
      if (double* g = detail::grad_ptr(node, p))
        for (std::size_t i = 0; i < len; ++i) g[i] += node.grad[offset + i];
      offset += len;
    }
  });
}

/// Joins two matrices with equal row counts side by side.
inline Tensor concat_cols(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows()) throw DimensionError("concat_cols: row counts disagree");
  const std::size_t r = a.rows(), ca = a.cols(), cb = b.cols(), c = ca + cb;
  std::vector<double> out(r * c);
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < r; ++i) {
    std::copy_n(av.begin() + i * ca, ca, out.begin() + i * c);
    std::copy_n(bv.begin() + i * cb, cb, out.begin() + i * c + ca);
  }
  return Tensor::make("concat_cols", r, c, std::move(out), {a, b}, [r, ca, cb, c](detail::Node& node) {
    double* ga = detail::grad_ptr(node, 0);
    double* gb = detail::grad_ptr(node, 1);
    for (std::size_t i = 0; i < r; ++i) {
      if (ga)
        for (std::size_t j = 0; j < ca; ++j) ga[i * ca + j] += node.grad[i * c + j];
      if (gb)
        for (std::size_t j = 0; j < cb; ++j) gb[i * cb + j] += node.grad[i * c + ca + j];
    }
  });
}

/// Selects rows by index; indices may repeat.
inline Tensor gather_rows(const Tensor& x, std::vector<std::size_t> indices) {
  const std::size_t c = x.cols();
  std::vector<double> out(indices.size() * c);
  auto xv = x.values();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= x.rows()) throw DimensionError("gather_rows: row index out of range");
    std::copy_n(xv.begin() + indices[i] * c, c, out.begin() + i * c);
  }
  const std::size_t r = indices.size();
  return Tensor::make("gather_rows", r, c, std::move(out), {x}, [c, indices = std::move(indices)](detail::Node& node) {
    double* g = detail::grad_ptr(node, 0);
    for (std::size_t i = 0; i < indices.size(); ++i)
      for (std::size_t j = 0; j < c; ++j) g[indices[i] * c + j] += node.grad[i * c + j];
  });
}

inline Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
  if (begin > end || end > x.rows()) throw DimensionError("slice_rows: range out of bounds");
  std::vector<std::size_t> idx(end - begin);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = begin + i;
  return gather_rows(x, std::move(idx));
}

/// Columns [begin, end) of every row.
inline Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end) {
  if (begin > end || end > x.cols()) throw DimensionError("slice_cols: range out of bounds");
  const std::size_t r = x.rows(), c = x.cols(), w = end - begin;
  std::vector<double> out(r * w);
  auto xv = x.values();
  for (std::size_t i = 0; i < r; ++i) std::copy_n(xv.begin() + i * c + begin, w, out.begin() + i * w);
  return Tensor::make("slice_cols", r, w, std::move(out), {x}, [r, c, w, begin](detail::Node& node) {
    double* g = detail::grad_ptr(node, 0);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < w; ++j) g[i * c + begin + j] += node.grad[i * w + j];
  });
}

/// Mean over rows of -log softmax(logits_i)[target_i].
inline Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> targets) {
  const std::size_t b = logits.rows(), c = logits.cols();
  if (targets.size() != b) throw DimensionError("cross_entropy: one target per row required");
  std::vector<double> probs(b * c);
  double loss = 0.0;
  auto lv = logits.values();
  for (std::size_t i = 0; i < b; ++i) {
    if (targets[i] >= c) {
      throw InvalidArgument("cross_entropy: target " + std::to_string(targets[i]) + " out of range for " +
                            std::to_string(c) + " classes");
    }
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < c; ++j) mx = std::max(mx, lv[i * c + j]);
    double total = 0.0;
    for (std::size_t j = 0; j < c; ++j) total += std::exp(lv[i * c + j] - mx);
    const double lse = mx + std::log(total);
    for (std::size_t j = 0; j < c; ++j) probs[i * c + j] = std::exp(lv[i * c + j] - lse);
    loss += lse - lv[i * c + targets[i]];
  }
  loss /= static_cast<double>(b);
  std::vector<std::size_t> tg(targets.begin(), targets.end());
  return Tensor::make("cross_entropy", 1, 1, {loss}, {logits},
                      [b, c, probs = std::move(probs), tg = std::move(tg)](detail::Node& node) {
                        double* g = detail::grad_ptr(node, 0);
                        const double k = node.grad[0] / static_cast<double>(b);
                        for (std::size_t i = 0; i < b; ++i)
                          for (std::size_t j = 0; j < c; ++j)
                            g[i * c + j] += k * (probs[i * c + j] - (j == tg[i] ? 1.0 : 0.0));
                      });
}

inline Tensor cross_entropy(const Tensor& logits, std::size_t target) {
  const std::size_t t[1] = {target};
  return cross_entropy(logits, std::span<const std::size_t>(t, 1));
}

/// Sum over elements of p * ln(p / max(q, kEpsilon)), with 0 * ln(0 / .) = 0.
/// Both arguments must be distributions (nonnegative, summing to 1 within 1e-9).
inline Tensor kl_divergence(const Tensor& p, const Tensor& q) {
  detail::require_same_shape(p, q, "kl_divergence");
  auto pv = p.values();
  auto qv = q.values();
  double sp = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    if (pv[i] < 0.0 || qv[i] < 0.0) throw InvalidArgument("kl_divergence: negative probability");
    sp += pv[i];
    sq += qv[i];
  }
  if (std::abs(sp - 1.0) > 1e-9 || std::abs(sq - 1.0) > 1e-9)
    throw InvalidArgument("kl_divergence: arguments must sum to 1");
  double kl = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i)
    if (pv[i] > 0.0) kl += pv[i] * std::log(pv[i] / std::max(qv[i], kEpsilon));
  return Tensor::make("kl_divergence", 1, 1, {kl}, {p, q}, [](detail::Node& node) {
    const auto& P = detail::parent_value(node, 0);
    const auto& Q = detail::parent_value(node, 1);
    const double g = node.grad[0];
    double* gp = detail::grad_ptr(node, 0);
    double* gq = detail::grad_ptr(node, 1);
    for (std::size_t i = 0; i < P.size(); ++i) {
      if (P[i] <= 0.0) continue;
      const double qf = std::max(Q[i], kEpsilon);
      if (gp) gp[i] += g * (std::log(P[i] / qf) + 1.0);
      if (gq && Q[i] > kEpsilon) gq[i] -= g * P[i] / Q[i];
    }
  });
}

}  // namespace hier
