// Copyright 2026 The PTINet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Minimal reverse-mode automatic differentiation over Tensor.
//
// A Var is a handle to a graph node. Ops record their parents and a backward
// closure only when gradients are enabled and some input requires them, so
// inference under NoGradGuard keeps no intermediate state alive. Parameters
// are long-lived leaf nodes; their gradient buffers accumulate across
// backward() calls until zero_grad().

#include <functional>
#include <memory>
#include <vector>

#include "ptinet/kernels.hpp"
#include "ptinet/tensor.hpp"

namespace ptinet {

struct Node {
  Tensor value;
  Tensor grad;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;
  bool requires_grad = false;

  Tensor& grad_buffer();
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  bool defined() const { return static_cast<bool>(node_); }
  const Tensor& value() const { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  const Shape& shape() const { return node_->value.shape(); }
  int dim(int axis) const { return node_->value.dim(axis); }
  bool requires_grad() const { return node_->requires_grad; }
  double item() const { return node_->value[0]; }

  // Leaves only: the optimizer and checkpoint loader write through this.
  Tensor& mutable_value() { return node_->value; }
  void zero_grad() { node_->grad = Tensor(); }

  Node& node() const { return *node_; }
  const std::shared_ptr<Node>& ptr() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

Var constant(Tensor value);
Var leaf(Tensor value, bool requires_grad = true);

// Accumulates d(root)/d(leaf) into every reachable leaf. root must hold one
// element.
void backward(const Var& root);

bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// ---- ops -------------------------------------------------------------------

Var matmul(const Var& a, const Var& b);                   // [M,K]x[K,N]
Var linear(const Var& x, const Var& weight, const Var& bias);  // x[B,in] W[in,out] + b[out]
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var add_scalar(const Var& a, double s);
Var scale(const Var& a, double s);
Var add_row(const Var& a, const Var& row);     // a[M,N] + row[N]
Var mul_column(const Var& a, const Var& col);  // a[M,N] * col[M,1]
Var sigmoid(const Var& a);
Var tanh(const Var& a);
Var relu(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var sqrt(const Var& a);  // gradient defined as 0 where the value is 0
Var square(const Var& a);
Var clamp(const Var& a, double lo, double hi);
Var sum(const Var& a);        // -> [1]
Var mean(const Var& a);       // -> [1]
Var sum_columns(const Var& a);  // a[M,N] -> [M,1]
Var slice_columns(const Var& a, int start, int count);
Var concat_columns(const std::vector<Var>& parts);
Var reshape(const Var& a, Shape shape);
Var softmax_rows(const Var& a);

Var conv2d(const Var& x, const Var& weight, const Var& bias, const kernels::ConvGeometry& g);
Var max_pool2d(const Var& x, int window);
Var global_avg_pool(const Var& x);      // [B,C,H,W] -> [B,C]
Var group_mean_rows(const Var& x, int group);  // [B*T,D] -> [B,D], rows grouped by sample

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }

}  // namespace ptinet
