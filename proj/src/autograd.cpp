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

#include "ptinet/autograd.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <unordered_set>
#include <utility>

#include "ptinet/errors.hpp"

namespace ptinet {
namespace {

thread_local bool g_grad_enabled = true;

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

ConstMap as_matrix(const Tensor& t) { return ConstMap(t.data(), t.dim(0), t.dim(1)); }
MutMap as_matrix(Tensor& t) { return MutMap(t.data(), t.dim(0), t.dim(1)); }

void require_rank(const Var& v, int rank, const char* op) {
  if (v.value().rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_string(v.shape()));
  }
}

Var make_result(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> bwd) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  if (g_grad_enabled) {
    bool any = false;
    for (const Var& v : inputs) any = any || v.requires_grad();
    if (any) {
      node->requires_grad = true;
      node->parents.reserve(inputs.size());
      for (const Var& v : inputs) node->parents.push_back(v.ptr());
      node->backward = std::move(bwd);
    }
  }
  return Var(std::move(node));
}

// Applies f elementwise; df(x, y) is the local derivative given input x and
// output y.
template <typename F, typename DF>
Var unary(const Var& a, F f, DF df) {
  Tensor out(a.shape());
  const Tensor& in = a.value();
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  return make_result(std::move(out), {a}, [df](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    Tensor& g = p.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] += self.grad[i] * df(p.value[i], self.value[i]);
    }
  });
}

}  // namespace

Tensor& Node::grad_buffer() {
  if (grad.empty() && !value.empty()) grad = Tensor(value.shape());
  return grad;
}

Var constant(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Var(std::move(node));
}

Var leaf(Tensor value, bool requires_grad) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  return Var(std::move(node));
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

void backward(const Var& root) {
  if (root.value().size() != 1) {
    throw ShapeError("backward() needs a single-element root, got " + shape_string(root.shape()));
  }
  if (!root.requires_grad()) return;

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{&root.node(), 0}};
  visited.insert(&root.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node().grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward && !node->grad.empty()) node->backward(*node);
  }
  // Interior gradients are only needed during the sweep.
  for (Node* node : order) {
    if (node->backward) node->grad = Tensor();
  }
}

Var matmul(const Var& a, const Var& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  if (a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
  }
  Tensor out(Shape{a.dim(0), b.dim(1)});
  as_matrix(out).noalias() = as_matrix(a.value()) * as_matrix(b.value());
  return make_result(std::move(out), {a, b}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    ConstMap g = as_matrix(std::as_const(self.grad));
    if (pa.requires_grad) as_matrix(pa.grad_buffer()).noalias() += g * as_matrix(pb.value).transpose();
    if (pb.requires_grad) as_matrix(pb.grad_buffer()).noalias() += as_matrix(pa.value).transpose() * g;
  });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  require_rank(x, 2, "linear");
  require_rank(weight, 2, "linear");
  if (x.dim(1) != weight.dim(0) || bias.value().size() != static_cast<std::size_t>(weight.dim(1))) {
    throw ShapeError("linear: input " + shape_string(x.shape()) + ", weight " +
                     shape_string(weight.shape()) + ", bias " + shape_string(bias.shape()));
  }
  Tensor out(Shape{x.dim(0), weight.dim(1)});
  auto o = as_matrix(out);
  o.noalias() = as_matrix(x.value()) * as_matrix(weight.value());
  Eigen::Map<const Eigen::RowVectorXd> b(bias.value().data(), weight.dim(1));
  o.rowwise() += b;
  return make_result(std::move(out), {x, weight, bias}, [](Node& self) {
    Node& px = *self.parents[0];
    Node& pw = *self.parents[1];
    Node& pb = *self.parents[2];
    ConstMap g = as_matrix(std::as_const(self.grad));
    if (px.requires_grad) as_matrix(px.grad_buffer()).noalias() += g * as_matrix(pw.value).transpose();
    if (pw.requires_grad) as_matrix(pw.grad_buffer()).noalias() += as_matrix(px.value).transpose() * g;
    if (pb.requires_grad) {
      Eigen::Map<Eigen::RowVectorXd> gb(pb.grad_buffer().data(), g.cols());
      gb += g.colwise().sum();
    }
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  out += b.value();
  return make_result(std::move(out), {a, b}, [](Node& self) {
    for (auto& p : self.parents) {
      if (p->requires_grad) p->grad_buffer() += self.grad;
    }
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    if (self.parents[0]->requires_grad) self.parents[0]->grad_buffer() += self.grad;
    if (self.parents[1]->requires_grad) {
      Tensor& g = self.parents[1]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      Tensor& g = pa.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb.value[i];
    }
    if (pb.requires_grad) {
      Tensor& g = pb.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa.value[i];
    }
  });
}

Var add_scalar(const Var& a, double s) {
  return unary(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Var scale(const Var& a, double s) {
  return unary(a, [s](double x) { return x * s; }, [s](double, double) { return s; });
}

Var add_row(const Var& a, const Var& row) {
  require_rank(a, 2, "add_row");
  if (row.value().size() != static_cast<std::size_t>(a.dim(1))) {
    throw ShapeError("add_row: " + shape_string(a.shape()) + " + " + shape_string(row.shape()));
  }
  Tensor out = a.value();
  const int cols = a.dim(1);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += row.value()[i % cols];
  return make_result(std::move(out), {a, row}, [cols](Node& self) {
    if (self.parents[0]->requires_grad) self.parents[0]->grad_buffer() += self.grad;
    if (self.parents[1]->requires_grad) {
      Tensor& g = self.parents[1]->grad_buffer();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i % cols] += self.grad[i];
    }
  });
}

Var mul_column(const Var& a, const Var& col) {
  require_rank(a, 2, "mul_column");
  if (col.value().size() != static_cast<std::size_t>(a.dim(0))) {
    throw ShapeError("mul_column: " + shape_string(a.shape()) + " * " + shape_string(col.shape()));
  }
  const int cols = a.dim(1);
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= col.value()[i / cols];
  return make_result(std::move(out), {a, col}, [cols](Node& self) {
    Node& pa = *self.parents[0];
    Node& pc = *self.parents[1];
    if (pa.requires_grad) {
      Tensor& g = pa.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pc.value[i / cols];
    }
    if (pc.requires_grad) {
      Tensor& g = pc.grad_buffer();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i / cols] += self.grad[i] * pa.value[i];
    }
  });
}

Var sigmoid(const Var& a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var tanh(const Var& a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var relu(const Var& a) {
  return unary(a, [](double x) { return x > 0 ? x : 0.0; },
               [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Var exp(const Var& a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(const Var& a) {
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var sqrt(const Var& a) {
  return unary(a, [](double x) { return std::sqrt(x); },
               [](double, double y) { return y > 0 ? 0.5 / y : 0.0; });
}

Var square(const Var& a) {
  return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var clamp(const Var& a, double lo, double hi) {
  return unary(a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
               [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Var sum(const Var& a) {
  double total = 0.0;
  for (double v : a.value().values()) total += v;
  return make_result(Tensor::scalar(total), {a}, [](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    Tensor& g = p.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[0];
  });
}

Var mean(const Var& a) {
  const double n = static_cast<double>(a.value().size());
  return scale(sum(a), 1.0 / n);
}

Var sum_columns(const Var& a) {
  require_rank(a, 2, "sum_columns");
  const int rows = a.dim(0);
  const int cols = a.dim(1);
  Tensor out(Shape{rows, 1});
  for (int r = 0; r < rows; ++r) {
    double s = 0.0;
    for (int c = 0; c < cols; ++c) s += a.value().at(r, c);
    out[r] = s;
  }
  return make_result(std::move(out), {a}, [cols](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    Tensor& g = p.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i / cols];
  });
}

Var slice_columns(const Var& a, int start, int count) {
  require_rank(a, 2, "slice_columns");
  const int rows = a.dim(0);
  const int cols = a.dim(1);
  if (start < 0 || count < 0 || start + count > cols) {
    throw ShapeError("slice_columns out of range on " + shape_string(a.shape()));
  }
  Tensor out(Shape{rows, count});
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < count; ++c) out.at(r, c) = a.value().at(r, start + c);
  }
  return make_result(std::move(out), {a}, [start, count, cols, rows](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    Tensor& g = p.grad_buffer();
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < count; ++c) g[r * cols + start + c] += self.grad[r * count + c];
    }
  });
}

Var concat_columns(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_columns: no inputs");
  const int rows = parts.front().dim(0);
  int total = 0;
  for (const Var& p : parts) {
    require_rank(p, 2, "concat_columns");
    if (p.dim(0) != rows) throw ShapeError("concat_columns: row count mismatch");
    total += p.dim(1);
  }
  Tensor out(Shape{rows, total});
  int offset = 0;
  std::vector<int> offsets;
  for (const Var& p : parts) {
    offsets.push_back(offset);
    const int w = p.dim(1);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < w; ++c) out.at(r, offset + c) = p.value().at(r, c);
    }
    offset += w;
  }
  return make_result(std::move(out), parts, [offsets, rows, total](Node& self) {
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      Node& p = *self.parents[k];
      if (!p.requires_grad) continue;
      Tensor& g = p.grad_buffer();
      const int w = p.value.dim(1);
      for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < w; ++c) g[r * w + c] += self.grad[r * total + offsets[k] + c];
      }
    }
  });
}

Var reshape(const Var& a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return make_result(std::move(out), {a}, [](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    Tensor& g = p.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Var softmax_rows(const Var& a) {
  require_rank(a, 2, "softmax_rows");
  const int rows = a.dim(0);
  const int cols = a.dim(1);
  Tensor out(a.shape());
  for (int r = 0; r < rows; ++r) {
    double mx = a.value().at(r, 0);
    for (int c = 1; c < cols; ++c) mx = std::max(mx, a.value().at(r, c));
    double z = 0.0;
    for (int c = 0; c < cols; ++c) z += out.at(r, c) = std::exp(a.value().at(r, c) - mx);
    for (int c = 0; c < cols; ++c) out.at(r, c) /= z;
  }
  return make_result(std::move(out), {a}, [rows, cols](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    Tensor& g = p.grad_buffer();
    for (int r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (int c = 0; c < cols; ++c) dot += self.grad.at(r, c) * self.value.at(r, c);
      for (int c = 0; c < cols; ++c) {
        g.at(r, c) += self.value.at(r, c) * (self.grad.at(r, c) - dot);
      }
    }
  });
}

Var conv2d(const Var& x, const Var& weight, const Var& bias, const kernels::ConvGeometry& g) {
  require_rank(x, 4, "conv2d");
  if (x.dim(1) != g.in_channels || x.dim(2) != g.in_height || x.dim(3) != g.in_width) {
    throw ShapeError("conv2d: input " + shape_string(x.shape()) + " does not match geometry");
  }
  if (weight.value().size() != g.weight_size()) {
    throw ShapeError("conv2d: weight " + shape_string(weight.shape()) + " does not match geometry");
  }
  const bool has_bias = bias.defined();
  if (has_bias && bias.value().size() != static_cast<std::size_t>(g.out_channels)) {
    throw ShapeError("conv2d: bias " + shape_string(bias.shape()));
  }
  const int batch = x.dim(0);
  Tensor out(Shape{batch, g.out_channels, g.out_height, g.out_width});
  kernels::conv2d_forward(g, batch, x.value().data(), weight.value().data(),
                          has_bias ? bias.value().data() : nullptr, out.data());
  std::vector<Var> inputs{x, weight};
  if (has_bias) inputs.push_back(bias);
  return make_result(std::move(out), inputs, [g, batch, has_bias](Node& self) {
    Node& px = *self.parents[0];
    Node& pw = *self.parents[1];
    double* dx = px.requires_grad ? px.grad_buffer().data() : nullptr;
    double* dw = pw.requires_grad ? pw.grad_buffer().data() : nullptr;
    double* db = nullptr;
    if (has_bias && self.parents[2]->requires_grad) db = self.parents[2]->grad_buffer().data();
    kernels::conv2d_backward(g, batch, px.value.data(), pw.value.data(), self.grad.data(), dx, dw,
                             db);
  });
}

Var max_pool2d(const Var& x, int window) {
  require_rank(x, 4, "max_pool2d");
  const auto g = kernels::PoolGeometry::floor(x.dim(1), x.dim(2), x.dim(3), window);
  const int batch = x.dim(0);
  Tensor out(Shape{batch, g.channels, g.out_height, g.out_width});
  auto argmax = std::make_shared<std::vector<int>>(out.size());
  kernels::max_pool2d_forward(g, batch, x.value().data(), out.data(), argmax->data());
  return make_result(std::move(out), {x}, [g, batch, argmax](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    kernels::max_pool2d_backward(g, batch, argmax->data(), self.grad.data(), p.grad_buffer().data());
  });
}

Var global_avg_pool(const Var& x) {
  require_rank(x, 4, "global_avg_pool");
  const int batch = x.dim(0);
  const int channels = x.dim(1);
  const int plane = x.dim(2) * x.dim(3);
  Tensor out(Shape{batch, channels});
  for (int i = 0; i < batch * channels; ++i) {
    double s = 0.0;
    for (int k = 0; k < plane; ++k) s += x.value()[static_cast<std::size_t>(i) * plane + k];
    out[i] = s / plane;
  }
  return make_result(std::move(out), {x}, [plane](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    Tensor& g = p.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i / plane] / plane;
  });
}

Var group_mean_rows(const Var& x, int group) {
  require_rank(x, 2, "group_mean_rows");
  if (group <= 0 || x.dim(0) % group != 0) {
    throw ShapeError("group_mean_rows: " + std::to_string(x.dim(0)) + " rows not divisible by " +
                     std::to_string(group));
  }
  const int groups = x.dim(0) / group;
  const int cols = x.dim(1);
  Tensor out(Shape{groups, cols});
  for (int r = 0; r < x.dim(0); ++r) {
    for (int c = 0; c < cols; ++c) out.at(r / group, c) += x.value().at(r, c) / group;
  }
  return make_result(std::move(out), {x}, [group, cols](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    Tensor& g = p.grad_buffer();
    for (int r = 0; r < p.value.dim(0); ++r) {
      for (int c = 0; c < cols; ++c) g.at(r, c) += self.grad.at(r / group, c) / group;
    }
  });
}

}  // namespace ptinet
