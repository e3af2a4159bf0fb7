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

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "ptinet/autograd.hpp"
#include "ptinet/kernels.hpp"
#include "test_support.hpp"

using namespace ptinet;
using ptinet::testing::directional_grad_error;
using ptinet::testing::random_tensor;

namespace {

std::vector<double> random_values(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

void check_close(const std::vector<double>& a, const std::vector<double>& b, double tol) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= tol * std::max(1.0, std::abs(b[i])));
}

}  // namespace

TEST_SUITE("kernels") {
  TEST_CASE("same padding extent is ceil(input / stride)") {
    CHECK(kernels::same_output_extent(240, 2) == 120);
    CHECK(kernels::same_output_extent(105, 2) == 53);
    CHECK(kernels::same_output_extent(7, 3) == 3);
    const auto g = kernels::ConvGeometry::same(3, 15, 26, 4, 5, 2);
    CHECK(g.out_height == 8);
    CHECK(g.out_width == 13);
  }

  TEST_CASE("parallel convolution matches the serial reference") {
    std::mt19937_64 rng(11);
    for (int stride : {1, 2}) {
      for (int kernel : {1, 3, 5}) {
        const auto g = kernels::ConvGeometry::same(3, 9, 13, 4, kernel, stride);
        const int batch = 3;
        auto x = random_values(g.input_size() * batch, rng);
        auto w = random_values(g.weight_size(), rng);
        auto b = random_values(static_cast<std::size_t>(g.out_channels), rng);
        auto dy = random_values(g.output_size() * batch, rng);
        std::vector<double> y1(g.output_size() * batch), y2(y1.size());
        kernels::conv2d_forward(g, batch, x.data(), w.data(), b.data(), y1.data());
        kernels::reference::conv2d_forward(g, batch, x.data(), w.data(), b.data(), y2.data());
        check_close(y1, y2, 1e-12);

        std::vector<double> dx1(x.size()), dw1(w.size()), db1(b.size());
        std::vector<double> dx2(x.size()), dw2(w.size()), db2(b.size());
        kernels::conv2d_backward(g, batch, x.data(), w.data(), dy.data(), dx1.data(), dw1.data(), db1.data());
        kernels::reference::conv2d_backward(g, batch, x.data(), w.data(), dy.data(), dx2.data(), dw2.data(),
                                            db2.data());
        check_close(dx1, dx2, 1e-12);
        check_close(dw1, dw2, 1e-12);
        check_close(db1, db2, 1e-12);
      }
    }
  }

  TEST_CASE("convolution against a hand-computed 3x3 example") {
    // Single channel, 3x3 input, 3x3 kernel of ones, same padding: each output
    // is the sum of its in-bounds neighbourhood.
    const auto g = kernels::ConvGeometry::same(1, 3, 3, 1, 3, 1);
    const std::vector<double> x{1, 2, 3, 4, 5, 6, 7, 8, 9};
    const std::vector<double> w(9, 1.0);
    std::vector<double> y(9);
    kernels::conv2d_forward(g, 1, x.data(), w.data(), nullptr, y.data());
    const std::vector<double> expected{12, 21, 16, 27, 45, 33, 24, 39, 28};
    check_close(y, expected, 0);
  }

  TEST_CASE("max pool matches the reference and routes gradients to the argmax") {
    std::mt19937_64 rng(5);
    const auto g = kernels::PoolGeometry::floor(2, 7, 9, 2);
    CHECK(g.out_height == 3);
    CHECK(g.out_width == 4);
    const int batch = 2;
    auto x = random_values(static_cast<std::size_t>(2 * 7 * 9 * batch), rng);
    const std::size_t out = static_cast<std::size_t>(2 * 3 * 4 * batch);
    std::vector<double> y1(out), y2(out);
    std::vector<int> a1(out), a2(out);
    kernels::max_pool2d_forward(g, batch, x.data(), y1.data(), a1.data());
    kernels::reference::max_pool2d_forward(g, batch, x.data(), y2.data(), a2.data());
    check_close(y1, y2, 0);
    CHECK(a1 == a2);

    std::vector<double> dy(out, 1.0), dx(x.size(), 0.0);
    kernels::max_pool2d_backward(g, batch, a1.data(), dy.data(), dx.data());
    double total = 0;
    for (double v : dx) total += v;
    CHECK(total == doctest::Approx(static_cast<double>(out)));
  }

  TEST_CASE("bilinear resize matches the reference and keeps constants") {
    std::mt19937_64 rng(3);
    auto x = random_values(3 * 10 * 14, rng);
    std::vector<double> y1(3 * 7 * 19), y2(y1.size());
    kernels::resize_bilinear(3, 10, 14, x.data(), 7, 19, y1.data());
    kernels::reference::resize_bilinear(3, 10, 14, x.data(), 7, 19, y2.data());
    check_close(y1, y2, 1e-12);

    std::vector<double> flat(3 * 10 * 14, 0.25), out(3 * 5 * 6);
    kernels::resize_bilinear(3, 10, 14, flat.data(), 5, 6, out.data());
    for (double v : out) CHECK(v == doctest::Approx(0.25).epsilon(1e-15));
  }
}

TEST_SUITE("autograd") {
  TEST_CASE("elementwise and reduction ops pass finite-difference checks") {
    std::mt19937_64 rng(1);
    Var a = leaf(random_tensor({3, 4}, rng));
    Var b = leaf(random_tensor({3, 4}, rng));
    Var row = leaf(random_tensor({4}, rng));
    Var col = leaf(random_tensor({3, 1}, rng));
    Var pos = leaf(random_tensor({3, 4}, rng, 0.5, 2.0));
    auto f = [&] {
      Var s = sigmoid(a) * tanh(b) + exp(scale(a, 0.3)) - square(b);
      s = add_row(s, row);
      s = mul_column(s, col);
      s = s + log(pos) + sqrt(pos) + clamp(a, -0.9, 0.9) + add_scalar(b, 2.0);
      Var joined = concat_columns({slice_columns(s, 1, 2), relu(s), softmax_rows(b)});
      return add(sum(sum_columns(joined)), mean(reshape(joined, {30, 1})));
    };
    CHECK(directional_grad_error({a, b, row, col, pos}, f, 7) < 1e-6);
  }

  TEST_CASE("matmul and linear pass finite-difference checks") {
    std::mt19937_64 rng(2);
    Var x = leaf(random_tensor({2, 5}, rng));
    Var w = leaf(random_tensor({5, 3}, rng));
    Var bias = leaf(random_tensor({3}, rng));
    Var w2 = leaf(random_tensor({3, 2}, rng));
    auto f = [&] { return sum(square(matmul(linear(x, w, bias), w2))); };
    CHECK(directional_grad_error({x, w, bias, w2}, f, 8) < 1e-6);
  }

  TEST_CASE("spatial ops pass finite-difference checks") {
    std::mt19937_64 rng(3);
    Var x = leaf(random_tensor({4, 2, 6, 7}, rng));
    Var w = leaf(random_tensor({3, 2, 3, 3}, rng));
    Var b = leaf(random_tensor({3}, rng));
    const auto g = kernels::ConvGeometry::same(2, 6, 7, 3, 3, 2);
    auto f = [&] {
      Var y = conv2d(x, w, b, g);
      Var p = max_pool2d(y, 2);
      Var gap = global_avg_pool(y);
      return add(sum(square(p)), sum(square(group_mean_rows(gap, 2))));
    };
    CHECK(directional_grad_error({x, w, b}, f, 9) < 1e-6);
  }

  TEST_CASE("gradients accumulate across backward calls until zeroed") {
    Var a = leaf(Tensor(Shape{2}, std::vector<double>{1.0, 2.0}));
    backward(sum(scale(a, 3.0)));
    backward(sum(scale(a, 3.0)));
    CHECK(a.grad()[0] == doctest::Approx(6.0));
    a.zero_grad();
    backward(sum(a));
    CHECK(a.grad()[1] == doctest::Approx(1.0));
  }

  TEST_CASE("no-grad mode records no parents") {
    Var a = leaf(Tensor(Shape{2}, 1.0));
    NoGradGuard guard;
    Var y = sum(square(a));
    CHECK_FALSE(y.requires_grad());
    CHECK(y.node().parents.empty());
  }
}
