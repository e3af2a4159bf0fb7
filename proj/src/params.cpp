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

#include "ptinet/params.hpp"

#include <cmath>
#include <random>

#include "ptinet/errors.hpp"

namespace ptinet {

Init Init::fan_in(int fan_in) { return uniform(1.0 / std::sqrt(static_cast<double>(fan_in))); }

std::uint64_t stable_hash(const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

Var ParamStore::add(const std::string& name, Shape shape, Init init) {
  if (contains(name)) throw ConfigError("duplicate parameter " + name);
  Var v = leaf(Tensor(std::move(shape)), true);
  entries_.push_back({name, v, init});
  return v;
}

Var ParamStore::get(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e.var;
  }
  throw ConfigError("unknown parameter " + name);
}

bool ParamStore::contains(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return true;
  }
  return false;
}

void ParamStore::initialize(std::uint64_t seed) {
  for (auto& e : entries_) {
    Tensor& t = e.var.mutable_value();
    switch (e.init.kind) {
      case InitKind::kZero:
        t.fill(0.0);
        break;
      case InitKind::kConstant:
        t.fill(e.init.value);
        break;
      case InitKind::kUniform: {
        std::mt19937_64 rng(seed ^ stable_hash(e.name));
        std::uniform_real_distribution<double> u(-e.init.value, e.init.value);
        for (double& x : t.values()) x = u(rng);
        break;
      }
    }
  }
}

void ParamStore::fill(double v) {
  for (auto& e : entries_) e.var.mutable_value().fill(v);
}

void ParamStore::zero_grad() {
  for (auto& e : entries_) e.var.zero_grad();
}

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.var.value().size();
  return n;
}

}  // namespace ptinet
