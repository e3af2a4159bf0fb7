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

// Named model parameters. Insertion order is the canonical order for the
// optimizer state and checkpoints.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ptinet/autograd.hpp"

namespace ptinet {

enum class InitKind { kZero, kConstant, kUniform };

struct Init {
  InitKind kind = InitKind::kZero;
  double value = 0.0;  // constant value, or the uniform half-range

  static Init zero() { return {}; }
  static Init constant(double v) { return {InitKind::kConstant, v}; }
  static Init uniform(double bound) { return {InitKind::kUniform, bound}; }
  // U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  static Init fan_in(int fan_in);
};

class ParamStore {
 public:
  struct Entry {
    std::string name;
    Var var;
    Init init;
  };

  // Zero-filled until initialize(). Duplicate names throw.
  Var add(const std::string& name, Shape shape, Init init);
  Var get(const std::string& name) const;
  bool contains(const std::string& name) const;

  // Each parameter draws from its own stream keyed by (seed, name), so adding
  // a parameter never changes the values of the others.
  void initialize(std::uint64_t seed);
  void fill(double v);
  void zero_grad();

  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t parameter_count() const;

 private:
  std::vector<Entry> entries_;
};

std::uint64_t stable_hash(const std::string& text);

}  // namespace ptinet
