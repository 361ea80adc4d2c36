/*
 * Copyright 2026 The PGL Lab Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pgl/tensor.hpp"

namespace pgl {

struct NamedParameter {
  std::string name;
  Tensor tensor;
};

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with decoupled weight decay. Moment buffers are keyed by parameter
// position and persist across step() calls.
class Adam {
 public:
  explicit Adam(std::vector<NamedParameter> params, AdamOptions options = {});

  // Applies one update with the given rate to every parameter that holds a
  // gradient, then drops the gradients. Parameters without one are untouched.
  void step(double lr, double weight_decay);

  const std::vector<NamedParameter>& params() const { return params_; }
  std::uint64_t steps_taken() const { return t_; }

  // Moment state, exposed for checkpointing.
  std::vector<std::vector<double>>& first_moments() { return m_; }
  std::vector<std::vector<double>>& second_moments() { return v_; }
  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }
  void set_steps_taken(std::uint64_t t) { t_ = t; }

 private:
  std::vector<NamedParameter> params_;
  AdamOptions options_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::uint64_t t_ = 0;
};

}  // namespace pgl
