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

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "pgl/synthgen.hpp"

namespace pgl {

// (C+1) x (C+1) counts, rows = true label, columns = prediction.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes);
  ConfusionMatrix(std::span<const Label> truth, std::span<const Label> predicted, int num_classes);

  void add(Label truth, Label predicted, std::size_t count = 1);
  std::size_t at(Label truth, Label predicted) const;
  std::size_t row_total(Label truth) const;
  std::size_t total() const;
  int num_classes() const { return num_classes_; }

 private:
  int num_classes_;
  std::vector<std::size_t> counts_;
};

struct OpenSetScores {
  double all = 0.0;
  double os = 0.0;
  double os_star = 0.0;
  double acc_unknown = 0.0;
  // Entry c-1 is the accuracy of class c; NaN for classes absent from the truth.
  std::vector<double> per_class;
  std::vector<std::string> warnings;
};

OpenSetScores score(const ConfusionMatrix& cm);
OpenSetScores score(std::span<const Label> truth, std::span<const Label> predicted,
                    int num_classes);

// OS == (C * OS* + acc_unknown) / (C + 1) within 1e-12. Requires every class
// to be present in the truth.
bool identity_check(const OpenSetScores& scores, int num_classes);

}  // namespace pgl
