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

#include "pgl/evalmetrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace pgl {

ConfusionMatrix::ConfusionMatrix(int num_classes) : num_classes_(num_classes) {
  if (num_classes < 1) throw std::invalid_argument("confusion: num_classes must be >= 1");
  const auto k = static_cast<std::size_t>(num_classes + 1);
  counts_.assign(k * k, 0);
}

ConfusionMatrix::ConfusionMatrix(std::span<const Label> truth, std::span<const Label> predicted,
                                 int num_classes)
    : ConfusionMatrix(num_classes) {
  if (truth.size() != predicted.size()) {
    throw std::invalid_argument("confusion: truth and prediction lengths differ");
  }
  for (std::size_t i = 0; i < truth.size(); ++i) add(truth[i], predicted[i]);
}

void ConfusionMatrix::add(Label truth, Label predicted, std::size_t count) {
  const Label hi = num_classes_ + 1;
  if (truth < 1 || truth > hi || predicted < 1 || predicted > hi) {
    throw std::invalid_argument("confusion: label outside 1.." + std::to_string(hi));
  }
  const auto k = static_cast<std::size_t>(hi);
  counts_[static_cast<std::size_t>(truth - 1) * k + static_cast<std::size_t>(predicted - 1)] +=
      count;
}

std::size_t ConfusionMatrix::at(Label truth, Label predicted) const {
  const auto k = static_cast<std::size_t>(num_classes_ + 1);
  return counts_.at(static_cast<std::size_t>(truth - 1) * k +
                    static_cast<std::size_t>(predicted - 1));
}

std::size_t ConfusionMatrix::row_total(Label truth) const {
  std::size_t s = 0;
  for (Label p = 1; p <= num_classes_ + 1; ++p) s += at(truth, p);
  return s;
}

std::size_t ConfusionMatrix::total() const {
  std::size_t s = 0;
  for (auto c : counts_) s += c;
  return s;
}

OpenSetScores score(const ConfusionMatrix& cm) {
  const int C = cm.num_classes();
  OpenSetScores out;
  out.per_class.assign(static_cast<std::size_t>(C + 1), std::numeric_limits<double>::quiet_NaN());
  std::size_t correct = 0;
  double known_sum = 0.0;
  int known_present = 0;
  for (Label c = 1; c <= C + 1; ++c) {
    correct += cm.at(c, c);
    const auto n = cm.row_total(c);
    if (n == 0) {
      out.warnings.push_back("class " + std::to_string(c) +
                             " absent from truth; excluded from OS/OS*");
      continue;
    }
    const double acc = static_cast<double>(cm.at(c, c)) / static_cast<double>(n);
    out.per_class[static_cast<std::size_t>(c - 1)] = acc;
    if (c <= C) {
      known_sum += acc;
      ++known_present;
    }
  }
  const auto total = cm.total();
  out.all = total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
  out.acc_unknown = out.per_class.back();
  out.os_star = known_present ? known_sum / known_present : 0.0;
  const bool unk_present = !std::isnan(out.acc_unknown);
  const int present = known_present + (unk_present ? 1 : 0);
  out.os = present ? (known_sum + (unk_present ? out.acc_unknown : 0.0)) / present : 0.0;
  return out;
}

OpenSetScores score(std::span<const Label> truth, std::span<const Label> predicted,
                    int num_classes) {
  return score(ConfusionMatrix(truth, predicted, num_classes));
}

bool identity_check(const OpenSetScores& scores, int num_classes) {
  if (!scores.warnings.empty()) return false;
  const double C = num_classes;
  return std::abs(scores.os - (C * scores.os_star + scores.acc_unknown) / (C + 1.0)) <= 1e-12;
}

}  // namespace pgl
