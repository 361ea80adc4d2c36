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

// Progressive pseudo-labeling of the target set.
//
// At step m the not-yet-labeled target samples are ranked by classifier
// confidence max_i p(i|x) in ascending order (ties broken by sample id). The
// least confident ones join the unknown store, the most confident join the
// known store with their argmax label. Per-step quotas are chosen so that
// after step m the stores hold round(beta*alpha*m*n) unknowns and
// round((1-beta)*alpha*m*n) knowns; the final step M labels everything,
// with round(beta*n) unknowns.

#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <span>
#include <vector>

#include "pgl/synthgen.hpp"
#include "pgl/tensor.hpp"

namespace pgl {

struct ProgressiveConfig {
  double alpha = 0.05;  // enlarging factor
  double beta = 0.5;    // believed openness
  std::size_t n_target = 0;

  std::size_t total_steps() const;
  void validate() const;

  // Cumulative store sizes after step m.
  std::size_t unknown_quota(std::size_t m) const;
  std::size_t known_quota(std::size_t m) const;

  // Index thresholds alpha_u^(m) = beta*alpha*m*n and
  // alpha_k^(m) = n - (1-beta)*alpha*m*n.
  double unknown_threshold(std::size_t m) const;
  double known_threshold(std::size_t m) const;

  // Fraction of the target set pseudo-labeled after step m.
  double labeled_fraction(std::size_t m) const;
};

struct KnownEntry {
  Label label;
  std::size_t step;
  double confidence;
};

struct UnknownEntry {
  std::size_t step;
  double confidence;
};

struct PseudoLabelStore {
  std::map<std::size_t, KnownEntry> known;
  std::map<std::size_t, UnknownEntry> unknown;
  std::size_t step = 0;

  bool contains(std::size_t id) const { return known.count(id) || unknown.count(id); }
  std::size_t size() const { return known.size() + unknown.size(); }
  // Ids of pseudo-known samples with the given label, ascending.
  std::vector<std::size_t> known_ids_for(Label label) const;
};

// Max probability and argmax (1-based, lowest index on ties) per row.
struct Confidence {
  double value;
  Label label;
};
std::vector<Confidence> confidences(const Tensor& probs);

// Advances the store by one step. `probs` holds one row per target sample,
// indexed by target id, computed with the frozen model.
PseudoLabelStore pseudo_label_step(const Tensor& probs, const PseudoLabelStore& store,
                                   const ProgressiveConfig& config);

// Open-set labels in 1..C+1. Samples present in `store` (looked up through
// `ids`) keep their stored label. The rest are ranked by confidence among all
// queried rows: ranks up to round(beta * labeled_fraction * n) are unknown,
// everything else gets the argmax class. Pass store = nullptr for samples
// outside the pseudo-labeled set.
std::vector<Label> predict_openset(const Tensor& probs, std::span<const std::size_t> ids,
                                   const PseudoLabelStore* store, double beta,
                                   double labeled_fraction);

// CSV: id,assigned_step,kind,pseudo_label,confidence_at_assignment.
void write_store_csv(std::ostream& out, const PseudoLabelStore& store, int num_classes);

}  // namespace pgl
