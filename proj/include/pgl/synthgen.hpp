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

// Synthetic open-set domain pairs built from Gaussian clusters.
//
// Known classes sit on a circle in the first two feature dimensions; the
// other dimensions are isotropic noise. The target domain reuses the source
// clusters after a rotation/translation/scale shift and adds unknown-class
// clusters on the angular bisectors, by default at twice the radius between known means.

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

namespace pgl {

// Labels are 1-based: known classes 1..C, unknown C+1.
using Label = int;

struct DomainShift {
  double rotation_rad = 0.0;
  std::vector<double> translation;  // padded with zeros to feature_dim
  double scale_jitter = 0.0;        // per-class std multiplier drawn in [1-j, 1+j]
};

struct GenSpec {
  int known_classes = 4;
  int unknown_clusters = 4;
  std::size_t feature_dim = 16;
  std::size_t n_source = 2000;
  std::size_t n_target = 2000;
  double openness = 0.5;
  DomainShift shift;
  std::optional<std::vector<double>> source_priors;
  std::optional<std::vector<double>> target_priors;  // over the known classes
  double radius = 2.0;
  // Unknown cluster means sit at this multiple of `radius`.
  double unknown_radius_factor = 2.0;
  double cluster_std = 0.4;
  std::uint64_t seed = 0;

  // Throws std::invalid_argument on a violated invariant.
  void validate() const;
  std::size_t unknown_count() const;
};

struct Sample {
  std::vector<double> features;
  Label label;
};

struct DomainPair {
  std::vector<Sample> source;
  std::vector<Sample> target;  // labels are hidden ground truth
  GenSpec spec;

  int num_classes() const { return spec.known_classes; }
  Label unknown_label() const { return spec.known_classes + 1; }
};

// Round half up.
std::size_t round_count(double x);

// Splits `total` across classes by round-half-up, remainder to the last class.
std::vector<std::size_t> allocate_counts(std::size_t total, const std::vector<double>& priors);

DomainPair generate(const GenSpec& spec);

struct HoldoutSplit {
  DomainPair train;  // target restricted to the training part
  std::vector<Sample> eval;
  std::vector<std::size_t> train_ids;  // indices into the original target
  std::vector<std::size_t> eval_ids;
};

// Stratified by hidden target label; deterministic given `seed`.
HoldoutSplit holdout_split(const DomainPair& pair, double eval_fraction, std::uint64_t seed);

// CSV with columns domain,split,hidden_label,f0..f{d-1}.
void write_domain_csv(std::ostream& out, const DomainPair& pair,
                      const std::vector<std::size_t>* eval_ids = nullptr);

}  // namespace pgl
