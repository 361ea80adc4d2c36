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

// Exact checks of the open-set adaptation bounds on finite instances.
//
// Inputs are finite point sets with explicit joint masses, and hypotheses are
// lookup tables, so every risk, discrepancy supremum and shared-error minimum
// is computed by enumeration under the 0-1 loss.

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pgl/synthgen.hpp"

namespace pgl::bounds {

// h(x) for every point x, labels in 1..C+1.
using Hypothesis = std::vector<Label>;

enum class Domain { Source, Target };

struct FiniteInstance {
  std::size_t num_points = 0;
  int num_classes = 0;
  std::vector<double> source_mass;  // num_points x C, row-major
  std::vector<double> target_mass;  // num_points x (C+1), row-major
  std::vector<Hypothesis> hypotheses;
  std::vector<std::size_t> h1;  // indices into hypotheses
  std::vector<std::size_t> h2;

  void validate() const;
  double mass(Domain d, std::size_t x, Label y) const;
  double prior(Domain d, Label y) const;
  double unknown_prior() const { return prior(Domain::Target, num_classes + 1); }
  Label unknown_label() const { return num_classes + 1; }
};

struct RiskResult {
  double value = 0.0;
  std::vector<std::string> warnings;
};

// Expected 0-1 loss. With `restrict`, only classes in the set contribute,
// as sum_i pi_i R_i over the listed classes.
RiskResult risk(const FiniteInstance& inst, const Hypothesis& h, Domain d,
                const std::optional<std::vector<Label>>& restrict = std::nullopt);

// R_{d,i}(h): 0-1 loss conditioned on class i. Zero-mass classes give 0.
double partial_risk(const FiniteInstance& inst, const Hypothesis& h, Domain d, Label i);

// Direct sum over (x, y) of mass * [h(x) != y].
double direct_risk(const FiniteInstance& inst, const Hypothesis& h, Domain d);

std::vector<double> source_marginal(const FiniteInstance& inst);
std::vector<double> target_marginal(const FiniteInstance& inst);
// Target marginal restricted to known classes, renormalized.
std::vector<double> target_known_marginal(const FiniteInstance& inst);

inline constexpr std::size_t kMaxEnumeratedHypotheses = 200;

// sup over ordered pairs (h, h') of |E_p [h != h'] - E_q [h != h']|.
double discrepancy(const std::vector<double>& p, const std::vector<double>& q,
                   const std::vector<Hypothesis>& hypotheses);

struct BoundTerms {
  std::size_t hypothesis = 0;
  double lhs = 0.0;          // R_t(h) / (1 - pi_{C+1})
  double source_risk = 0.0;  // R_s(h)
  double disc = 0.0;
  double lambda = 0.0;
  double openset_term = 0.0;  // pi/(1-pi) R_{t,C+1}(h)
  double slack = 0.0;         // rhs - lhs
};

struct OudaReport {
  std::vector<BoundTerms> per_hypothesis;
  BoundTerms tightest;  // minimum slack
};

// Open-set bound with R_t*(h) = sum_{i<=C} pi_i^t R_{t,i}(h) inside lambda.
OudaReport check_ouda_bound(const FiniteInstance& inst);

// Closed-set form: R_t(h) <= R_s(h) + disc(Q_X, P_X) + min_h (R_t + R_s).
OudaReport check_closed_set_bound(const FiniteInstance& inst);

struct TightnessReport {
  double sup_h1_source = 0.0;
  double sup_h_source = 0.0;
  double sup_h2_openset = 0.0;
  double sup_h_openset = 0.0;
  bool source_holds = false;
  bool openset_holds = false;
};

TightnessReport check_subset_tightness(const FiniteInstance& inst);

// Progressive bound without its unspecified constant, for reporting only.
// The combined classifier predicts h_b(x) when it is C+1, else h(x).
struct ProgressiveBoundReport {
  double pi_alpha = 0.0;
  double min_slack = 0.0;
  std::size_t h = 0;
  std::size_t hb = 0;
};

ProgressiveBoundReport progressive_bound_slack(const FiniteInstance& inst, double pi_alpha);

struct InstanceOptions {
  std::size_t max_points = 6;
  int max_classes = 3;
  std::size_t max_hypotheses = 50;
  bool closed_set = false;  // pi_{C+1} = 0
};

// Random valid instance: the constant C+1 hypothesis is always present and
// H1, H2 are nested subsets of H.
FiniteInstance random_instance(std::uint64_t seed, const InstanceOptions& options = {});

// CSV header: instance_seed,lhs,rs,disc,lambda,openset_term,slack.
void write_report_header(std::ostream& out);
void write_report_row(std::ostream& out, std::uint64_t seed, const BoundTerms& t);

// Plain-text dump of an instance, written when a check fails.
void write_instance(std::ostream& out, const FiniteInstance& inst);

}  // namespace pgl::bounds
