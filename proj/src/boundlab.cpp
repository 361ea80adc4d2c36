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

#include "pgl/boundlab.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "pgl/rng.hpp"

namespace pgl::bounds {

namespace {

std::size_t width(const FiniteInstance& inst, Domain d) {
  return static_cast<std::size_t>(d == Domain::Source ? inst.num_classes : inst.num_classes + 1);
}

const std::vector<double>& masses(const FiniteInstance& inst, Domain d) {
  return d == Domain::Source ? inst.source_mass : inst.target_mass;
}

double sum_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

bool outputs_unknown_on_source_support(const FiniteInstance& inst, const Hypothesis& h) {
  for (std::size_t x = 0; x < inst.num_points; ++x) {
    double support = 0.0;
    for (Label y = 1; y <= inst.num_classes; ++y) support += inst.mass(Domain::Source, x, y);
    if (support > 0.0 && h[x] == inst.unknown_label()) return true;
  }
  return false;
}

}  // namespace

void FiniteInstance::validate() const {
  if (num_points == 0 || num_classes < 1) {
    throw std::invalid_argument("instance: need at least one point and one class");
  }
  const auto C = static_cast<std::size_t>(num_classes);
  if (source_mass.size() != num_points * C || target_mass.size() != num_points * (C + 1)) {
    throw std::invalid_argument("instance: mass tables have the wrong size");
  }
  for (const auto* m : {&source_mass, &target_mass}) {
    for (double v : *m) {
      if (v < 0.0) throw std::invalid_argument("instance: negative mass");
    }
    if (std::abs(sum_of(*m) - 1.0) > 1e-12) {
      throw std::invalid_argument("instance: masses must sum to 1");
    }
  }
  bool has_constant_unknown = false;
  for (const auto& h : hypotheses) {
    if (h.size() != num_points) throw std::invalid_argument("instance: hypothesis size mismatch");
    for (Label y : h) {
      if (y < 1 || y > num_classes + 1) throw std::invalid_argument("instance: label out of range");
    }
    has_constant_unknown |=
        std::all_of(h.begin(), h.end(), [&](Label y) { return y == num_classes + 1; });
  }
  if (!has_constant_unknown) {
    throw std::invalid_argument("instance: the constant C+1 hypothesis must belong to H");
  }
  for (auto i : h1) {
    if (i >= hypotheses.size()) throw std::invalid_argument("instance: H1 index out of range");
    if (outputs_unknown_on_source_support(*this, hypotheses[i])) {
      throw std::invalid_argument("instance: H1 member outputs C+1 on the source support");
    }
  }
  for (auto i : h2) {
    if (i >= hypotheses.size()) throw std::invalid_argument("instance: H2 index out of range");
  }
}

double FiniteInstance::mass(Domain d, std::size_t x, Label y) const {
  const auto w = width(*this, d);
  return masses(*this, d)[x * w + static_cast<std::size_t>(y - 1)];
}

double FiniteInstance::prior(Domain d, Label y) const {
  double s = 0.0;
  for (std::size_t x = 0; x < num_points; ++x) s += mass(d, x, y);
  return s;
}

double partial_risk(const FiniteInstance& inst, const Hypothesis& h, Domain d, Label i) {
  const double pi = inst.prior(d, i);
  if (pi <= 0.0) return 0.0;
  double wrong = 0.0;
  for (std::size_t x = 0; x < inst.num_points; ++x) {
    if (h[x] != i) wrong += inst.mass(d, x, i);
  }
  return wrong / pi;
}

RiskResult risk(const FiniteInstance& inst, const Hypothesis& h, Domain d,
                const std::optional<std::vector<Label>>& restrict) {
  RiskResult out;
  std::vector<Label> classes;
  if (restrict) {
    classes = * restrict;
  } else {
    for (Label y = 1; y <= static_cast<Label>(width(inst, d)); ++y) classes.push_back(y);
  }
  for (Label i : classes) {
    if (i < 1 || i > static_cast<Label>(width(inst, d))) {
      throw std::invalid_argument("risk: class " + std::to_string(i) + " not in the domain");
    }
    const double pi = inst.prior(d, i);
    if (pi <= 0.0) {
      if (restrict) out.warnings.push_back("class " + std::to_string(i) + " has zero mass");
      continue;
    }
    out.value += pi * partial_risk(inst, h, d, i);
  }
  return out;
}

double direct_risk(const FiniteInstance& inst, const Hypothesis& h, Domain d) {
  double s = 0.0;
  const auto w = static_cast<Label>(width(inst, d));
  for (std::size_t x = 0; x < inst.num_points; ++x)
    for (Label y = 1; y <= w; ++y)
      if (h[x] != y) s += inst.mass(d, x, y);
  return s;
}

std::vector<double> source_marginal(const FiniteInstance& inst) {
  std::vector<double> p(inst.num_points, 0.0);
  for (std::size_t x = 0; x < inst.num_points; ++x)
    for (Label y = 1; y <= inst.num_classes; ++y) p[x] += inst.mass(Domain::Source, x, y);
  return p;
}

std::vector<double> target_marginal(const FiniteInstance& inst) {
  std::vector<double> q(inst.num_points, 0.0);
  for (std::size_t x = 0; x < inst.num_points; ++x)
    for (Label y = 1; y <= inst.num_classes + 1; ++y) q[x] += inst.mass(Domain::Target, x, y);
  return q;
}

std::vector<double> target_known_marginal(const FiniteInstance& inst) {
  const double known = 1.0 - inst.unknown_prior();
  if (known <= 0.0) throw std::invalid_argument("target has no known-class mass");
  std::vector<double> q(inst.num_points, 0.0);
  for (std::size_t x = 0; x < inst.num_points; ++x) {
    for (Label y = 1; y <= inst.num_classes; ++y) q[x] += inst.mass(Domain::Target, x, y);
    q[x] /= known;
  }
  return q;
}

double discrepancy(const std::vector<double>& p, const std::vector<double>& q,
                   const std::vector<Hypothesis>& hypotheses) {
  if (hypotheses.size() > kMaxEnumeratedHypotheses) {
    throw std::invalid_argument("discrepancy: |H| = " + std::to_string(hypotheses.size()) +
                                " exceeds the enumeration guard of " +
                                std::to_string(kMaxEnumeratedHypotheses));
  }
  if (p.size() != q.size()) throw std::invalid_argument("discrepancy: marginal size mismatch");
  double best = 0.0;
  for (const auto& h : hypotheses) {
    for (const auto& g : hypotheses) {
      double diff = 0.0;
      for (std::size_t x = 0; x < p.size(); ++x) {
        if (h[x] != g[x]) diff += p[x] - q[x];
      }
      best = std::max(best, std::abs(diff));
    }
  }
  return best;
}

namespace {

OudaReport finish(std::vector<BoundTerms> terms) {
  OudaReport report;
  report.per_hypothesis = std::move(terms);
  report.tightest =
      *std::min_element(report.per_hypothesis.begin(), report.per_hypothesis.end(),
                        [](const BoundTerms& a, const BoundTerms& b) { return a.slack < b.slack; });
  return report;
}

}  // namespace

OudaReport check_ouda_bound(const FiniteInstance& inst) {
  inst.validate();
  const double pi_unk = inst.unknown_prior();
  if (pi_unk >= 1.0) throw std::invalid_argument("check_ouda_bound: target is entirely unknown");
  const double known = 1.0 - pi_unk;
  std::vector<Label> known_classes;
  for (Label y = 1; y <= inst.num_classes; ++y) known_classes.push_back(y);

  const double disc =
      discrepancy(target_known_marginal(inst), source_marginal(inst), inst.hypotheses);
  double lambda = std::numeric_limits<double>::infinity();
  for (const auto& h : inst.hypotheses) {
    const double rt_star = risk(inst, h, Domain::Target, known_classes).value;
    lambda = std::min(lambda, rt_star / known + risk(inst, h, Domain::Source).value);
  }

  std::vector<BoundTerms> terms;
  for (std::size_t k = 0; k < inst.hypotheses.size(); ++k) {
    const auto& h = inst.hypotheses[k];
    BoundTerms t;
    t.hypothesis = k;
    t.lhs = risk(inst, h, Domain::Target).value / known;
    t.source_risk = risk(inst, h, Domain::Source).value;
    t.disc = disc;
    t.lambda = lambda;
    t.openset_term = pi_unk / known * partial_risk(inst, h, Domain::Target, inst.unknown_label());
    t.slack = t.source_risk + t.disc + t.lambda + t.openset_term - t.lhs;
    terms.push_back(t);
  }
  return finish(std::move(terms));
}

OudaReport check_closed_set_bound(const FiniteInstance& inst) {
  inst.validate();
  const double disc = discrepancy(target_marginal(inst), source_marginal(inst), inst.hypotheses);
  double lambda = std::numeric_limits<double>::infinity();
  for (const auto& h : inst.hypotheses) {
    lambda =
        std::min(lambda, risk(inst, h, Domain::Target).value + risk(inst, h, Domain::Source).value);
  }
  std::vector<BoundTerms> terms;
  for (std::size_t k = 0; k < inst.hypotheses.size(); ++k) {
    const auto& h = inst.hypotheses[k];
    BoundTerms t;
    t.hypothesis = k;
    t.lhs = risk(inst, h, Domain::Target).value;
    t.source_risk = risk(inst, h, Domain::Source).value;
    t.disc = disc;
    t.lambda = lambda;
    t.slack = t.source_risk + t.disc + t.lambda - t.lhs;
    terms.push_back(t);
  }
  return finish(std::move(terms));
}

TightnessReport check_subset_tightness(const FiniteInstance& inst) {
  inst.validate();
  const double pi_unk = inst.unknown_prior();
  const double weight = pi_unk < 1.0 ? pi_unk / (1.0 - pi_unk) : 0.0;
  auto source = [&](std::size_t k) { return risk(inst, inst.hypotheses[k], Domain::Source).value; };
  auto openset = [&](std::size_t k) {
    return weight * partial_risk(inst, inst.hypotheses[k], Domain::Target, inst.unknown_label());
  };
  TightnessReport r;
  const double lowest = -std::numeric_limits<double>::infinity();
  r.sup_h1_source = r.sup_h_source = r.sup_h2_openset = r.sup_h_openset = lowest;
  for (std::size_t k = 0; k < inst.hypotheses.size(); ++k) {
    r.sup_h_source = std::max(r.sup_h_source, source(k));
    r.sup_h_openset = std::max(r.sup_h_openset, openset(k));
  }
  for (auto k : inst.h1) r.sup_h1_source = std::max(r.sup_h1_source, source(k));
  for (auto k : inst.h2) r.sup_h2_openset = std::max(r.sup_h2_openset, openset(k));
  r.source_holds = r.sup_h1_source <= r.sup_h_source;
  r.openset_holds = r.sup_h2_openset <= r.sup_h_openset;
  return r;
}

ProgressiveBoundReport progressive_bound_slack(const FiniteInstance& inst, double pi_alpha) {
  inst.validate();
  if (inst.h1.empty() || inst.h2.empty()) {
    throw std::invalid_argument("progressive_bound_slack: H1 and H2 must be nonempty");
  }
  const double pi_unk = inst.unknown_prior();
  const double known = 1.0 - pi_unk;
  std::vector<Label> known_classes;
  for (Label y = 1; y <= inst.num_classes; ++y) known_classes.push_back(y);
  const double disc =
      discrepancy(target_known_marginal(inst), source_marginal(inst), inst.hypotheses);
  double lambda = std::numeric_limits<double>::infinity();
  for (auto k : inst.h1) {
    const auto& h = inst.hypotheses[k];
    lambda = std::min(lambda, risk(inst, h, Domain::Target, known_classes).value / known +
                                  (1.0 - pi_alpha) * risk(inst, h, Domain::Source).value);
  }
  ProgressiveBoundReport report;
  report.pi_alpha = pi_alpha;
  report.min_slack = std::numeric_limits<double>::infinity();
  for (auto k : inst.h1) {
    for (auto b : inst.h2) {
      Hypothesis combined = inst.hypotheses[k];
      for (std::size_t x = 0; x < inst.num_points; ++x) {
        if (inst.hypotheses[b][x] == inst.unknown_label()) combined[x] = inst.unknown_label();
      }
      const double lhs = risk(inst, combined, Domain::Target).value / known;
      const double rhs =
          (1.0 - pi_alpha) * (risk(inst, inst.hypotheses[k], Domain::Source).value + disc) +
          lambda +
          pi_alpha * pi_unk / known *
              partial_risk(inst, inst.hypotheses[b], Domain::Target, inst.unknown_label());
      if (rhs - lhs < report.min_slack) {
        report.min_slack = rhs - lhs;
        report.h = k;
        report.hb = b;
      }
    }
  }
  return report;
}

FiniteInstance random_instance(std::uint64_t seed, const InstanceOptions& options) {
  Rng rng(seed, "bounds.instance");
  FiniteInstance inst;
  inst.num_points = 1 + rng.index(options.max_points);
  inst.num_classes = 1 + static_cast<int>(rng.index(static_cast<std::size_t>(options.max_classes)));
  const auto C = static_cast<std::size_t>(inst.num_classes);

  auto fill = [&](std::vector<double>& m, std::size_t cols, bool drop_unknown) {
    m.assign(inst.num_points * cols, 0.0);
    double total = 0.0;
    for (std::size_t x = 0; x < inst.num_points; ++x) {
      for (std::size_t y = 0; y < cols; ++y) {
        if (drop_unknown && y == cols - 1) continue;
        if (rng.uniform() < 0.6) total += (m[x * cols + y] = rng.uniform());
      }
    }
    if (total == 0.0) {
      m[0] = 1.0;
      total = 1.0;
    }
    for (auto& v : m) v /= total;
  };
  fill(inst.source_mass, C, false);
  fill(inst.target_mass, C + 1, options.closed_set);
  // Keep some known-class mass on the target side.
  double known = 0.0;
  for (std::size_t x = 0; x < inst.num_points; ++x)
    for (std::size_t y = 0; y < C; ++y) known += inst.target_mass[x * (C + 1) + y];
  if (known == 0.0) {
    for (auto& v : inst.target_mass) v *= 0.5;
    inst.target_mass[0] += 0.5;
  }

  const std::size_t n_h = 1 + rng.index(options.max_hypotheses);
  inst.hypotheses.push_back(Hypothesis(inst.num_points, inst.num_classes + 1));
  while (inst.hypotheses.size() < n_h) {
    Hypothesis h(inst.num_points);
    for (auto& y : h) y = static_cast<Label>(1 + rng.index(C + 1));
    inst.hypotheses.push_back(std::move(h));
  }
  for (std::size_t k = 0; k < inst.hypotheses.size(); ++k) {
    if (!outputs_unknown_on_source_support(inst, inst.hypotheses[k]) && rng.uniform() < 0.7) {
      inst.h1.push_back(k);
    }
    if (rng.uniform() < 0.5) inst.h2.push_back(k);
  }
  inst.validate();
  return inst;
}

void write_report_header(std::ostream& out) {
  out << "instance_seed,lhs,rs,disc,lambda,openset_term,slack\n";
}

void write_report_row(std::ostream& out, std::uint64_t seed, const BoundTerms& t) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%llu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                static_cast<unsigned long long>(seed), t.lhs, t.source_risk, t.disc, t.lambda,
                t.openset_term, t.slack);
  out << buf;
}

void write_instance(std::ostream& out, const FiniteInstance& inst) {
  out << "points " << inst.num_points << " classes " << inst.num_classes << '\n';
  out << "source_mass";
  for (double v : inst.source_mass) out << ' ' << v;
  out << "\ntarget_mass";
  for (double v : inst.target_mass) out << ' ' << v;
  out << '\n';
  for (const auto& h : inst.hypotheses) {
    out << "h";
    for (Label y : h) out << ' ' << y;
    out << '\n';
  }
}

}  // namespace pgl::bounds
