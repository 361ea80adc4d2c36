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

#include "pgl/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>

#include "pgl/rng.hpp"

namespace pgl {

namespace {

void check_priors(const std::vector<double>& priors, int classes, const char* which) {
  if (priors.size() != static_cast<std::size_t>(classes)) {
    throw std::invalid_argument(std::string("generate: ") + which + " priors have " +
                                std::to_string(priors.size()) + " entries, expected " +
                                std::to_string(classes));
  }
  double s = 0.0;
  for (double p : priors) {
    if (p < 0.0) throw std::invalid_argument(std::string("generate: negative ") + which + " prior");
    s += p;
  }
  if (std::abs(s - 1.0) > 1e-12) {
    throw std::invalid_argument(std::string("generate: ") + which + " priors sum to " +
                                std::to_string(s));
  }
}

std::vector<double> uniform_priors(int n) {
  return std::vector<double>(static_cast<std::size_t>(n), 1.0 / n);
}

std::vector<double> draw(Rng& rng, const std::vector<double>& mean, double stddev) {
  std::vector<double> x(mean.size());
  for (std::size_t k = 0; k < x.size(); ++k) x[k] = mean[k] + stddev * rng.normal();
  return x;
}

std::vector<double> circle_point(std::size_t dim, double radius, double angle) {
  std::vector<double> m(dim, 0.0);
  m[0] = radius * std::cos(angle);
  if (dim > 1) m[1] = radius * std::sin(angle);
  return m;
}

}  // namespace

void GenSpec::validate() const {
  if (known_classes < 1) throw std::invalid_argument("generate: known_classes must be >= 1");
  if (unknown_clusters < 0) throw std::invalid_argument("generate: unknown_clusters must be >= 0");
  if (feature_dim < 2) throw std::invalid_argument("generate: feature_dim must be >= 2");
  if (n_source == 0 || n_target == 0) {
    throw std::invalid_argument("generate: n_source and n_target must be positive");
  }
  if (!(openness >= 0.0 && openness < 1.0)) {
    throw std::invalid_argument("generate: openness must lie in [0, 1), got " +
                                std::to_string(openness));
  }
  if (openness > 0.0 && unknown_clusters == 0) {
    throw std::invalid_argument("generate: openness > 0 requires at least one unknown cluster");
  }
  if (cluster_std <= 0.0 || radius <= 0.0 || unknown_radius_factor <= 0.0) {
    throw std::invalid_argument(
        "generate: radius, cluster_std and unknown_radius_factor must be positive");
  }
  if (shift.scale_jitter < 0.0 || shift.scale_jitter >= 1.0) {
    throw std::invalid_argument("generate: scale_jitter must lie in [0, 1)");
  }
  if (shift.translation.size() > feature_dim) {
    throw std::invalid_argument("generate: translation longer than feature_dim");
  }
  if (source_priors) check_priors(*source_priors, known_classes, "source");
  if (target_priors) check_priors(*target_priors, known_classes, "target");
}

std::size_t GenSpec::unknown_count() const {
  return round_count(openness * static_cast<double>(n_target));
}

std::size_t round_count(double x) {
  // Products like 0.6 * 0.05 * 1000 land a few ulps off the intended integer;
  // the slack keeps exact halves rounding up.
  return static_cast<std::size_t>(std::floor(x + 0.5 + 1e-9));
}

std::vector<std::size_t> allocate_counts(std::size_t total, const std::vector<double>& priors) {
  std::vector<std::size_t> counts(priors.size(), 0);
  if (priors.empty()) return counts;
  std::size_t used = 0;
  for (std::size_t c = 0; c + 1 < priors.size(); ++c) {
    counts[c] = std::min(total - used, round_count(priors[c] * static_cast<double>(total)));
    used += counts[c];
  }
  counts.back() = total - used;
  return counts;
}

DomainPair generate(const GenSpec& spec) {
  spec.validate();
  const int C = spec.known_classes;
  const std::size_t d = spec.feature_dim;
  const double two_pi = 2.0 * std::numbers::pi;

  Rng source_rng(spec.seed, "synth.source");
  Rng target_rng(spec.seed, "synth.target");
  Rng shift_rng(spec.seed, "synth.shift");
  Rng order_rng(spec.seed, "synth.order");

  std::vector<std::vector<double>> means;
  for (int c = 0; c < C; ++c) means.push_back(circle_point(d, spec.radius, two_pi * c / C));

  std::vector<double> class_scale(static_cast<std::size_t>(C), 1.0);
  for (auto& s : class_scale) {
    s = 1.0 + spec.shift.scale_jitter * shift_rng.uniform(-1.0, 1.0);
  }
  std::vector<double> translation(d, 0.0);
  std::copy(spec.shift.translation.begin(), spec.shift.translation.end(), translation.begin());
  const double cr = std::cos(spec.shift.rotation_rad), sr = std::sin(spec.shift.rotation_rad);

  DomainPair pair;
  pair.spec = spec;

  const auto source_counts =
      allocate_counts(spec.n_source, spec.source_priors.value_or(uniform_priors(C)));
  for (int c = 0; c < C; ++c) {
    for (std::size_t k = 0; k < source_counts[static_cast<std::size_t>(c)]; ++k) {
      pair.source.push_back(
          {draw(source_rng, means[static_cast<std::size_t>(c)], spec.cluster_std), c + 1});
    }
  }

  const std::size_t n_unknown = spec.unknown_count();
  const std::size_t n_known = spec.n_target - n_unknown;
  const auto target_counts =
      allocate_counts(n_known, spec.target_priors.value_or(uniform_priors(C)));
  for (int c = 0; c < C; ++c) {
    const auto ci = static_cast<std::size_t>(c);
    for (std::size_t k = 0; k < target_counts[ci]; ++k) {
      auto x = draw(target_rng, means[ci], spec.cluster_std * class_scale[ci]);
      const double x0 = x[0], x1 = x[1];
      x[0] = cr * x0 - sr * x1;
      x[1] = sr * x0 + cr * x1;
      for (std::size_t j = 0; j < d; ++j) x[j] += translation[j];
      pair.target.push_back({std::move(x), c + 1});
    }
  }
  if (n_unknown > 0) {
    const int U = spec.unknown_clusters;
    const auto unknown_counts = allocate_counts(n_unknown, uniform_priors(U));
    for (int u = 0; u < U; ++u) {
      const auto mean =
          circle_point(d, spec.unknown_radius_factor * spec.radius, two_pi * (u + 0.5) / U);
      for (std::size_t k = 0; k < unknown_counts[static_cast<std::size_t>(u)]; ++k) {
        pair.target.push_back({draw(target_rng, mean, spec.cluster_std), C + 1});
      }
    }
  }

  std::shuffle(pair.source.begin(), pair.source.end(), order_rng.engine());
  std::shuffle(pair.target.begin(), pair.target.end(), order_rng.engine());
  return pair;
}

HoldoutSplit holdout_split(const DomainPair& pair, double eval_fraction, std::uint64_t seed) {
  if (!(eval_fraction > 0.0 && eval_fraction < 1.0)) {
    throw std::invalid_argument("holdout_split: eval_fraction must lie in (0, 1)");
  }
  const int classes = pair.num_classes() + 1;
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(classes));
  for (std::size_t i = 0; i < pair.target.size(); ++i) {
    by_class[static_cast<std::size_t>(pair.target[i].label - 1)].push_back(i);
  }
  Rng rng(seed, "holdout");
  HoldoutSplit split;
  for (int c = 0; c < classes; ++c) {
    auto& ids = by_class[static_cast<std::size_t>(c)];
    if (ids.empty()) continue;
    if (ids.size() < 2) {
      throw std::invalid_argument("holdout_split: class " + std::to_string(c + 1) +
                                  " has fewer than 2 target samples");
    }
    std::shuffle(ids.begin(), ids.end(), rng.engine());
    const std::size_t n_eval = round_count(eval_fraction * static_cast<double>(ids.size()));
    split.eval_ids.insert(split.eval_ids.end(), ids.begin(), ids.begin() + n_eval);
    split.train_ids.insert(split.train_ids.end(), ids.begin() + n_eval, ids.end());
  }
  std::sort(split.eval_ids.begin(), split.eval_ids.end());
  std::sort(split.train_ids.begin(), split.train_ids.end());
  split.train.source = pair.source;
  split.train.spec = pair.spec;
  for (auto i : split.train_ids) split.train.target.push_back(pair.target[i]);
  for (auto i : split.eval_ids) split.eval.push_back(pair.target[i]);
  return split;
}

void write_domain_csv(std::ostream& out, const DomainPair& pair,
                      const std::vector<std::size_t>* eval_ids) {
  const std::size_t d = pair.spec.feature_dim;
  out << "domain,split,hidden_label";
  for (std::size_t k = 0; k < d; ++k) out << ",f" << k;
  out << '\n';
  std::vector<bool> is_eval(pair.target.size(), false);
  if (eval_ids) {
    for (auto i : *eval_ids) is_eval.at(i) = true;
  }
  auto row = [&](const char* domain, const char* split, const Sample& s) {
    out << domain << ',' << split << ',' << s.label;
    char buf[32];
    for (double v : s.features) {
      std::snprintf(buf, sizeof buf, ",%.17g", v);
      out << buf;
    }
    out << '\n';
  };
  for (const auto& s : pair.source) row("source", "train", s);
  for (std::size_t i = 0; i < pair.target.size(); ++i) {
    row("target", is_eval[i] ? "eval" : "train", pair.target[i]);
  }
}

}  // namespace pgl
