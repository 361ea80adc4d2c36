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

#include "pgl/progressive.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>

namespace pgl {

std::size_t ProgressiveConfig::total_steps() const {
  return std::max<std::size_t>(1, round_count(1.0 / alpha));
}

void ProgressiveConfig::validate() const {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("progressive: alpha must lie in (0, 1], got " +
                                std::to_string(alpha));
  }
  if (!(beta >= 0.0 && beta < 1.0)) {
    throw std::invalid_argument("progressive: beta must lie in [0, 1), got " +
                                std::to_string(beta));
  }
}

double ProgressiveConfig::labeled_fraction(std::size_t m) const {
  if (m >= total_steps()) return 1.0;
  return std::min(1.0, alpha * static_cast<double>(m));
}

std::size_t ProgressiveConfig::unknown_quota(std::size_t m) const {
  const double n = static_cast<double>(n_target);
  if (m >= total_steps()) return round_count(beta * n);
  return round_count(beta * alpha * static_cast<double>(m) * n);
}

std::size_t ProgressiveConfig::known_quota(std::size_t m) const {
  const double n = static_cast<double>(n_target);
  if (m >= total_steps()) return n_target - round_count(beta * n);
  return round_count((1.0 - beta) * alpha * static_cast<double>(m) * n);
}

double ProgressiveConfig::unknown_threshold(std::size_t m) const {
  return beta * alpha * static_cast<double>(m) * static_cast<double>(n_target);
}

double ProgressiveConfig::known_threshold(std::size_t m) const {
  const double n = static_cast<double>(n_target);
  return n - (1.0 - beta) * alpha * static_cast<double>(m) * n;
}

std::vector<std::size_t> PseudoLabelStore::known_ids_for(Label label) const {
  std::vector<std::size_t> ids;
  for (const auto& [id, e] : known) {
    if (e.label == label) ids.push_back(id);
  }
  return ids;
}

std::vector<Confidence> confidences(const Tensor& probs) {
  const std::size_t n = probs.rows(), c = probs.cols();
  auto v = probs.values();
  std::vector<Confidence> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < c; ++j) {
      if (v[i * c + j] > v[i * c + best]) best = j;
    }
    out[i] = {v[i * c + best], static_cast<Label>(best + 1)};
  }
  return out;
}

namespace {

// Sort key: ascending confidence, then ascending id.
void rank_ascending(std::vector<std::size_t>& ids, const std::vector<Confidence>& conf) {
  std::sort(ids.begin(), ids.end(), [&](std::size_t a, std::size_t b) {
    if (conf[a].value != conf[b].value) return conf[a].value < conf[b].value;
    return a < b;
  });
}

}  // namespace

PseudoLabelStore pseudo_label_step(const Tensor& probs, const PseudoLabelStore& store,
                                   const ProgressiveConfig& config) {
  config.validate();
  if (probs.rows() != config.n_target) {
    throw std::invalid_argument("pseudo_label_step: expected " + std::to_string(config.n_target) +
                                " target rows, got " + std::to_string(probs.rows()));
  }
  const auto conf = confidences(probs);
  PseudoLabelStore next = store;
  next.step = store.step + 1;
  const std::size_t m = next.step;

  std::vector<std::size_t> pool;
  for (std::size_t id = 0; id < config.n_target; ++id) {
    if (!store.contains(id)) pool.push_back(id);
  }
  rank_ascending(pool, conf);

  const auto need = [](std::size_t target, std::size_t have) {
    return target > have ? target - have : std::size_t{0};
  };
  std::size_t q_unknown = need(config.unknown_quota(m), store.unknown.size());
  std::size_t q_known = need(config.known_quota(m), store.known.size());
  // Truncation: unknowns are served first, knowns take what remains.
  q_unknown = std::min(q_unknown, pool.size());
  q_known = std::min(q_known, pool.size() - q_unknown);

  for (std::size_t k = 0; k < q_unknown; ++k) {
    const auto id = pool[k];
    next.unknown.emplace(id, UnknownEntry{m, conf[id].value});
  }
  for (std::size_t k = 0; k < q_known; ++k) {
    const auto id = pool[pool.size() - 1 - k];
    next.known.emplace(id, KnownEntry{conf[id].label, m, conf[id].value});
  }
  return next;
}

std::vector<Label> predict_openset(const Tensor& probs, std::span<const std::size_t> ids,
                                   const PseudoLabelStore* store, double beta,
                                   double labeled_fraction) {
  const std::size_t n = probs.rows();
  const auto unknown_label = static_cast<Label>(probs.cols() + 1);
  if (store && ids.size() != n) {
    throw std::invalid_argument("predict_openset: ids must match probability rows");
  }
  const auto conf = confidences(probs);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rank_ascending(order, conf);
  const std::size_t cutoff = round_count(beta * labeled_fraction * static_cast<double>(n));

  std::vector<Label> out(n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto i = order[r];
    out[i] = r < cutoff ? unknown_label : conf[i].label;
  }
  if (store) {
    for (std::size_t i = 0; i < n; ++i) {
      if (auto it = store->known.find(ids[i]); it != store->known.end()) {
        out[i] = it->second.label;
      } else if (store->unknown.count(ids[i])) {
        out[i] = unknown_label;
      }
    }
  }
  return out;
}

void write_store_csv(std::ostream& out, const PseudoLabelStore& store, int num_classes) {
  out << "id,assigned_step,kind,pseudo_label,confidence_at_assignment\n";
  // Merge both maps in id order.
  auto k = store.known.begin();
  auto u = store.unknown.begin();
  char buf[32];
  while (k != store.known.end() || u != store.unknown.end()) {
    const bool take_known =
        u == store.unknown.end() || (k != store.known.end() && k->first < u->first);
    if (take_known) {
      std::snprintf(buf, sizeof buf, "%.17g", k->second.confidence);
      out << k->first << ',' << k->second.step << ",known," << k->second.label << ',' << buf
          << '\n';
      ++k;
    } else {
      std::snprintf(buf, sizeof buf, "%.17g", u->second.confidence);
      out << u->first << ',' << u->second.step << ",unknown," << num_classes + 1 << ',' << buf
          << '\n';
      ++u;
    }
  }
}

}  // namespace pgl
