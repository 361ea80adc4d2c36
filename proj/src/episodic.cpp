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

#include "pgl/episodic.hpp"

#include <algorithm>
#include <ostream>
#include <stdexcept>
#include <string>

#include "pgl/rng.hpp"

namespace pgl {

namespace {

std::vector<std::vector<std::size_t>> source_by_class(const DomainPair& pair, int num_classes) {
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(num_classes));
  for (std::size_t i = 0; i < pair.source.size(); ++i) {
    const Label y = pair.source[i].label;
    if (y < 1 || y > num_classes) {
      throw std::invalid_argument("episodes: source sample " + std::to_string(i) + " has label " +
                                  std::to_string(y) + " outside 1.." + std::to_string(num_classes));
    }
    by_class[static_cast<std::size_t>(y - 1)].push_back(i);
  }
  for (int c = 0; c < num_classes; ++c) {
    if (by_class[static_cast<std::size_t>(c)].empty()) {
      throw std::invalid_argument("episodes: source class " + std::to_string(c + 1) +
                                  " has no samples");
    }
  }
  return by_class;
}

// Draws k distinct values from [0, n) by partial Fisher-Yates on a scratch array.
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, Rng& rng,
                                                    std::vector<std::size_t>& scratch) {
  if (scratch.size() != n) {
    scratch.resize(n);
    for (std::size_t i = 0; i < n; ++i) scratch[i] = i;
  }
  std::vector<std::size_t> out(k);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.index(n - i);
    std::swap(scratch[i], scratch[j]);
    out[i] = scratch[i];
  }
  return out;
}

EpisodeBatch build_batch(const DomainPair& pair, const PseudoLabelStore* store, std::size_t step,
                         double replacement_prob, int num_classes, std::size_t batch,
                         std::uint64_t seed) {
  if (num_classes < 1) throw std::invalid_argument("episodes: num_classes must be >= 1");
  if (batch == 0) throw std::invalid_argument("episodes: batch size must be positive");
  const auto C = static_cast<std::size_t>(num_classes);
  if (pair.target.size() < C) {
    throw std::invalid_argument("episodes: target set smaller than one episode (" +
                                std::to_string(pair.target.size()) + " < " + std::to_string(C) +
                                ")");
  }
  const auto by_class = source_by_class(pair, num_classes);
  std::vector<std::vector<std::size_t>> pseudo_by_class(C);
  if (store) {
    for (std::size_t c = 0; c < C; ++c) {
      pseudo_by_class[c] = store->known_ids_for(static_cast<Label>(c + 1));
    }
  }

  Rng data(seed, "episode.data");
  Rng replace(seed, "episode.replace");
  std::vector<std::size_t> scratch;

  EpisodeBatch out;
  out.step = step;
  out.replacement_prob = replacement_prob;
  out.episodes.reserve(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    Episode ep;
    for (std::size_t c = 0; c < C; ++c) {
      const auto& ids = by_class[c];
      ep.class_slots.push_back(
          {ids[data.index(ids.size())], static_cast<Label>(c + 1), SlotOrigin::Source});
    }
    ep.target_ids = sample_without_replacement(pair.target.size(), C, data, scratch);

    if (replacement_prob > 0.0) {
      for (std::size_t c = 0; c < C; ++c) {
        if (!replace.bernoulli(replacement_prob)) continue;
        std::vector<std::size_t> eligible;
        for (auto id : pseudo_by_class[c]) {
          if (std::find(ep.target_ids.begin(), ep.target_ids.end(), id) == ep.target_ids.end()) {
            eligible.push_back(id);
          }
        }
        if (eligible.empty()) {
          ++out.shortfall;
          continue;
        }
        ep.class_slots[c] = {eligible[replace.index(eligible.size())], static_cast<Label>(c + 1),
                             SlotOrigin::PseudoTarget};
      }
    }
    out.episodes.push_back(std::move(ep));
  }
  return out;
}

}  // namespace

std::size_t Episode::source_slot_count() const {
  return static_cast<std::size_t>(
      std::count_if(class_slots.begin(), class_slots.end(),
                    [](const ClassSlot& s) { return s.origin == SlotOrigin::Source; }));
}

std::size_t Episode::pseudo_slot_count() const { return class_slots.size() - source_slot_count(); }

std::size_t episodes_per_epoch(std::size_t n_target, int num_classes) {
  const auto c = static_cast<std::size_t>(num_classes);
  return (n_target + c - 1) / c;
}

EpisodeBatch build_initial_batch(const DomainPair& pair, int num_classes, std::size_t batch,
                                 std::uint64_t seed) {
  return build_batch(pair, nullptr, 0, 0.0, num_classes, batch, seed);
}

EpisodeBatch build_mixup_batch(const DomainPair& pair, const PseudoLabelStore& store,
                               std::size_t step, double alpha, int num_classes, std::size_t batch,
                               std::uint64_t seed) {
  const double p = static_cast<double>(step) * alpha;
  if (p > 1.0 + 1e-12) {
    throw std::invalid_argument(
        "build_mixup_batch: replacement probability m*alpha = " + std::to_string(p) + " exceeds 1");
  }
  return build_batch(pair, &store, step, std::min(p, 1.0), num_classes, batch, seed);
}

void write_batch_csv(std::ostream& out, const EpisodeBatch& batch) {
  out << "episode,slot,kind,id,label\n";
  for (std::size_t e = 0; e < batch.episodes.size(); ++e) {
    const auto& ep = batch.episodes[e];
    std::size_t slot = 0;
    for (const auto& s : ep.class_slots) {
      out << e << ',' << slot++ << ',' << (s.origin == SlotOrigin::Source ? "source" : "pseudo")
          << ',' << s.id << ',' << s.label << '\n';
    }
    for (auto id : ep.target_ids) out << e << ',' << slot++ << ",target," << id << ",\n";
  }
}

}  // namespace pgl
