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
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "pgl/progressive.hpp"
#include "pgl/synthgen.hpp"

namespace pgl {

enum class SlotOrigin { Source, PseudoTarget };

// One labeled node of an episode. `id` indexes pair.source or pair.target
// depending on the origin.
struct ClassSlot {
  std::size_t id;
  Label label;
  SlotOrigin origin;
};

struct Episode {
  std::vector<ClassSlot> class_slots;   // exactly one per class, in class order
  std::vector<std::size_t> target_ids;  // C unlabeled target samples

  std::size_t source_slot_count() const;
  std::size_t pseudo_slot_count() const;
};

struct EpisodeBatch {
  std::vector<Episode> episodes;
  std::size_t step = 0;
  double replacement_prob = 0.0;
  // Slots where a replacement was drawn but no eligible pseudo-known sample existed.
  std::size_t shortfall = 0;
};

std::size_t episodes_per_epoch(std::size_t n_target, int num_classes);

EpisodeBatch build_initial_batch(const DomainPair& pair, int num_classes, std::size_t batch,
                                 std::uint64_t seed);

// Each class slot is independently replaced, with probability m*alpha, by a
// pseudo-known target sample of the same class. Target slots and source picks
// come from the same data stream as build_initial_batch, so m = 0 reproduces it.
EpisodeBatch build_mixup_batch(const DomainPair& pair, const PseudoLabelStore& store,
                               std::size_t step, double alpha, int num_classes, std::size_t batch,
                               std::uint64_t seed);

// Debug dump: episode,slot,kind,id,label.
void write_batch_csv(std::ostream& out, const EpisodeBatch& batch);

}  // namespace pgl
