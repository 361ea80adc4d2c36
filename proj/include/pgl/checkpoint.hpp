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

// Binary checkpoint container, all integers and doubles little-endian:
//
//   magic "PGLCKPT\0" | u32 version | u64 config digest
//   u32 tensor count, then per tensor: u32 name length, name, u32 rank,
//       u64 dims[rank], f64 values
//   u32 optimizer count, then per optimizer: u64 t, u32 slots, per slot:
//       u64 size, f64 first moment[size], f64 second moment[size]
//   u32 rng count, then per stream: u32 name length, name, u32 state length, state
//   u64 step, u64 epoch
//   u64 known count, per entry: u64 id, i32 label, u64 step, f64 confidence
//   u64 unknown count, per entry: u64 id, u64 step, f64 confidence
//   u32 config length, config JSON text

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "pgl/progressive.hpp"
#include "pgl/tensor.hpp"

namespace pgl {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct TensorRecord {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

struct OptimizerRecord {
  std::uint64_t steps = 0;
  std::vector<std::vector<double>> first;
  std::vector<std::vector<double>> second;
};

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::uint64_t config_digest = 0;
  std::vector<TensorRecord> tensors;
  std::vector<OptimizerRecord> optimizers;
  std::vector<std::pair<std::string, std::string>> rng_states;
  std::uint64_t step = 0;
  std::uint64_t epoch = 0;
  PseudoLabelStore store;
  std::string config_json;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
// Throws std::runtime_error on bad magic, truncation, or a version other
// than kCheckpointVersion.
Checkpoint deserialize_checkpoint(const std::string& bytes);

// Writes to a sibling temp file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);
std::string read_file(const std::filesystem::path& path);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace pgl
