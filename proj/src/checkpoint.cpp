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

#include "pgl/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace pgl {

namespace {

constexpr char kMagic[8] = {'P', 'G', 'L', 'C', 'K', 'P', 'T', '\0'};

class Writer {
 public:
  template <typename T>
  void put(T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char raw[sizeof(T)];
    std::memcpy(raw, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    out_.append(reinterpret_cast<const char*>(raw), sizeof(T));
  }
  void u32(std::uint32_t v) { put(v); }
  void u64(std::uint64_t v) { put(v); }
  void f64(double v) { put(v); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_ += s;
  }
  void doubles(const std::vector<double>& v) {
    for (double x : v) f64(x);
  }
  void raw(const char* p, std::size_t n) { out_.append(p, n); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& in) : in_(in) {}
  template <typename T>
  T get() {
    need(sizeof(T));
    unsigned char raw[sizeof(T)];
    std::memcpy(raw, in_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    pos_ += sizeof(T);
    T v;
    std::memcpy(&v, raw, sizeof(T));
    return v;
  }
  std::uint32_t u32() { return get<std::uint32_t>(); }
  std::uint64_t u64() { return get<std::uint64_t>(); }
  double f64() { return get<double>(); }
  std::string str() {
    const auto n = u32();
    need(n);
    std::string s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::vector<double> doubles(std::size_t n) {
    need(n * sizeof(double));
    std::vector<double> v(n);
    for (auto& x : v) x = f64();
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw std::runtime_error("checkpoint: truncated file");
  }
  const std::string& in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const Checkpoint& c) {
  Writer w;
  w.raw(kMagic, sizeof(kMagic));
  w.u32(c.version);
  w.u64(c.config_digest);

  w.u32(static_cast<std::uint32_t>(c.tensors.size()));
  for (const auto& t : c.tensors) {
    w.str(t.name);
    w.u32(static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) w.u64(d);
    w.doubles(t.values);
  }

  w.u32(static_cast<std::uint32_t>(c.optimizers.size()));
  for (const auto& o : c.optimizers) {
    w.u64(o.steps);
    w.u32(static_cast<std::uint32_t>(o.first.size()));
    for (std::size_t i = 0; i < o.first.size(); ++i) {
      w.u64(o.first[i].size());
      w.doubles(o.first[i]);
      w.doubles(o.second.at(i));
    }
  }

  w.u32(static_cast<std::uint32_t>(c.rng_states.size()));
  for (const auto& [name, state] : c.rng_states) {
    w.str(name);
    w.str(state);
  }

  w.u64(c.step);
  w.u64(c.epoch);

  w.u64(c.store.known.size());
  for (const auto& [id, e] : c.store.known) {
    w.u64(id);
    w.put<std::int32_t>(e.label);
    w.u64(e.step);
    w.f64(e.confidence);
  }
  w.u64(c.store.unknown.size());
  for (const auto& [id, e] : c.store.unknown) {
    w.u64(id);
    w.u64(e.step);
    w.f64(e.confidence);
  }
  w.str(c.config_json);
  return w.take();
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  if (r.bytes(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) {
    throw std::runtime_error("checkpoint: bad magic");
  }
  Checkpoint c;
  c.version = r.u32();
  if (c.version != kCheckpointVersion) {
    throw std::runtime_error("checkpoint: format version " + std::to_string(c.version) +
                             " is not supported (expected " + std::to_string(kCheckpointVersion) +
                             ")");
  }
  c.config_digest = r.u64();

  const auto n_tensors = r.u32();
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    TensorRecord t;
    t.name = r.str();
    const auto rank = r.u32();
    std::size_t size = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      t.shape.push_back(r.u64());
      size *= t.shape.back();
    }
    t.values = r.doubles(size);
    c.tensors.push_back(std::move(t));
  }

  const auto n_opt = r.u32();
  for (std::uint32_t i = 0; i < n_opt; ++i) {
    OptimizerRecord o;
    o.steps = r.u64();
    const auto slots = r.u32();
    for (std::uint32_t k = 0; k < slots; ++k) {
      const auto n = r.u64();
      o.first.push_back(r.doubles(n));
      o.second.push_back(r.doubles(n));
    }
    c.optimizers.push_back(std::move(o));
  }

  const auto n_rng = r.u32();
  for (std::uint32_t i = 0; i < n_rng; ++i) {
    auto name = r.str();
    auto state = r.str();
    c.rng_states.emplace_back(std::move(name), std::move(state));
  }

  c.step = r.u64();
  c.epoch = r.u64();
  c.store.step = c.step;

  const auto n_known = r.u64();
  for (std::uint64_t i = 0; i < n_known; ++i) {
    const auto id = r.u64();
    KnownEntry e{};
    e.label = r.get<std::int32_t>();
    e.step = r.u64();
    e.confidence = r.f64();
    c.store.known.emplace(id, e);
  }
  const auto n_unknown = r.u64();
  for (std::uint64_t i = 0; i < n_unknown; ++i) {
    const auto id = r.u64();
    UnknownEntry e{};
    e.step = r.u64();
    e.confidence = r.f64();
    c.store.unknown.emplace(id, e);
  }
  c.config_json = r.str();
  if (!r.done()) throw std::runtime_error("checkpoint: trailing bytes");
  return c;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_file_atomic(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(read_file(path));
}

}  // namespace pgl
