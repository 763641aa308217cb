// Copyright 2026 The Handeye Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "handeye/nn/checkpoint.hpp"

#include <array>
#include <cstring>
#include <fstream>

namespace handeye::nn {
namespace {

constexpr std::array<char, 8> kMagic = {'H', 'N', 'D', 'E', 'Y', 'E', 'C', 'K'};
constexpr std::uint32_t kMaxString = 1u << 20;
constexpr std::int64_t kMaxDim = 1 << 24;

class Writer {
 public:
  explicit Writer(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) throw CheckpointError("cannot open " + path + " for writing");
  }
  template <typename T>
  void pod(const T& v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void str(const std::string& s) {
    pod(static_cast<std::uint32_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void params(const ParamSet<double>& p) {
    pod(static_cast<std::uint32_t>(p.size()));
    for (const auto& [name, e] : p.entries()) {
      str(name);
      pod(static_cast<std::uint8_t>(e.trainable ? 1 : 0));
      pod(static_cast<std::int64_t>(e.value.rows()));
      pod(static_cast<std::int64_t>(e.value.cols()));
      out_.write(reinterpret_cast<const char*>(e.value.data()),
                 static_cast<std::streamsize>(e.value.size() * sizeof(double)));
    }
  }
  void raw(const char* data, std::size_t n) { out_.write(data, static_cast<std::streamsize>(n)); }
  void finish(const std::string& path) {
    out_.flush();
    if (!out_) throw CheckpointError("failed writing " + path);
  }

 private:
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw CheckpointError("cannot open checkpoint " + path);
  }
  template <typename T>
  T pod() {
    T v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in_) throw CheckpointError("truncated checkpoint " + path_);
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint32_t>();
    if (n > kMaxString) throw CheckpointError("corrupt string length in " + path_);
    std::string s(n, '\0');
    in_.read(s.data(), n);
    if (!in_) throw CheckpointError("truncated checkpoint " + path_);
    return s;
  }
  ParamSet<double> params() {
    ParamSet<double> p;
    const auto n = pod<std::uint32_t>();
    for (std::uint32_t i = 0; i < n; ++i) {
      const std::string name = str();
      const bool trainable = pod<std::uint8_t>() != 0;
      const auto rows = pod<std::int64_t>();
      const auto cols = pod<std::int64_t>();
      if (rows < 0 || cols < 0 || rows > kMaxDim || cols > kMaxDim) {
        throw CheckpointError("corrupt tensor shape in " + path_);
      }
      Mat<double> m(rows, cols);
      in_.read(reinterpret_cast<char*>(m.data()),
               static_cast<std::streamsize>(m.size() * sizeof(double)));
      if (!in_) throw CheckpointError("truncated checkpoint " + path_);
      p.add(name, std::move(m), trainable);
    }
    return p;
  }

 private:
  std::ifstream in_;
  std::string path_;
};

void mix(std::uint64_t& h, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (8 * i)) & 0xffu;
    h *= 1099511628211ULL;
  }
}

void mix(std::uint64_t& h, const std::string& s) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  mix(h, static_cast<std::uint64_t>(s.size()));
}

}  // namespace

std::uint64_t Checkpoint::schema_hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& [name, p] : nets) {
    mix(h, "net:" + name);
    mix(h, p.schema_hash());
  }
  for (const auto& [name, s] : optimizers) {
    mix(h, "opt:" + name);
    mix(h, s.m.schema_hash());
  }
  return h;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  Writer w(path);
  w.raw(kMagic.data(), kMagic.size());
  w.pod(Checkpoint::kVersion);
  w.pod(ckpt.schema_hash());
  w.pod(static_cast<std::uint32_t>(ckpt.metadata.size()));
  for (const auto& [k, v] : ckpt.metadata) {
    w.str(k);
    w.str(v);
  }
  w.pod(static_cast<std::uint32_t>(ckpt.nets.size()));
  for (const auto& [name, p] : ckpt.nets) {
    w.str(name);
    w.params(p);
  }
  w.pod(static_cast<std::uint32_t>(ckpt.optimizers.size()));
  for (const auto& [name, s] : ckpt.optimizers) {
    w.str(name);
    w.pod(static_cast<std::int64_t>(s.step));
    w.params(s.m);
    w.params(s.v);
  }
  w.str(ckpt.rng_state);
  w.finish(path);
}

Checkpoint load_checkpoint(const std::string& path,
                           std::optional<std::uint64_t> expected_schema) {
  Reader r(path);
  std::array<char, 8> magic{};
  for (char& c : magic) c = r.pod<char>();
  if (magic != kMagic) throw CheckpointError(path + " is not a checkpoint file");
  const auto version = r.pod<std::uint32_t>();
  if (version != Checkpoint::kVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto stored_hash = r.pod<std::uint64_t>();
  if (expected_schema && *expected_schema != stored_hash) {
    throw CheckpointError("checkpoint schema mismatch in " + path);
  }

  Checkpoint ckpt;
  const auto n_meta = r.pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string k = r.str();
    ckpt.metadata[k] = r.str();
  }
  const auto n_nets = r.pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_nets; ++i) {
    std::string name = r.str();
    ckpt.nets.emplace(name, r.params());
  }
  const auto n_opt = r.pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_opt; ++i) {
    std::string name = r.str();
    AdamState<double> s;
    s.step = r.pod<std::int64_t>();
    s.m = r.params();
    s.v = r.params();
    ckpt.optimizers.emplace(name, std::move(s));
  }
  ckpt.rng_state = r.str();
  if (ckpt.schema_hash() != stored_hash) {
    throw CheckpointError("checkpoint payload does not match its schema hash: " + path);
  }
  return ckpt;
}

}  // namespace handeye::nn
