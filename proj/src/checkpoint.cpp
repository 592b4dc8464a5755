// Copyright 2026 The babelforge Authors.
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

#include "babelforge/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace babelforge::checkpoint {

namespace {

constexpr std::string_view kHeader = "babelforge-ckpt v1";

std::uint32_t to_little_endian(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
}

}  // namespace

void save(const std::string& dir, const model::ModelParams<float>& params, std::int64_t step,
          const std::map<std::string, std::string>& metadata) {
  std::filesystem::create_directories(dir);
  const auto& c = params.config;
  const std::string tmp_manifest = dir + "/manifest.txt.tmp";
  const std::string tmp_blob = dir + "/tensors.bin.tmp";
  {
    std::ofstream manifest(tmp_manifest);
    std::ofstream blob(tmp_blob, std::ios::binary);
    if (!manifest || !blob) throw std::runtime_error("cannot write checkpoint in " + dir);
    manifest << kHeader << '\n';
    manifest << "config layers=" << c.layers << " hidden=" << c.hidden << " heads=" << c.heads << " ffn=" << c.ffn
             << " vocab=" << c.vocab << " max_positions=" << c.max_positions << " dropout=" << c.dropout << '\n';
    manifest << "step " << step << '\n';
    for (const auto& [k, v] : metadata) manifest << "meta " << k << ' ' << v << '\n';
    std::int64_t offset = 0;
    for (const auto& [name, t] : model::named_tensors(params)) {
      manifest << "tensor " << name << ' ' << t->rows() << ' ' << t->cols() << ' ' << offset << '\n';
      for (Eigen::Index i = 0; i < t->size(); ++i) {
        std::uint32_t bits;
        std::memcpy(&bits, t->data() + i, sizeof bits);
        bits = to_little_endian(bits);
        blob.write(reinterpret_cast<const char*>(&bits), sizeof bits);
      }
      offset += t->size();
    }
  }
  // Rename last so an interrupted save never replaces a good checkpoint.
  std::filesystem::rename(tmp_blob, dir + "/tensors.bin");
  std::filesystem::rename(tmp_manifest, dir + "/manifest.txt");
}

Checkpoint load(const std::string& dir) {
  std::ifstream manifest(dir + "/manifest.txt");
  std::ifstream blob(dir + "/tensors.bin", std::ios::binary);
  if (!manifest || !blob) throw std::runtime_error("no checkpoint in " + dir);
  std::string line;
  std::getline(manifest, line);
  if (line != kHeader) throw std::runtime_error("checkpoint: unsupported header '" + line + "'");

  Checkpoint ckpt;
  model::TransformerConfig cfg;
  std::map<std::string, std::tuple<Eigen::Index, Eigen::Index, std::int64_t>> index;
  while (std::getline(manifest, line)) {
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "config") {
      std::string kv;
      while (ls >> kv) {
        const auto eq = kv.find('=');
        const std::string k = kv.substr(0, eq), v = kv.substr(eq + 1);
        if (k == "layers") cfg.layers = std::stoi(v);
        else if (k == "hidden") cfg.hidden = std::stoi(v);
        else if (k == "heads") cfg.heads = std::stoi(v);
        else if (k == "ffn") cfg.ffn = std::stoi(v);
        else if (k == "vocab") cfg.vocab = std::stoi(v);
        else if (k == "max_positions") cfg.max_positions = std::stoi(v);
        else if (k == "dropout") cfg.dropout = std::stod(v);
      }
    } else if (kind == "step") {
      ls >> ckpt.step;
    } else if (kind == "meta") {
      std::string k, v;
      ls >> k;
      std::getline(ls, v);
      if (!v.empty() && v.front() == ' ') v.erase(0, 1);
      ckpt.metadata[k] = v;
    } else if (kind == "tensor") {
      std::string name;
      Eigen::Index r, c;
      std::int64_t off;
      ls >> name >> r >> c >> off;
      index[name] = {r, c, off};
    }
  }
  ckpt.params = model::zero_params<float>(cfg);
  for (auto& [name, t] : model::named_tensors(ckpt.params)) {
    const auto it = index.find(name);
    if (it == index.end()) throw std::runtime_error("checkpoint: missing tensor " + name);
    const auto [r, c, off] = it->second;
    if (r != t->rows() || c != t->cols()) throw std::runtime_error("checkpoint: shape mismatch for " + name);
    blob.seekg(off * static_cast<std::int64_t>(sizeof(float)));
    for (Eigen::Index i = 0; i < t->size(); ++i) {
      std::uint32_t bits;
      blob.read(reinterpret_cast<char*>(&bits), sizeof bits);
      bits = to_little_endian(bits);
      std::memcpy(t->data() + i, &bits, sizeof bits);
    }
    if (!blob) throw std::runtime_error("checkpoint: truncated tensor " + name);
  }
  return ckpt;
}

std::uint64_t fingerprint(const model::ModelParams<float>& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& [name, t] : model::named_tensors(params)) {
    h = fnv1a(name, h);
    h = fnv1a(std::string_view(reinterpret_cast<const char*>(t->data()), static_cast<std::size_t>(t->size()) * sizeof(float)), h);
  }
  return h;
}

}  // namespace babelforge::checkpoint
