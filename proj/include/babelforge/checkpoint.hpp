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

#ifndef BABELFORGE_CHECKPOINT_HPP_
#define BABELFORGE_CHECKPOINT_HPP_

#include <cstdint>
#include <map>
#include <string>

#include "babelforge/model.hpp"

namespace babelforge::checkpoint {

// On disk a checkpoint is a directory with
//   manifest.txt  "babelforge-ckpt v1", the config, extra metadata, and one
//                 "tensor <name> <rows> <cols> <offset>" line per tensor
//   tensors.bin   every tensor as little-endian float32, row-major
struct Checkpoint {
  model::ModelParams<float> params;
  std::int64_t step = 0;
  std::map<std::string, std::string> metadata;
};

void save(const std::string& dir, const model::ModelParams<float>& params, std::int64_t step,
          const std::map<std::string, std::string>& metadata = {});
Checkpoint load(const std::string& dir);

// Order-sensitive hash of all tensor bytes, for "unchanged parameters" checks.
std::uint64_t fingerprint(const model::ModelParams<float>& params);

}  // namespace babelforge::checkpoint

#endif  // BABELFORGE_CHECKPOINT_HPP_
