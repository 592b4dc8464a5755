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

#include "babelforge/model.hpp"

namespace babelforge::model {

void TransformerConfig::validate() const {
  if (layers < 1) throw std::invalid_argument("TransformerConfig: layers must be >= 1");
  if (hidden < 1 || heads < 1 || hidden % heads != 0) {
    throw std::invalid_argument("TransformerConfig: hidden must be a positive multiple of heads");
  }
  if (ffn < hidden) throw std::invalid_argument("TransformerConfig: ffn must be >= hidden");
  if (vocab < tokenizer::UnigramVocab::kNumSpecials) {
    throw std::invalid_argument("TransformerConfig: vocab smaller than the special pieces");
  }
  if (max_positions < 1) throw std::invalid_argument("TransformerConfig: max_positions must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("TransformerConfig: dropout must be in [0,1)");
}

std::int64_t param_count(const TransformerConfig& c) {
  c.validate();
  const std::int64_t H = c.hidden, F = c.ffn, V = c.vocab, S = c.max_positions, L = c.layers;
  const std::int64_t embeddings = V * H + S * H + 2 * H;
  const std::int64_t attention = 4 * (H * H + H) + 2 * H;
  const std::int64_t feed_forward = H * F + F + F * H + H + 2 * H;
  const std::int64_t head = H * H + H + 2 * H + V;
  return embeddings + L * (attention + feed_forward) + head;
}

}  // namespace babelforge::model
