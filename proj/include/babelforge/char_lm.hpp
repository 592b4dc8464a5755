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

#ifndef BABELFORGE_CHAR_LM_HPP_
#define BABELFORGE_CHAR_LM_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "babelforge/corpus.hpp"

namespace babelforge::corpus {

/// Interpolated Witten-Bell character n-gram model.
///
/// P(c | h) = (C(h c) + T(h) P(c | h')) / (C(h) + T(h)), where T(h) is the
/// number of distinct characters seen after h and h' drops the oldest
/// character. Contexts never seen back off entirely to h'. The recursion ends
/// in a uniform distribution over the training alphabet plus one slot shared
/// by all unseen characters, so every character gets nonzero probability.
class CharLM {
 public:
  static constexpr char32_t kBos = 0x110000;  // outside the Unicode range

  static CharLM train(std::span<const Document> docs, int order);
  static CharLM train_texts(std::span<const std::string> texts, int order);

  int order() const { return order_; }
  const std::vector<char32_t>& alphabet() const { return alphabet_; }

  // `history` is the preceding text; only its last order-1 characters matter.
  // Missing history (document start) is padded with kBos.
  double prob(std::u32string_view history, char32_t c) const;

  double log_prob(std::string_view text) const;
  // exp(-log_prob / n_chars); the per-character normalization keeps long and
  // short documents comparable.
  double perplexity(std::string_view text) const;

 private:
  struct ContextCounts {
    std::uint64_t total = 0;
    std::unordered_map<char32_t, std::uint64_t> next;
  };

  double prob_padded(std::u32string_view context, char32_t c) const;

  int order_ = 0;
  std::vector<char32_t> alphabet_;
  std::unordered_map<char32_t, std::uint64_t> alphabet_index_;
  // tables_[k] maps contexts of exactly k characters to their follower counts.
  std::vector<std::unordered_map<std::u32string, ContextCounts>> tables_;
};

}  // namespace babelforge::corpus

#endif  // BABELFORGE_CHAR_LM_HPP_
