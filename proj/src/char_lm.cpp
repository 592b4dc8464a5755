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

#include "babelforge/char_lm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "babelforge/text.hpp"

namespace babelforge::corpus {

CharLM CharLM::train(std::span<const Document> docs, int order) {
  std::vector<std::string> texts;
  texts.reserve(docs.size());
  for (const auto& d : docs) texts.push_back(d.text);
  return train_texts(texts, order);
}

CharLM CharLM::train_texts(std::span<const std::string> texts, int order) {
  if (order < 2) throw std::invalid_argument("CharLM: order must be >= 2");
  if (texts.empty()) throw std::invalid_argument("CharLM: need at least one document");

  CharLM lm;
  lm.order_ = order;
  lm.tables_.resize(static_cast<std::size_t>(order));
  const std::size_t hist = static_cast<std::size_t>(order - 1);

  for (const auto& t : texts) {
    std::u32string padded(hist, kBos);
    padded += text::to_u32(t);
    for (std::size_t i = hist; i < padded.size(); ++i) {
      const char32_t c = padded[i];
      lm.alphabet_index_.try_emplace(c, 0);
      for (std::size_t k = 0; k <= hist; ++k) {
        auto& cell = lm.tables_[k][padded.substr(i - k, k)];
        ++cell.total;
        ++cell.next[c];
      }
    }
  }
  for (const auto& [c, _] : lm.alphabet_index_) lm.alphabet_.push_back(c);
  std::sort(lm.alphabet_.begin(), lm.alphabet_.end());
  for (std::size_t i = 0; i < lm.alphabet_.size(); ++i) lm.alphabet_index_[lm.alphabet_[i]] = i;
  return lm;
}

double CharLM::prob_padded(std::u32string_view context, char32_t c) const {
  // Start from the uniform floor and interpolate upwards through the orders.
  double p = 1.0 / static_cast<double>(alphabet_.size() + 1);
  for (std::size_t k = 0; k <= context.size(); ++k) {
    const auto& table = tables_[k];
    const auto it = table.find(std::u32string(context.substr(context.size() - k)));
    if (it == table.end()) break;  // longer contexts containing this one are unseen too
    const ContextCounts& cc = it->second;
    const auto nit = cc.next.find(c);
    const double count = nit == cc.next.end() ? 0.0 : static_cast<double>(nit->second);
    const double types = static_cast<double>(cc.next.size());
    p = (count + types * p) / (static_cast<double>(cc.total) + types);
  }
  return p;
}

double CharLM::prob(std::u32string_view history, char32_t c) const {
  const std::size_t hist = static_cast<std::size_t>(order_ - 1);
  std::u32string context;
  if (history.size() >= hist) {
    context = history.substr(history.size() - hist);
  } else {
    context.assign(hist - history.size(), kBos);
    context += history;
  }
  return prob_padded(context, c);
}

double CharLM::log_prob(std::string_view t) const {
  const std::size_t hist = static_cast<std::size_t>(order_ - 1);
  std::u32string padded(hist, kBos);
  padded += text::to_u32(t);
  double lp = 0.0;
  for (std::size_t i = hist; i < padded.size(); ++i) {
    lp += std::log(prob_padded(std::u32string_view(padded).substr(i - hist, hist), padded[i]));
  }
  return lp;
}

double CharLM::perplexity(std::string_view t) const {
  const std::size_t n = text::to_u32(t).size();
  if (n == 0) throw std::invalid_argument("CharLM: perplexity of empty text");
  return std::exp(-log_prob(t) / static_cast<double>(n));
}

}  // namespace babelforge::corpus
