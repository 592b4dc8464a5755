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

#include "babelforge/sampler.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace babelforge::sampler {

std::optional<std::size_t> SamplingPolicy::index_of(const std::string& lang) const {
  for (std::size_t i = 0; i < langs.size(); ++i) {
    if (langs[i] == lang) return i;
  }
  return std::nullopt;
}

double SamplingPolicy::q_of(const std::string& lang) const {
  const auto i = index_of(lang);
  return i ? q[*i] : 0.0;
}

SamplingPolicy smoothed_distribution(std::vector<std::string> langs, std::vector<std::int64_t> n_sentences,
                                     double alpha) {
  if (langs.size() != n_sentences.size()) throw std::invalid_argument("smoothed_distribution: size mismatch");
  if (!(alpha >= 0.0)) throw std::invalid_argument("smoothed_distribution: alpha must be >= 0");
  long double total = 0.0L;
  for (auto n : n_sentences) {
    if (n < 0) throw std::invalid_argument("smoothed_distribution: negative count");
    total += static_cast<long double>(n);
  }
  if (total <= 0.0L) throw std::invalid_argument("smoothed_distribution: all counts are zero");

  SamplingPolicy policy;
  policy.alpha = alpha;
  policy.p.resize(langs.size());
  policy.q.resize(langs.size());
  std::vector<long double> smoothed(langs.size(), 0.0L);
  long double smoothed_total = 0.0L;
  for (std::size_t i = 0; i < langs.size(); ++i) {
    const long double p = static_cast<long double>(n_sentences[i]) / total;
    policy.p[i] = static_cast<double>(p);
    // pow(0, 0) is 1, but an empty language must never be sampled.
    smoothed[i] = n_sentences[i] > 0 ? std::pow(p, static_cast<long double>(alpha)) : 0.0L;
    smoothed_total += smoothed[i];
  }
  for (std::size_t i = 0; i < langs.size(); ++i) policy.q[i] = static_cast<double>(smoothed[i] / smoothed_total);
  policy.langs = std::move(langs);
  policy.n_sentences = std::move(n_sentences);
  return policy;
}

SamplingPolicy smoothed_distribution(const std::map<std::string, std::int64_t>& n_sentences, double alpha) {
  std::vector<std::string> langs;
  std::vector<std::int64_t> counts;
  for (const auto& [l, n] : n_sentences) {
    langs.push_back(l);
    counts.push_back(n);
  }
  return smoothed_distribution(std::move(langs), std::move(counts), alpha);
}

MaskedBatch make_batch(std::span<const std::vector<int>> token_rows, std::span<const std::vector<int>> label_rows,
                       std::vector<std::string> lang_tags, int pad_id) {
  if (token_rows.size() != label_rows.size()) throw std::invalid_argument("make_batch: row count mismatch");
  MaskedBatch b;
  const auto rows = static_cast<Eigen::Index>(token_rows.size());
  const auto cols = rows ? static_cast<Eigen::Index>(token_rows[0].size()) : 0;
  b.tokens.resize(rows, cols);
  b.labels.resize(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& t = token_rows[static_cast<std::size_t>(r)];
    const auto& l = label_rows[static_cast<std::size_t>(r)];
    if (static_cast<Eigen::Index>(t.size()) != cols || static_cast<Eigen::Index>(l.size()) != cols) {
      throw std::invalid_argument("make_batch: ragged rows");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      b.tokens(r, c) = t[static_cast<std::size_t>(c)];
      b.labels(r, c) = l[static_cast<std::size_t>(c)];
    }
  }
  b.attn_mask = b.tokens.array() != pad_id;
  b.lang_tag = std::move(lang_tags);
  return b;
}

LanguageStream::LanguageStream(std::vector<std::vector<int>> encoded_docs, const tokenizer::SpecialIds& specials,
                               int seq_len, std::uint64_t seed)
    : docs_(std::move(encoded_docs)), specials_(specials), seq_len_(seq_len), seed_(seed) {
  if (seq_len < 8) throw std::invalid_argument("LanguageStream: seq_len must be >= 8");
  std::erase_if(docs_, [](const auto& d) { return d.empty(); });
  build_windows();
}

LanguageStream LanguageStream::from_documents(std::span<const corpus::Document> docs,
                                              const tokenizer::UnigramVocab& vocab, int seq_len, std::uint64_t seed) {
  std::vector<std::vector<int>> encoded;
  encoded.reserve(docs.size());
  for (const auto& d : docs) encoded.push_back(tokenizer::viterbi_encode(vocab, d.text));
  return LanguageStream(std::move(encoded), vocab.specials(), seq_len, seed);
}

void LanguageStream::build_windows() {
  windows_.clear();
  cursor_ = 0;
  if (docs_.empty()) return;
  std::vector<std::size_t> order(docs_.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng = Rng(seed_).split(static_cast<std::uint64_t>(epoch_));
  rng.shuffle(std::span<std::size_t>(order));

  const std::size_t body = static_cast<std::size_t>(seq_len_ - 1);
  std::vector<int> window{specials_.bos};
  auto push = [&](int id) {
    window.push_back(id);
    if (window.size() == body + 1) {
      windows_.push_back(std::move(window));
      window = {specials_.bos};
    }
  };
  for (std::size_t i : order) {
    for (int id : docs_[i]) push(id);
    push(specials_.eos);
  }
  if (window.size() > 1) {
    window.resize(static_cast<std::size_t>(seq_len_), specials_.pad);
    windows_.push_back(std::move(window));
  }
}

std::optional<std::vector<int>> LanguageStream::next() {
  if (cursor_ >= windows_.size()) return std::nullopt;
  return windows_[cursor_++];
}

void LanguageStream::restart() {
  ++epoch_;
  build_windows();
}

MaskedSequence apply_masking(std::span<const int> seq, const MaskingOptions& options, Rng& rng,
                             const tokenizer::SpecialIds& specials, int vocab_size) {
  if (!(options.mask_prob >= 0.0 && options.mask_prob <= 1.0)) {
    throw std::invalid_argument("apply_masking: mask_prob must be in [0, 1]");
  }
  const int first_normal = tokenizer::UnigramVocab::kNumSpecials;
  MaskedSequence out{std::vector<int>(seq.begin(), seq.end()), std::vector<int>(seq.size(), kIgnoreLabel)};
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const int id = seq[i];
    if (id == specials.bos || id == specials.eos || id == specials.pad) continue;
    if (!(rng.uniform() < options.mask_prob)) continue;
    out.labels[i] = id;
    const double u = rng.uniform();
    if (u < options.replace_with_mask) {
      out.tokens[i] = specials.mask;
    } else if (u < options.replace_with_mask + options.replace_with_random && vocab_size > first_normal) {
      out.tokens[i] = first_normal + static_cast<int>(rng.below(static_cast<std::uint64_t>(vocab_size - first_normal)));
    }
  }
  return out;
}

MaskedSequence apply_masking(std::span<const int> seq, double mask_prob, Rng& rng,
                             const tokenizer::SpecialIds& specials, int vocab_size) {
  MaskingOptions options;
  options.mask_prob = mask_prob;
  return apply_masking(seq, options, rng, specials, vocab_size);
}

MaskedBatch build_batch(std::map<std::string, LanguageStream>& streams, const SamplingPolicy& policy, int batch_size,
                        int seq_len, double mask_prob, Rng& rng, const tokenizer::SpecialIds& specials,
                        int vocab_size) {
  std::vector<double> weights(policy.langs.size(), 0.0);
  std::vector<LanguageStream*> by_index(policy.langs.size(), nullptr);
  for (std::size_t i = 0; i < policy.langs.size(); ++i) {
    const auto it = streams.find(policy.langs[i]);
    if (it == streams.end() || it->second.empty()) continue;
    if (it->second.seq_len() != seq_len) throw std::invalid_argument("build_batch: stream seq_len mismatch");
    by_index[i] = &it->second;
    weights[i] = policy.q[i];
  }
  if (std::accumulate(weights.begin(), weights.end(), 0.0) <= 0.0) {
    throw std::invalid_argument("build_batch: all streams are empty");
  }

  std::vector<std::vector<int>> tokens, labels;
  std::vector<std::string> tags;
  for (int r = 0; r < batch_size; ++r) {
    const std::size_t li = rng.categorical(weights);
    LanguageStream& stream = *by_index[li];
    auto window = stream.next();
    if (!window) {
      stream.restart();
      window = stream.next();
    }
    MaskedSequence m = apply_masking(*window, mask_prob, rng, specials, vocab_size);
    tokens.push_back(std::move(m.tokens));
    labels.push_back(std::move(m.labels));
    tags.push_back(policy.langs[li]);
  }
  return make_batch(tokens, labels, std::move(tags), specials.pad);
}

}  // namespace babelforge::sampler
