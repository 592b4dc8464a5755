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

#ifndef BABELFORGE_SAMPLER_HPP_
#define BABELFORGE_SAMPLER_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "babelforge/corpus.hpp"
#include "babelforge/rng.hpp"
#include "babelforge/unigram.hpp"

namespace babelforge::sampler {

inline constexpr std::int32_t kIgnoreLabel = -1;

/// Language sampling distribution: p_i = n_i / sum n, q_i = p_i^alpha / sum p^alpha.
struct SamplingPolicy {
  std::vector<std::string> langs;
  std::vector<std::int64_t> n_sentences;
  double alpha = 0.3;
  std::vector<double> p;
  std::vector<double> q;

  std::optional<std::size_t> index_of(const std::string& lang) const;
  double q_of(const std::string& lang) const;
};

// Languages with a zero count get q = 0 (also at alpha = 0). Throws when
// every count is zero, a count is negative, or alpha is negative.
SamplingPolicy smoothed_distribution(std::vector<std::string> langs, std::vector<std::int64_t> n_sentences,
                                     double alpha);
SamplingPolicy smoothed_distribution(const std::map<std::string, std::int64_t>& n_sentences, double alpha);

using IdMatrix = Eigen::Matrix<std::int32_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MaskMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// One row per sequence. lang_tag is bookkeeping for evaluation only; the
// model never reads it.
struct MaskedBatch {
  IdMatrix tokens;
  IdMatrix labels;  // kIgnoreLabel where no prediction is made
  std::vector<std::string> lang_tag;
  MaskMatrix attn_mask;  // true at non-pad positions

  Eigen::Index rows() const { return tokens.rows(); }
  Eigen::Index cols() const { return tokens.cols(); }
  Eigen::Index num_labels() const { return (labels.array() != kIgnoreLabel).count(); }
};

MaskedBatch make_batch(std::span<const std::vector<int>> token_rows, std::span<const std::vector<int>> label_rows,
                       std::vector<std::string> lang_tags, int pad_id);

/// Packs one language's documents into fixed-length windows.
///
/// Documents are shuffled by (seed, epoch), encoded, joined with </s>, and cut
/// into windows of seq_len - 1 tokens, each prefixed with <s>. The last window
/// of an epoch is padded with <pad>.
class LanguageStream {
 public:
  LanguageStream() = default;
  LanguageStream(std::vector<std::vector<int>> encoded_docs, const tokenizer::SpecialIds& specials, int seq_len,
                 std::uint64_t seed);
  static LanguageStream from_documents(std::span<const corpus::Document> docs, const tokenizer::UnigramVocab& vocab,
                                       int seq_len, std::uint64_t seed);

  // Next window of the current epoch, or nullopt once the epoch is exhausted.
  std::optional<std::vector<int>> next();
  // Starts the next epoch with a fresh shuffle.
  void restart();

  bool empty() const { return docs_.empty(); }
  int epoch() const { return epoch_; }
  int seq_len() const { return seq_len_; }
  // All windows of the current epoch, in order (without consuming them).
  const std::vector<std::vector<int>>& windows() const { return windows_; }

 private:
  void build_windows();

  std::vector<std::vector<int>> docs_;
  tokenizer::SpecialIds specials_;
  int seq_len_ = 0;
  std::uint64_t seed_ = 0;
  int epoch_ = 0;
  std::vector<std::vector<int>> windows_;
  std::size_t cursor_ = 0;
};

struct MaskingOptions {
  double mask_prob = 0.15;
  double replace_with_mask = 0.8;
  double replace_with_random = 0.1;
};

struct MaskedSequence {
  std::vector<int> tokens;
  std::vector<int> labels;
};

// Each eligible position (anything but <s>, </s>, <pad>) is selected with
// mask_prob. Selected positions become <mask> (80%), a uniformly drawn
// non-special id (10%), or stay unchanged (10%); labels hold the original id.
MaskedSequence apply_masking(std::span<const int> seq, double mask_prob, Rng& rng,
                             const tokenizer::SpecialIds& specials, int vocab_size);
MaskedSequence apply_masking(std::span<const int> seq, const MaskingOptions& options, Rng& rng,
                             const tokenizer::SpecialIds& specials, int vocab_size);

// Draws each row's language from q (restricted to non-empty streams), takes
// that stream's next window, restarting exhausted streams, and masks it.
MaskedBatch build_batch(std::map<std::string, LanguageStream>& streams, const SamplingPolicy& policy, int batch_size,
                        int seq_len, double mask_prob, Rng& rng, const tokenizer::SpecialIds& specials,
                        int vocab_size);

}  // namespace babelforge::sampler

#endif  // BABELFORGE_SAMPLER_HPP_
