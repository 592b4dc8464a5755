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

#ifndef BABELFORGE_PROBE_HPP_
#define BABELFORGE_PROBE_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "babelforge/corpus.hpp"
#include "babelforge/model.hpp"
#include "babelforge/unigram.hpp"

namespace babelforge::xfer {

struct ProbeResult {
  std::string config_id;
  std::map<std::string, double> accuracy;  // per test language
  std::vector<std::string> hi_langs, lo_langs;
  double hi_avg = 0.0;
  double lo_avg = 0.0;
  double overall = 0.0;  // mean over all tested languages
  std::vector<std::string> omitted;
};

struct ProbeOptions {
  int n_train = 400;
  int seq_len = 32;
  int iterations = 300;
  double learning_rate = 0.5;
  double l2 = 1e-3;
  int batch_size = 64;
  // Shift each test language's vectors so their mean matches the training
  // mean before classifying. Uses no labels; removes the per-language offset.
  bool center_languages = true;
  std::uint64_t seed = 0;
  std::vector<std::string> hi_langs, lo_langs;  // groups averaged into hi_avg / lo_avg
  std::string config_id;
};

// Mean-pooled final hidden states of each text (eval mode), one row per text.
// Texts are encoded with `vocab` and cut to seq_len - 2 pieces.
Eigen::MatrixXd sentence_vectors(const model::ModelParams<float>& params, const tokenizer::UnigramVocab& vocab,
                                 const std::vector<std::string>& texts, int seq_len, int batch_size = 64);

/// Fits a multinomial logistic probe on frozen sentence vectors of
/// `train_lang` and reports accuracy on every test language.
///
/// The first n_train documents of a seeded shuffle of train_lang's labeled
/// set train the probe; the rest of that set is its in-language test set.
/// Other languages are tested on all of their labeled documents. Languages
/// without documents are listed in `omitted`.
ProbeResult probe_transfer(const model::ModelParams<float>& params, const tokenizer::UnigramVocab& vocab,
                           const std::map<std::string, std::vector<corpus::Document>>& labeled,
                           const std::string& train_lang, const std::vector<std::string>& test_langs,
                           const ProbeOptions& options);

// Default grouping by size rank (largest first): the top min(2, n/2) are high
// resource, the bottom min(2, n/2) low resource.
void size_rank_groups(const std::vector<std::string>& langs_by_size, std::vector<std::string>& hi,
                      std::vector<std::string>& lo);

}  // namespace babelforge::xfer

#endif  // BABELFORGE_PROBE_HPP_
