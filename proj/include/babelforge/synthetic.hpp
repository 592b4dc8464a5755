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

#ifndef BABELFORGE_SYNTHETIC_HPP_
#define BABELFORGE_SYNTHETIC_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "babelforge/corpus.hpp"
#include "babelforge/run_config.hpp"

namespace babelforge::xfer {

/// Parameters of a family of synthetic "cipher" languages.
///
/// All languages share one probabilistic phrase grammar over an abstract
/// lexicon of function words, generic content words, and topic words. Each
/// language spells the lexicon with its own phonology. A fraction
/// `lexicon_overlap` of the word types is spelled identically everywhere;
/// inside a family (consecutive languages from index 1 on, `family_size` at a
/// time) a further `family_overlap` of the remaining types is shared by the
/// family members. Language 0 belongs to no family.
struct SyntheticLangSpec {
  int n_langs = 20;
  int n_topics = 4;
  int topic_words = 24;  // per topic
  int generic_words = 48;
  int function_words = 12;
  double topic_strength = 0.5;  // chance that a content slot uses a topic word
  double zipf = 1.0;
  double lexicon_overlap = 0.1;
  int family_size = 0;  // 0 or 1: no families
  double family_overlap = 0.0;
  // Sentence counts: max(min_sentences, round(base_sentences * size_decay^i)).
  std::int64_t base_sentences = 10000;
  double size_decay = 0.5;
  std::int64_t min_sentences = 0;
  int probe_sentences = 500;  // labeled sentences per language, kept apart
  int doc_sentences = 1;      // pretraining sentences per single-topic document

  void validate() const;
  std::map<std::string, std::string> to_map(const std::string& prefix = "") const;
  // Reads the keys written by to_map(prefix); absent keys keep the values of
  // `base`.
  static SyntheticLangSpec from_config(KeyValueConfig& cfg, const std::string& prefix,
                                       const SyntheticLangSpec& base);
  static SyntheticLangSpec from_config(KeyValueConfig& cfg, const std::string& prefix = "");
};

struct SyntheticCorpus {
  std::vector<std::string> langs;  // ordered by size, largest first
  std::vector<std::int64_t> sizes;
  std::vector<corpus::Document> pretrain;
  std::vector<corpus::Document> probe;  // every document carries a topic
};

// Language code of index i: "s00", "s01", ...
std::string lang_code(int index);

std::vector<std::int64_t> size_profile(const SyntheticLangSpec& spec);

// Deterministic per seed. The text and lexicon of language i do not depend
// on n_langs, so the first k languages of a larger corpus equal a k-language
// corpus. Throws std::invalid_argument for n_langs < 2.
SyntheticCorpus generate_languages(const SyntheticLangSpec& spec, std::uint64_t seed);

}  // namespace babelforge::xfer

#endif  // BABELFORGE_SYNTHETIC_HPP_
