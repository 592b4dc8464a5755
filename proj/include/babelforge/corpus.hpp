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

#ifndef BABELFORGE_CORPUS_HPP_
#define BABELFORGE_CORPUS_HPP_

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace babelforge::corpus {

class CharLM;

struct Document {
  std::string text;
  std::string lang;
  std::string source_id;
  double langid_conf = 1.0;
  std::optional<double> ppl;
  // Class label carried by synthetic corpora for probing; absent on real text.
  std::optional<int> topic;
};

struct CorpusStats {
  std::string lang;
  std::int64_t n_docs = 0;
  std::int64_t n_sentences = 0;
  std::int64_t n_tokens = 0;
  std::int64_t bytes = 0;

  CorpusStats& operator+=(const CorpusStats& other);
  bool operator==(const CorpusStats&) const = default;
};

struct DroppedDocument {
  Document doc;
  std::string reason;  // "no-lm" or "ppl-quantile"
};

struct FilterResult {
  std::vector<Document> kept;
  std::vector<DroppedDocument> dropped;
};

// JSON-lines I/O. Text is NFC-normalized on read; documents whose text is
// empty after whitespace normalization are skipped and counted.
std::vector<Document> read_jsonl(std::istream& in, std::size_t* skipped = nullptr);
std::vector<Document> read_jsonl_file(const std::string& path, std::size_t* skipped = nullptr);
void write_jsonl(std::ostream& out, std::span<const Document> docs);
void write_jsonl_file(const std::string& path, std::span<const Document> docs);

std::string document_to_json(const Document& doc);
Document document_from_json(std::string_view line);

// Number of sentences under the rule: a break at every newline, and after
// any of . ! ? 。 ؟ that is followed by whitespace.
std::int64_t count_sentences(std::string_view text);

std::vector<CorpusStats> compute_stats(std::span<const Document> docs);
void write_stats_csv(std::ostream& out, std::span<const CorpusStats> stats);

// Removes paragraphs (newline-delimited) already seen earlier in the corpus,
// compared after whitespace collapsing and case folding. Documents left
// without paragraphs are removed. Order is preserved.
std::vector<Document> dedup(std::span<const Document> docs);

// Annotates every document with its per-character perplexity and keeps, per
// language, the lowest-perplexity ceil(keep_fraction * n) documents. Ties are
// broken by source_id. Both outputs preserve input order. `jobs` only changes
// how scoring is scheduled; results are identical for any value.
FilterResult score_and_filter(std::span<const Document> docs, const std::map<std::string, CharLM>& lm_by_lang,
                              double keep_fraction, int jobs = 1);

std::map<std::string, std::vector<Document>> group_by_lang(std::span<const Document> docs);

}  // namespace babelforge::corpus

#endif  // BABELFORGE_CORPUS_HPP_
