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

#ifndef BABELFORGE_UNIGRAM_HPP_
#define BABELFORGE_UNIGRAM_HPP_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace babelforge::tokenizer {

// U+2581, replaces spaces and marks the start of every word.
inline constexpr char32_t kBoundary = 0x2581;

struct SpecialIds {
  int bos = 0;
  int pad = 1;
  int eos = 2;
  int unk = 3;
  int mask = 4;
};

struct Piece {
  std::string text;
  double logp = 0.0;
  bool special = false;
};

/// Unigram subword vocabulary shared by every language.
///
/// Ids 0..4 are <s>, <pad>, </s>, <unk>, <mask>. The remaining pieces carry
/// log-probabilities whose exponentials sum to one. Every single-character
/// piece is "required": the trainer never prunes it, which gives every
/// training character a segmentation.
class UnigramVocab {
 public:
  static constexpr int kNumSpecials = 5;

  UnigramVocab() = default;
  explicit UnigramVocab(std::vector<std::pair<std::string, double>> normal_pieces);

  std::size_t size() const { return pieces_.size(); }
  const Piece& piece(int id) const;
  const std::u32string& piece_chars(int id) const { return chars_.at(static_cast<std::size_t>(id)); }
  std::optional<int> find(std::u32string_view piece) const;
  const SpecialIds& specials() const { return specials_; }
  bool is_special(int id) const { return id >= 0 && id < kNumSpecials; }
  const std::set<char32_t>& required_chars() const { return required_chars_; }
  std::size_t max_piece_length() const { return max_len_; }
  // Score of the <unk> edge used for characters outside the vocabulary.
  double unk_logp() const { return unk_logp_; }

  void save(std::ostream& out) const;
  void save_file(const std::string& path) const;
  static UnigramVocab load(std::istream& in);
  static UnigramVocab load_file(const std::string& path);

 private:
  std::vector<Piece> pieces_;
  std::vector<std::u32string> chars_;
  std::unordered_map<std::u32string, int> index_;
  std::set<char32_t> required_chars_;
  SpecialIds specials_;
  std::size_t max_len_ = 1;
  double unk_logp_ = -10.0;
};

struct LatticeEdge {
  std::size_t end = 0;
  int piece_id = 0;
  double logp = 0.0;
};

// All vocabulary matches over one boundary-marked string. Characters missing
// from the vocabulary get a single-character <unk> edge, so a complete path
// always exists.
class Lattice {
 public:
  // `excluded` removes one piece id from the lattice (used for pruning).
  Lattice(const UnigramVocab& vocab, std::u32string_view marked, int excluded = -1);

  std::size_t size() const { return begin_.size(); }
  const std::vector<LatticeEdge>& edges_from(std::size_t pos) const { return begin_[pos]; }

 private:
  std::vector<std::vector<LatticeEdge>> begin_;
};

// NFC, whitespace collapse, then a boundary marker before every word.
std::u32string to_marked(std::string_view text);

struct Segmentation {
  std::vector<int> ids;
  double logp = 0.0;
};

// Maximum-likelihood path. Ties (within 1e-12 relative) go to the path with
// fewer pieces, then to the one whose first differing piece is longer.
Segmentation viterbi(const Lattice& lattice);

std::vector<int> viterbi_encode(const UnigramVocab& vocab, std::string_view text);

// Inverse of viterbi_encode for covered text; <unk> becomes U+FFFD and the
// other special ids render as nothing. Throws on ids outside the vocabulary.
std::string decode(const UnigramVocab& vocab, std::span<const int> ids);

struct UnigramTrainerOptions {
  std::size_t vocab_size = 8000;  // including the special pieces
  double seed_multiplier = 4.0;
  int em_iters = 2;
  double prune_keep = 0.75;
  std::size_t max_piece_length = 8;
};

// Corpus log-likelihood after each EM step, grouped by rounds of fixed
// vocabulary. Entry 0 of a round is the likelihood before its first M-step.
struct UnigramTrainingTrace {
  std::vector<std::vector<double>> rounds;
  std::vector<std::size_t> round_sizes;
};

UnigramVocab train_unigram(std::span<const std::string> corpus, const UnigramTrainerOptions& options,
                           UnigramTrainingTrace* trace = nullptr);

}  // namespace babelforge::tokenizer

#endif  // BABELFORGE_UNIGRAM_HPP_
