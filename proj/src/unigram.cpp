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

#include "babelforge/unigram.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "babelforge/text.hpp"

namespace babelforge::tokenizer {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr std::string_view kHeaderPrefix = "#unigram-vocab v1 size=";
const char* const kSpecialNames[UnigramVocab::kNumSpecials] = {"<s>", "<pad>", "</s>", "<unk>", "<mask>"};

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

std::string format_logp(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

UnigramVocab::UnigramVocab(std::vector<std::pair<std::string, double>> normal_pieces) {
  for (int i = 0; i < kNumSpecials; ++i) {
    pieces_.push_back({kSpecialNames[i], 0.0, true});
    chars_.emplace_back();
  }
  double min_logp = 0.0;
  for (auto& [text, logp] : normal_pieces) {
    std::u32string cps = text::to_u32(text);
    if (cps.empty()) throw std::invalid_argument("vocab: empty piece");
    if (logp > 0.0) throw std::invalid_argument("vocab: piece logp must be <= 0");
    const int id = static_cast<int>(pieces_.size());
    if (!index_.emplace(cps, id).second) throw std::invalid_argument("vocab: duplicate piece '" + text + "'");
    if (cps.size() == 1) required_chars_.insert(cps[0]);
    max_len_ = std::max(max_len_, cps.size());
    min_logp = std::min(min_logp, logp);
    pieces_.push_back({std::move(text), logp, false});
    chars_.push_back(std::move(cps));
  }
  unk_logp_ = min_logp - 10.0;
}

const Piece& UnigramVocab::piece(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= pieces_.size()) {
    throw std::out_of_range("vocab: unknown id " + std::to_string(id));
  }
  return pieces_[static_cast<std::size_t>(id)];
}

std::optional<int> UnigramVocab::find(std::u32string_view piece) const {
  const auto it = index_.find(std::u32string(piece));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void UnigramVocab::save(std::ostream& out) const {
  out << kHeaderPrefix << pieces_.size() << '\n';
  for (const auto& p : pieces_) out << p.text << '\t' << format_logp(p.logp) << '\n';
}

void UnigramVocab::save_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  save(out);
}

UnigramVocab UnigramVocab::load(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind(kHeaderPrefix, 0) != 0) {
    throw std::runtime_error("vocab: missing '#unigram-vocab v1' header");
  }
  const std::size_t declared = std::stoul(line.substr(kHeaderPrefix.size()));
  std::vector<std::pair<std::string, double>> normal;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos) throw std::runtime_error("vocab: malformed line '" + line + "'");
    std::string piece = line.substr(0, tab);
    const double logp = std::stod(line.substr(tab + 1));
    if (n < kNumSpecials) {
      if (piece != kSpecialNames[n]) throw std::runtime_error("vocab: expected special " + std::string(kSpecialNames[n]));
    } else {
      normal.emplace_back(std::move(piece), logp);
    }
    ++n;
  }
  if (n != declared) throw std::runtime_error("vocab: size mismatch with header");
  return UnigramVocab(std::move(normal));
}

UnigramVocab UnigramVocab::load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return load(in);
}

Lattice::Lattice(const UnigramVocab& vocab, std::u32string_view marked, int excluded) : begin_(marked.size()) {
  const std::size_t max_len = vocab.max_piece_length();
  for (std::size_t i = 0; i < marked.size(); ++i) {
    bool has_single = false;
    for (std::size_t len = 1; len <= max_len && i + len <= marked.size(); ++len) {
      const auto id = vocab.find(marked.substr(i, len));
      if (!id || *id == excluded || vocab.is_special(*id)) continue;
      begin_[i].push_back({i + len, *id, vocab.piece(*id).logp});
      if (len == 1) has_single = true;
    }
    if (!has_single && !vocab.required_chars().contains(marked[i])) {
      begin_[i].push_back({i + 1, vocab.specials().unk, vocab.unk_logp()});
    }
  }
}

std::u32string to_marked(std::string_view t) {
  const std::string norm = text::normalize(t);
  if (norm.empty()) return {};
  std::u32string out;
  out.push_back(kBoundary);
  for (char32_t c : text::to_u32(norm)) out.push_back(c == U' ' ? kBoundary : c);
  return out;
}

Segmentation viterbi(const Lattice& lattice) {
  // Suffix DP: best[i] describes the preferred segmentation of [i, n).
  struct Cell {
    double score = kNegInf;
    std::size_t pieces = 0;
    std::size_t next = 0;
    int id = -1;
  };
  const std::size_t n = lattice.size();
  std::vector<Cell> best(n + 1);
  best[n].score = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    Cell& cell = best[i];
    for (const auto& e : lattice.edges_from(i)) {
      const Cell& rest = best[e.end];
      if (rest.score == kNegInf) continue;
      const double score = e.logp + rest.score;
      const std::size_t pieces = rest.pieces + 1;
      bool take = false;
      if (cell.id < 0) {
        take = true;
      } else {
        const double tol = 1e-12 * std::max({1.0, std::abs(score), std::abs(cell.score)});
        if (score > cell.score + tol) {
          take = true;
        } else if (score >= cell.score - tol) {
          take = pieces < cell.pieces || (pieces == cell.pieces && e.end > cell.next);
        }
      }
      if (take) cell = {score, pieces, e.end, e.piece_id};
    }
  }
  Segmentation seg;
  if (n == 0) return seg;
  if (best[0].id < 0) throw std::logic_error("lattice has no complete path");
  seg.logp = best[0].score;
  for (std::size_t i = 0; i < n; i = best[i].next) seg.ids.push_back(best[i].id);
  return seg;
}

std::vector<int> viterbi_encode(const UnigramVocab& vocab, std::string_view t) {
  const std::u32string marked = to_marked(t);
  return viterbi(Lattice(vocab, marked)).ids;
}

std::string decode(const UnigramVocab& vocab, std::span<const int> ids) {
  std::u32string out;
  for (int id : ids) {
    const Piece& p = vocab.piece(id);
    if (p.special) {
      if (id == vocab.specials().unk) out.push_back(U'�');
      continue;
    }
    for (char32_t c : vocab.piece_chars(id)) out.push_back(c == kBoundary ? U' ' : c);
  }
  if (!out.empty() && out.front() == U' ') out.erase(out.begin());
  return text::to_utf8(out);
}

namespace {

using WordCounts = std::map<std::u32string, double>;

struct EStepResult {
  std::vector<double> expected;  // indexed by piece id
  double loglik = 0.0;
};

EStepResult e_step(const UnigramVocab& vocab, const WordCounts& words) {
  EStepResult r;
  r.expected.assign(vocab.size(), 0.0);
  for (const auto& [word, freq] : words) {
    const Lattice lattice(vocab, word);
    const std::size_t n = lattice.size();
    std::vector<double> alpha(n + 1, kNegInf), beta(n + 1, kNegInf);
    alpha[0] = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (alpha[i] == kNegInf) continue;
      for (const auto& e : lattice.edges_from(i)) alpha[e.end] = log_add(alpha[e.end], alpha[i] + e.logp);
    }
    beta[n] = 0.0;
    for (std::size_t i = n; i-- > 0;) {
      for (const auto& e : lattice.edges_from(i)) beta[i] = log_add(beta[i], e.logp + beta[e.end]);
    }
    const double z = alpha[n];
    r.loglik += freq * z;
    for (std::size_t i = 0; i < n; ++i) {
      for (const auto& e : lattice.edges_from(i)) {
        r.expected[static_cast<std::size_t>(e.piece_id)] += freq * std::exp(alpha[i] + e.logp + beta[e.end] - z);
      }
    }
  }
  return r;
}

std::vector<std::pair<std::string, double>> to_pieces(const std::vector<std::u32string>& strings,
                                                      const std::vector<double>& logps) {
  std::vector<std::pair<std::string, double>> out;
  out.reserve(strings.size());
  for (std::size_t i = 0; i < strings.size(); ++i) out.emplace_back(text::to_utf8(strings[i]), logps[i]);
  return out;
}

// Normalizes expected counts into log-probabilities (the maximum-likelihood M-step).
std::vector<double> m_step(const std::vector<double>& expected_by_id) {
  std::vector<double> counts(expected_by_id.begin() + UnigramVocab::kNumSpecials, expected_by_id.end());
  double total = 0.0;
  for (double& c : counts) {
    c = std::max(c, 1e-300);
    total += c;
  }
  std::vector<double> logps(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) logps[i] = std::log(counts[i] / total);
  return logps;
}

// Canonical ordering: probability descending, then piece string.
UnigramVocab finalize(std::vector<std::u32string> strings, std::vector<double> logps) {
  std::vector<std::size_t> order(strings.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (logps[a] != logps[b]) return logps[a] > logps[b];
    return strings[a] < strings[b];
  });
  std::vector<std::u32string> s;
  std::vector<double> l;
  for (std::size_t i : order) {
    s.push_back(strings[i]);
    l.push_back(logps[i]);
  }
  return UnigramVocab(to_pieces(s, l));
}

}  // namespace

UnigramVocab train_unigram(std::span<const std::string> corpus, const UnigramTrainerOptions& options,
                           UnigramTrainingTrace* trace) {
  if (corpus.empty()) throw std::invalid_argument("train_unigram: empty corpus");
  if (!(options.prune_keep > 0.0 && options.prune_keep < 1.0)) {
    throw std::invalid_argument("train_unigram: prune_keep must be in (0, 1)");
  }
  if (options.em_iters < 1) throw std::invalid_argument("train_unigram: em_iters must be >= 1");

  WordCounts words;
  for (const auto& sentence : corpus) {
    const std::u32string marked = to_marked(sentence);
    std::size_t start = 0;
    for (std::size_t i = 1; i <= marked.size(); ++i) {
      if (i == marked.size() || marked[i] == kBoundary) {
        words[marked.substr(start, i - start)] += 1.0;
        start = i;
      }
    }
  }
  if (words.empty()) throw std::invalid_argument("train_unigram: corpus has no text");

  // Substring frequencies within words, up to max_piece_length characters.
  std::map<std::u32string, double> substr_freq;
  std::set<char32_t> alphabet;
  for (const auto& [w, f] : words) {
    for (std::size_t i = 0; i < w.size(); ++i) {
      alphabet.insert(w[i]);
      for (std::size_t len = 1; len <= options.max_piece_length && i + len <= w.size(); ++len) {
        substr_freq[w.substr(i, len)] += f;
      }
    }
  }
  const std::size_t target_pieces = options.vocab_size >= UnigramVocab::kNumSpecials
                                        ? options.vocab_size - UnigramVocab::kNumSpecials
                                        : 0;
  if (options.vocab_size < alphabet.size() + UnigramVocab::kNumSpecials) {
    throw std::invalid_argument("train_unigram: vocab too small for coverage (alphabet " +
                                std::to_string(alphabet.size()) + " + " +
                                std::to_string(UnigramVocab::kNumSpecials) + " specials)");
  }

  std::vector<std::pair<std::u32string, double>> candidates;
  for (const auto& [s, f] : substr_freq) {
    if (s.size() > 1) candidates.emplace_back(s, f);
  }
  std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
    const double sa = a.second * static_cast<double>(a.first.size());
    const double sb = b.second * static_cast<double>(b.first.size());
    if (sa != sb) return sa > sb;
    return a.first < b.first;
  });
  const auto seed_cap = static_cast<std::size_t>(options.seed_multiplier * static_cast<double>(options.vocab_size));
  const std::size_t n_multi = seed_cap > alphabet.size() ? std::min(candidates.size(), seed_cap - alphabet.size()) : 0;

  std::vector<std::u32string> strings;
  std::vector<double> freqs;
  for (char32_t c : alphabet) {
    strings.emplace_back(1, c);
    freqs.push_back(substr_freq[std::u32string(1, c)]);
  }
  for (std::size_t i = 0; i < n_multi; ++i) {
    strings.push_back(candidates[i].first);
    freqs.push_back(candidates[i].second);
  }
  double total = 0.0;
  for (double f : freqs) total += f;
  std::vector<double> logps;
  for (double f : freqs) logps.push_back(std::log(f / total));

  auto run_em = [&](UnigramVocab& vocab) {
    // The vocab stores pieces in `strings` order, so ids map back by offset.
    std::vector<double> lls;
    for (int it = 0; it < options.em_iters; ++it) {
      EStepResult r = e_step(vocab, words);
      lls.push_back(r.loglik);
      logps = m_step(r.expected);
      vocab = UnigramVocab(to_pieces(strings, logps));
    }
    if (trace) {
      lls.push_back(e_step(vocab, words).loglik);
      trace->rounds.push_back(std::move(lls));
      trace->round_sizes.push_back(strings.size());
    }
  };

  UnigramVocab vocab(to_pieces(strings, logps));
  while (true) {
    run_em(vocab);
    if (strings.size() <= target_pieces) break;

    // Piece usage under the current best segmentations.
    std::vector<double> freq(vocab.size(), 0.0);
    for (const auto& [w, f] : words) {
      for (int id : viterbi(Lattice(vocab, w)).ids) freq[static_cast<std::size_t>(id)] += f;
    }
    double sum = 0.0;
    for (double f : freq) sum += f;
    const double logsum = std::log(sum);

    // Likelihood loss from removing each piece, re-segmenting its own string
    // without it; required (single-character) pieces are never candidates.
    std::vector<std::pair<double, std::size_t>> losses;  // (loss, index into strings)
    std::vector<std::size_t> required;
    for (std::size_t i = 0; i < strings.size(); ++i) {
      if (strings[i].size() == 1) {
        required.push_back(i);
        continue;
      }
      const int id = static_cast<int>(i) + UnigramVocab::kNumSpecials;
      const double f = freq[static_cast<std::size_t>(id)];
      if (f <= 0.0) {
        losses.emplace_back(0.0, i);
        continue;
      }
      const Segmentation alt = viterbi(Lattice(vocab, strings[i], id));
      const double logprob_piece = std::log(f) - logsum;
      const double logsum_alt = std::log(sum + f * (static_cast<double>(alt.ids.size()) - 1.0));
      double logprob_alt = 0.0;
      for (int a : alt.ids) logprob_alt += std::log(freq[static_cast<std::size_t>(a)] + f) - logsum_alt;
      losses.emplace_back(f * (logprob_piece - logprob_alt), i);
    }
    std::sort(losses.begin(), losses.end(), [&](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return strings[a.second] < strings[b.second];
    });
    const auto shrunk = static_cast<std::size_t>(options.prune_keep * static_cast<double>(strings.size()));
    const std::size_t new_size = std::max(target_pieces, shrunk);
    const std::size_t keep_multi = new_size > required.size() ? std::min(losses.size(), new_size - required.size()) : 0;

    std::vector<std::size_t> kept = required;
    for (std::size_t r = 0; r < keep_multi; ++r) kept.push_back(losses[r].second);
    std::sort(kept.begin(), kept.end());
    std::vector<std::u32string> next_strings;
    std::vector<double> next_freq;
    double next_total = 0.0;
    for (std::size_t i : kept) {
      next_strings.push_back(strings[i]);
      const double lp = logps[i];
      next_freq.push_back(std::exp(lp));
      next_total += std::exp(lp);
    }
    strings = std::move(next_strings);
    logps.clear();
    for (double p : next_freq) logps.push_back(std::log(p / next_total));
    vocab = UnigramVocab(to_pieces(strings, logps));
  }
  return finalize(strings, logps);
}

}  // namespace babelforge::tokenizer
