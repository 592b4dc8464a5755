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

#include "babelforge/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <type_traits>
#include <stdexcept>

#include "babelforge/rng.hpp"
#include "babelforge/run_config.hpp"
#include "babelforge/text.hpp"

namespace babelforge::xfer {

namespace {

enum class Category { kFunction, kNoun, kVerb, kAdjective };

// Slot sequences of the shared phrase grammar.
const std::vector<std::vector<Category>>& frames() {
  using C = Category;
  static const std::vector<std::vector<C>> f{
      {C::kFunction, C::kNoun, C::kVerb, C::kFunction, C::kNoun},
      {C::kFunction, C::kAdjective, C::kNoun, C::kVerb, C::kFunction, C::kNoun},
      {C::kFunction, C::kNoun, C::kVerb, C::kFunction, C::kAdjective, C::kNoun, C::kFunction, C::kFunction, C::kNoun},
      {C::kNoun, C::kVerb, C::kFunction, C::kNoun, C::kFunction, C::kNoun},
      {C::kFunction, C::kNoun, C::kFunction, C::kNoun, C::kVerb, C::kAdjective},
  };
  return f;
}

Category content_category(int index_in_block) {
  switch (index_in_block % 5) {
    case 3: return Category::kVerb;
    case 4: return Category::kAdjective;
    default: return Category::kNoun;
  }
}

struct Phonology {
  std::u32string consonants;
  std::u32string vowels;
};

const std::u32string kBaseConsonants = U"ptkbdgmnlrsfvzhjwc";
const std::u32string kExtraConsonants = U"ñšžçłđ";
const std::u32string kBaseVowels = U"aeiou";
const std::u32string kExtraVowels = U"yäöüéèáíóúâ";

std::u32string pick(const std::u32string& from, std::size_t n, Rng& rng) {
  std::u32string s = from;
  rng.shuffle(std::span<char32_t>(s));
  s.resize(std::min(n, s.size()));
  return s;
}

Phonology language_phonology(Rng rng) {
  Phonology p;
  p.consonants = pick(kBaseConsonants, 8, rng) + pick(kExtraConsonants, 1, rng);
  p.vowels = pick(kBaseVowels, 3, rng) + pick(kExtraVowels, 1, rng);
  return p;
}

std::string spell(const Phonology& ph, int syllables, Rng& rng) {
  std::u32string w;
  for (int s = 0; s < syllables; ++s) {
    w.push_back(ph.consonants[rng.below(ph.consonants.size())]);
    w.push_back(ph.vowels[rng.below(ph.vowels.size())]);
    if (rng.uniform() < 0.3) w.push_back(ph.consonants[rng.below(ph.consonants.size())]);
  }
  return text::to_utf8(w);
}

// A fresh spelling, unique across everything generated so far.
std::string unique_form(const Phonology& ph, bool function_word, Rng& rng, std::set<std::string>& used) {
  for (int attempt = 0;; ++attempt) {
    const int syl = function_word ? 1 + attempt / 20 : 2 + static_cast<int>(rng.below(2)) + attempt / 20;
    std::string w = spell(ph, syl, rng);
    if (used.insert(w).second) return w;
  }
}

struct Lexicon {
  int n_function = 0;
  int n_generic = 0;
  int topic_words = 0;
  int n_topics = 0;
  int size() const { return n_function + n_generic + n_topics * topic_words; }
  // Word ids by (topic or -1 for generic, category), Zipf-ranked by position.
  std::map<std::pair<int, Category>, std::vector<int>> by_slot;
  std::vector<int> function_ids;
};

Lexicon make_lexicon(const SyntheticLangSpec& spec) {
  Lexicon lx;
  lx.n_function = spec.function_words;
  lx.n_generic = spec.generic_words;
  lx.topic_words = spec.topic_words;
  lx.n_topics = spec.n_topics;
  for (int i = 0; i < lx.n_function; ++i) lx.function_ids.push_back(i);
  for (int i = 0; i < lx.n_generic; ++i) lx.by_slot[{-1, content_category(i)}].push_back(lx.n_function + i);
  for (int t = 0; t < lx.n_topics; ++t) {
    for (int i = 0; i < lx.topic_words; ++i) {
      lx.by_slot[{t, content_category(i)}].push_back(lx.n_function + lx.n_generic + t * lx.topic_words + i);
    }
  }
  return lx;
}

int zipf_draw(const std::vector<int>& ids, double s, Rng& rng) {
  std::vector<double> w(ids.size());
  for (std::size_t r = 0; r < ids.size(); ++r) w[r] = 1.0 / std::pow(static_cast<double>(r + 1), s);
  return ids[rng.categorical(w)];
}

std::vector<int> sample_sentence(const Lexicon& lx, const SyntheticLangSpec& spec, int topic, Rng& rng) {
  const auto& fr = frames()[rng.below(frames().size())];
  std::vector<int> words;
  for (Category c : fr) {
    if (c == Category::kFunction) {
      words.push_back(zipf_draw(lx.function_ids, spec.zipf, rng));
      continue;
    }
    const bool topical = rng.uniform() < spec.topic_strength;
    const auto it = lx.by_slot.find({topical ? topic : -1, c});
    if (it == lx.by_slot.end() || it->second.empty()) {
      words.push_back(zipf_draw(lx.by_slot.at({-1, Category::kNoun}), spec.zipf, rng));
    } else {
      words.push_back(zipf_draw(it->second, spec.zipf, rng));
    }
  }
  return words;
}

int family_of(int lang, int family_size) {
  if (family_size <= 1 || lang == 0) return -1;
  return (lang - 1) / family_size;
}

}  // namespace

void SyntheticLangSpec::validate() const {
  if (n_langs < 2) throw std::invalid_argument("generate_languages: need n_langs >= 2");
  if (n_topics < 2) throw std::invalid_argument("generate_languages: need n_topics >= 2");
  if (topic_words < 5 || generic_words < 5 || function_words < 1) {
    throw std::invalid_argument("generate_languages: lexicon too small");
  }
  if (lexicon_overlap < 0.0 || lexicon_overlap > 1.0) {
    throw std::invalid_argument("generate_languages: lexicon_overlap must be in [0,1]");
  }
  if (family_overlap < 0.0 || family_overlap > 1.0) {
    throw std::invalid_argument("generate_languages: family_overlap must be in [0,1]");
  }
  if (topic_strength < 0.0 || topic_strength > 1.0) {
    throw std::invalid_argument("generate_languages: topic_strength must be in [0,1]");
  }
  if (base_sentences < 1 || size_decay <= 0.0 || size_decay > 1.0) {
    throw std::invalid_argument("generate_languages: invalid size profile");
  }
  if (doc_sentences < 1) throw std::invalid_argument("generate_languages: doc_sentences must be >= 1");
  if (probe_sentences < 0) throw std::invalid_argument("generate_languages: probe_sentences < 0");
}

std::map<std::string, std::string> SyntheticLangSpec::to_map(const std::string& prefix) const {
  return {{prefix + "n_langs", std::to_string(n_langs)},
          {prefix + "n_topics", std::to_string(n_topics)},
          {prefix + "topic_words", std::to_string(topic_words)},
          {prefix + "generic_words", std::to_string(generic_words)},
          {prefix + "function_words", std::to_string(function_words)},
          {prefix + "topic_strength", format_double(topic_strength)},
          {prefix + "zipf", format_double(zipf)},
          {prefix + "lexicon_overlap", format_double(lexicon_overlap)},
          {prefix + "family_size", std::to_string(family_size)},
          {prefix + "family_overlap", format_double(family_overlap)},
          {prefix + "base_sentences", std::to_string(base_sentences)},
          {prefix + "size_decay", format_double(size_decay)},
          {prefix + "min_sentences", std::to_string(min_sentences)},
          {prefix + "probe_sentences", std::to_string(probe_sentences)},
          {prefix + "doc_sentences", std::to_string(doc_sentences)}};
}

SyntheticLangSpec SyntheticLangSpec::from_config(KeyValueConfig& cfg, const std::string& prefix,
                                                 const SyntheticLangSpec& base) {
  SyntheticLangSpec d = base;
  auto get_int = [&](const char* key, auto& field) {
    field = static_cast<std::remove_reference_t<decltype(field)>>(cfg.get_int(prefix + key, field));
  };
  get_int("n_langs", d.n_langs);
  get_int("n_topics", d.n_topics);
  get_int("topic_words", d.topic_words);
  get_int("generic_words", d.generic_words);
  get_int("function_words", d.function_words);
  d.topic_strength = cfg.get_double(prefix + "topic_strength", d.topic_strength);
  d.zipf = cfg.get_double(prefix + "zipf", d.zipf);
  d.lexicon_overlap = cfg.get_double(prefix + "lexicon_overlap", d.lexicon_overlap);
  get_int("family_size", d.family_size);
  d.family_overlap = cfg.get_double(prefix + "family_overlap", d.family_overlap);
  get_int("base_sentences", d.base_sentences);
  d.size_decay = cfg.get_double(prefix + "size_decay", d.size_decay);
  get_int("min_sentences", d.min_sentences);
  get_int("probe_sentences", d.probe_sentences);
  get_int("doc_sentences", d.doc_sentences);
  return d;
}

SyntheticLangSpec SyntheticLangSpec::from_config(KeyValueConfig& cfg, const std::string& prefix) {
  return from_config(cfg, prefix, SyntheticLangSpec());
}

std::string lang_code(int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "s%02d", index);
  return buf;
}

std::vector<std::int64_t> size_profile(const SyntheticLangSpec& spec) {
  std::vector<std::int64_t> sizes;
  for (int i = 0; i < spec.n_langs; ++i) {
    const double n = static_cast<double>(spec.base_sentences) * std::pow(spec.size_decay, i);
    sizes.push_back(std::max(spec.min_sentences, static_cast<std::int64_t>(std::llround(n))));
  }
  return sizes;
}

SyntheticCorpus generate_languages(const SyntheticLangSpec& spec, std::uint64_t seed) {
  spec.validate();
  const Rng root(seed);
  const Lexicon lx = make_lexicon(spec);
  const int n_types = lx.size();

  // Which types are spelled identically everywhere.
  std::vector<int> order(static_cast<std::size_t>(n_types));
  std::iota(order.begin(), order.end(), 0);
  Rng overlap_rng = root.split("overlap");
  overlap_rng.shuffle(std::span<int>(order));
  const auto n_shared = static_cast<std::size_t>(std::llround(spec.lexicon_overlap * n_types));
  std::vector<bool> shared(static_cast<std::size_t>(n_types), false);
  for (std::size_t i = 0; i < n_shared; ++i) shared[static_cast<std::size_t>(order[i])] = true;

  std::set<std::string> used;
  std::vector<std::string> shared_form(static_cast<std::size_t>(n_types));
  {
    Rng rng = root.split("shared-forms");
    const Phonology ph{kBaseConsonants, kBaseVowels};
    for (int w = 0; w < n_types; ++w) {
      if (shared[static_cast<std::size_t>(w)]) shared_form[static_cast<std::size_t>(w)] = unique_form(ph, w < lx.n_function, rng, used);
    }
  }

  SyntheticCorpus out;
  const auto sizes = size_profile(spec);
  std::map<int, std::vector<std::string>> family_forms;
  for (int li = 0; li < spec.n_langs; ++li) {
    const std::string code = lang_code(li);
    const int fam = family_of(li, spec.family_size);
    if (fam >= 0 && !family_forms.contains(fam)) {
      // First member of a family: decide and spell the family-shared types.
      std::vector<int> rest;
      for (int w = 0; w < n_types; ++w) {
        if (!shared[static_cast<std::size_t>(w)]) rest.push_back(w);
      }
      Rng rng = root.split("family:" + std::to_string(fam));
      rng.shuffle(std::span<int>(rest));
      const Phonology ph = language_phonology(rng.split("phonology"));
      std::vector<std::string> forms(static_cast<std::size_t>(n_types));
      const auto n_fam = static_cast<std::size_t>(std::llround(spec.family_overlap * static_cast<double>(rest.size())));
      for (std::size_t i = 0; i < n_fam; ++i) {
        forms[static_cast<std::size_t>(rest[i])] = unique_form(ph, rest[i] < lx.n_function, rng, used);
      }
      family_forms[fam] = std::move(forms);
    }

    Rng lex_rng = root.split("lexicon:" + code);
    const Phonology ph = language_phonology(lex_rng.split("phonology"));
    std::vector<std::string> form(static_cast<std::size_t>(n_types));
    for (int w = 0; w < n_types; ++w) {
      const auto wi = static_cast<std::size_t>(w);
      if (shared[wi]) {
        form[wi] = shared_form[wi];
      } else if (fam >= 0 && !family_forms[fam][wi].empty()) {
        form[wi] = family_forms[fam][wi];
      } else {
        form[wi] = unique_form(ph, w < lx.n_function, lex_rng, used);
      }
    }

    auto render = [&](const std::vector<int>& words) {
      std::string s;
      for (int w : words) {
        s += form[static_cast<std::size_t>(w)];
        s += ' ';
      }
      return s + ".";
    };
    // n sentences grouped into documents of up to per_doc sentences on one topic.
    auto emit = [&](Rng rng, std::int64_t n, int per_doc, const std::string& id_prefix,
                    std::vector<corpus::Document>& dst) {
      for (std::int64_t i = 0; n > 0; ++i) {
        const int topic = static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.n_topics)));
        corpus::Document d;
        for (std::int64_t k = 0; k < per_doc && n > 0; ++k, --n) {
          if (k) d.text += ' ';
          d.text += render(sample_sentence(lx, spec, topic, rng));
        }
        d.lang = code;
        d.source_id = code + id_prefix + std::to_string(i);
        d.topic = topic;
        dst.push_back(std::move(d));
      }
    };
    emit(root.split("text:" + code), sizes[static_cast<std::size_t>(li)], spec.doc_sentences, "-", out.pretrain);
    emit(root.split("probe:" + code), spec.probe_sentences, 1, "-p", out.probe);
    out.langs.push_back(code);
    out.sizes.push_back(sizes[static_cast<std::size_t>(li)]);
  }
  return out;
}

}  // namespace babelforge::xfer
