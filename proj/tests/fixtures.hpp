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

#ifndef BABELFORGE_TESTS_FIXTURES_HPP_
#define BABELFORGE_TESTS_FIXTURES_HPP_

#include <string>
#include <vector>

#include "babelforge/rng.hpp"
#include "babelforge/text.hpp"

namespace babelforge::testing {

// Small English-like generator: a fixed lexicon, a few sentence frames, and
// Zipf-ish word choice. Enough structure for character n-gram models.
inline std::string english_like_sentence(Rng& rng) {
  static const std::vector<std::string> det{"the", "a", "this", "that", "every", "some"};
  static const std::vector<std::string> adj{"small", "green", "quiet", "strong", "early", "bright", "heavy", "simple"};
  static const std::vector<std::string> noun{"house", "river", "teacher", "window", "garden", "letter", "market",
                                             "station", "morning", "village", "question", "number"};
  static const std::vector<std::string> verb{"opens", "finds", "carries", "watches", "follows", "remembers",
                                             "builds", "answers", "reaches"};
  static const std::vector<std::string> prep{"near", "behind", "with", "under", "before", "across"};
  auto pick = [&](const std::vector<std::string>& v) {
    // Bias towards the front of each list.
    const double u = rng.uniform();
    return v[static_cast<std::size_t>(u * u * static_cast<double>(v.size()))];
  };
  std::string s = pick(det);
  if (rng.uniform() < 0.5) s += " " + pick(adj);
  s += " " + pick(noun) + " " + pick(verb) + " " + pick(det) + " " + pick(noun);
  if (rng.uniform() < 0.5) s += " " + pick(prep) + " " + pick(det) + " " + pick(noun);
  s += ".";
  s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

inline std::string english_like_document(Rng& rng, int sentences) {
  std::string doc;
  for (int i = 0; i < sentences; ++i) {
    if (i) doc += " ";
    doc += english_like_sentence(rng);
  }
  return doc;
}

inline std::string shuffle_chars(const std::string& s, Rng& rng) {
  std::u32string cps = text::to_u32(s);
  rng.shuffle(std::span<char32_t>(cps));
  return text::to_utf8(cps);
}

}  // namespace babelforge::testing

#endif  // BABELFORGE_TESTS_FIXTURES_HPP_
