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

#include "babelforge/langid.hpp"

#include <sstream>

#include <gtest/gtest.h>

#include "babelforge/text.hpp"
#include "fixtures.hpp"

namespace babelforge::corpus {
namespace {

std::string random_words(Rng& rng, const std::u32string& alphabet, int words) {
  std::u32string out;
  for (int w = 0; w < words; ++w) {
    if (w) out.push_back(U' ');
    const int len = 2 + static_cast<int>(rng.below(6));
    for (int i = 0; i < len; ++i) out.push_back(alphabet[rng.below(alphabet.size())]);
  }
  return text::to_utf8(out);
}

const std::u32string kLatin = U"abcdefghijklmnopqrstuvwxyz";
const std::u32string kCyrillic = U"абвгдежзийклмнопрстуфхцчшщыэюя";

std::vector<LabeledText> latin_cyrillic(Rng& rng, int per_class) {
  std::vector<LabeledText> data;
  for (int i = 0; i < per_class; ++i) {
    data.push_back({random_words(rng, kLatin, 8), "A"});
    data.push_back({random_words(rng, kCyrillic, 8), "B"});
  }
  return data;
}

TEST(LangIdTest, DisjointAlphabetsAreSeparable) {
  Rng rng(1);
  const auto train = latin_cyrillic(rng, 200);
  const auto test = latin_cyrillic(rng, 100);
  const LangIdModel model = LangIdModel::train(train, {});
  EXPECT_EQ(model.weights().rows(), static_cast<Eigen::Index>(model.feature_dim()));
  int correct = 0;
  for (const auto& t : test) correct += model.identify(t.text).lang == t.lang;
  EXPECT_EQ(correct, static_cast<int>(test.size()));

  const auto pred = model.identify(random_words(rng, kLatin, 6));
  EXPECT_EQ(pred.lang, "A");
  EXPECT_GT(pred.confidence, 0.9);
}

TEST(LangIdTest, IdenticalClassesAreIndistinguishable) {
  Rng rng(2);
  std::vector<LabeledText> data;
  std::vector<std::string> texts;
  for (int i = 0; i < 100; ++i) {
    texts.push_back(random_words(rng, kLatin, 6));
    data.push_back({texts.back(), "A"});
    data.push_back({texts.back(), "B"});
  }
  const LangIdModel model = LangIdModel::train(data, {});
  int as_a = 0;
  for (const auto& t : texts) as_a += model.identify(t).lang == "A";
  const double acc_a = as_a / 100.0, acc_b = 1.0 - acc_a;
  EXPECT_LE(acc_a, 0.5 + 0.1);
  EXPECT_LE(acc_b, 0.5 + 0.1);
  // One repeated character seen equally by both classes.
  EXPECT_LE(model.identify("aaaaaa").confidence, 0.5 + 0.05);
}

TEST(LangIdTest, Errors) {
  const std::vector<LabeledText> one{{"abc", "A"}, {"def", "A"}};
  EXPECT_THROW(LangIdModel::train(one, {}), std::invalid_argument);

  Rng rng(3);
  std::size_t skipped = 0;
  auto data = latin_cyrillic(rng, 20);
  data.push_back({"   ", "A"});
  const LangIdModel model = LangIdModel::train(data, {}, &skipped);
  EXPECT_EQ(skipped, 1u);
  EXPECT_THROW(model.identify("  \t "), std::invalid_argument);
}

TEST(LangIdTest, TooShortIsUndetermined) {
  Rng rng(4);
  LangIdOptions opt;
  opt.min_ngram = 3;
  const LangIdModel model = LangIdModel::train(latin_cyrillic(rng, 20), opt);
  const auto pred = model.identify("ab");
  EXPECT_EQ(pred.lang, "und");
  EXPECT_EQ(pred.confidence, 0.0);
}

TEST(LangIdTest, ProbabilitiesSumToOneAndDuplicationInvariant) {
  Rng rng(5);
  const LangIdModel model = LangIdModel::train(latin_cyrillic(rng, 100), {});
  for (int i = 0; i < 20; ++i) {
    std::string t = random_words(rng, i % 2 ? kLatin : kCyrillic, 50);
    if (i % 3 == 0) t += " " + random_words(rng, kLatin, 10);
    ASSERT_GE(text::to_u32(t).size(), 200u);
    const Eigen::VectorXd p = model.predict_proba(t);
    EXPECT_NEAR(p.sum(), 1.0, 1e-6);
    const auto single = model.identify(t);
    const auto twice = model.identify(t + " " + t);
    EXPECT_EQ(single.lang, twice.lang);
    EXPECT_NEAR(single.confidence, twice.confidence, 0.02);
  }
}

TEST(LangIdTest, SaveLoadRoundTrip) {
  Rng rng(6);
  LangIdOptions opt;
  opt.feature_dim = 1 << 12;
  const LangIdModel model = LangIdModel::train(latin_cyrillic(rng, 30), opt);
  std::stringstream buf;
  model.save(buf);
  const LangIdModel back = LangIdModel::load(buf);
  const std::string probe = random_words(rng, kCyrillic, 5);
  EXPECT_EQ(model.predict_proba(probe), back.predict_proba(probe));
  EXPECT_EQ(back.labels(), model.labels());
}

}  // namespace
}  // namespace babelforge::corpus
