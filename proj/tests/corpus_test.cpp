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

#include "babelforge/corpus.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "babelforge/char_lm.hpp"
#include "fixtures.hpp"

namespace babelforge::corpus {
namespace {

Document doc(std::string text, std::string lang, std::string id) {
  Document d;
  d.text = std::move(text);
  d.lang = std::move(lang);
  d.source_id = std::move(id);
  return d;
}

TEST(ComputeStatsTest, HelloWorld) {
  const std::vector<Document> docs{doc("Hello world.", "en", "1")};
  const auto stats = compute_stats(docs);
  ASSERT_EQ(stats.size(), 1u);
  EXPECT_EQ(stats[0], (CorpusStats{"en", 1, 1, 2, 12}));
}

TEST(ComputeStatsTest, EmptyCorpus) { EXPECT_TRUE(compute_stats({}).empty()); }

TEST(ComputeStatsTest, PartitionAndConcatenationAdditivity) {
  Rng rng(4);
  std::vector<Document> a, b;
  const std::vector<std::string> langs{"en", "fr", "sw"};
  for (int i = 0; i < 30; ++i) {
    a.push_back(doc(testing::english_like_document(rng, 3), langs[static_cast<std::size_t>(i) % 3], "a" + std::to_string(i)));
    b.push_back(doc(testing::english_like_document(rng, 2), langs[static_cast<std::size_t>(i * 7) % 3], "b" + std::to_string(i)));
  }
  std::vector<Document> ab = a;
  ab.insert(ab.end(), b.begin(), b.end());

  // Per-language rows sum to whole-corpus totals.
  CorpusStats sum;
  for (const auto& s : compute_stats(ab)) sum += s;
  EXPECT_EQ(sum.n_docs, 60);
  std::int64_t bytes = 0;
  for (const auto& d : ab) bytes += static_cast<std::int64_t>(d.text.size());
  EXPECT_EQ(sum.bytes, bytes);

  // stats(a ++ b) == stats(a) + stats(b), language by language.
  std::map<std::string, CorpusStats> expected;
  for (const auto& s : compute_stats(a)) expected[s.lang] += s;
  for (const auto& s : compute_stats(b)) expected[s.lang] += s;
  for (const auto& s : compute_stats(ab)) {
    auto e = expected[s.lang];
    e.lang = s.lang;
    EXPECT_EQ(s, e);
    EXPECT_GE(s.bytes, s.n_tokens);
  }
}

TEST(ComputeStatsTest, CsvHeader) {
  std::ostringstream out;
  const std::vector<CorpusStats> stats{{"en", 1, 1, 2, 12}};
  write_stats_csv(out, stats);
  EXPECT_EQ(out.str(), "lang,n_docs,n_sentences,n_tokens,bytes\nen,1,1,2,12\n");
}

TEST(SentenceSplitTest, Rules) {
  EXPECT_EQ(count_sentences("Hello world."), 1);
  EXPECT_EQ(count_sentences("One. Two! Three? Four"), 4);
  EXPECT_EQ(count_sentences("line one\nline two"), 2);
  EXPECT_EQ(count_sentences("3.14 is pi"), 1);  // no whitespace after the dot
  EXPECT_EQ(count_sentences("これは文です。 次の文"), 2);
  EXPECT_EQ(count_sentences("هل هذا سؤال؟ نعم"), 2);
  EXPECT_EQ(count_sentences(""), 0);
}

TEST(DedupTest, ByteIdenticalDocuments) {
  const std::vector<Document> docs{doc("same text", "en", "1"), doc("same text", "en", "2")};
  const auto out = dedup(docs);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].source_id, "1");
}

TEST(DedupTest, TrailingWhitespaceAndCase) {
  const std::vector<Document> docs{doc("Some Text", "en", "1"), doc("some text   ", "en", "2")};
  EXPECT_EQ(dedup(docs).size(), 1u);
}

TEST(DedupTest, UniqueCorpusUnchanged) {
  const std::vector<Document> docs{doc("alpha\nbeta", "en", "1"), doc("gamma", "fr", "2"), doc("delta", "en", "3")};
  const auto out = dedup(docs);
  ASSERT_EQ(out.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(out[i].text, docs[i].text);
}

TEST(DedupTest, RepeatedParagraphRemovedInsideLaterDocument) {
  const std::vector<Document> docs{doc("header\nbody one", "en", "1"), doc("header\nbody two", "en", "2")};
  const auto out = dedup(docs);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[1].text, "body two");
}

TEST(JsonlTest, ReadNormalizesAndSkipsEmpty) {
  std::istringstream in(
      R"({"text":"  Café   au lait ","lang":"fr","source_id":"x1"})"
      "\n"
      R"({"text":"   ","lang":"fr","source_id":"x2"})"
      "\n");
  std::size_t skipped = 0;
  const auto docs = read_jsonl(in, &skipped);
  ASSERT_EQ(docs.size(), 1u);
  EXPECT_EQ(skipped, 1u);
  EXPECT_EQ(docs[0].text, "Café au lait");  // NFC-composed, whitespace collapsed
  EXPECT_FALSE(docs[0].ppl.has_value());
}

TEST(JsonlTest, OutputCarriesScores) {
  Document d = doc("hi there", "en", "s");
  d.langid_conf = 0.75;
  d.ppl = 3.5;
  const Document back = document_from_json(document_to_json(d));
  EXPECT_EQ(back.text, d.text);
  EXPECT_EQ(back.langid_conf, 0.75);
  EXPECT_EQ(back.ppl, 3.5);
  EXPECT_THROW(document_from_json(R"({"text":"a","lang":"en","langid_conf":1.5})"), std::invalid_argument);
}

class FilterTest : public ::testing::Test {
 protected:
  void SetUp() override {
    Rng rng(11);
    std::vector<std::string> train;
    for (int i = 0; i < 400; ++i) train.push_back(testing::english_like_document(rng, 4));
    lms_.emplace("en", CharLM::train_texts(train, 5));
  }
  std::map<std::string, CharLM> lms_;
};

TEST_F(FilterTest, KeepAllIsIdentityAndOrderStable) {
  Rng rng(2);
  std::vector<Document> docs;
  for (int i = 0; i < 12; ++i) docs.push_back(doc(testing::english_like_document(rng, 2), "en", std::to_string(100 - i)));
  const auto r = score_and_filter(docs, lms_, 1.0);
  ASSERT_EQ(r.kept.size(), docs.size());
  EXPECT_TRUE(r.dropped.empty());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    EXPECT_EQ(r.kept[i].source_id, docs[i].source_id);
    ASSERT_TRUE(r.kept[i].ppl.has_value());
    EXPECT_GT(*r.kept[i].ppl, 0.0);
  }
}

TEST_F(FilterTest, ShuffledDocumentDropped) {
  Rng rng(9);
  std::vector<Document> docs;
  for (int i = 0; i < 9; ++i) docs.push_back(doc(testing::english_like_document(rng, 3), "en", "d" + std::to_string(i)));
  docs.push_back(doc(testing::shuffle_chars(docs[4].text, rng), "en", "shuffled"));
  const auto r = score_and_filter(docs, lms_, 0.5);
  EXPECT_EQ(r.kept.size(), 5u);
  const bool dropped = std::any_of(r.dropped.begin(), r.dropped.end(),
                                   [](const DroppedDocument& d) { return d.doc.source_id == "shuffled"; });
  EXPECT_TRUE(dropped);
}

TEST_F(FilterTest, MissingLanguageModel) {
  const std::vector<Document> docs{doc("bonjour le monde", "fr", "f1"), doc("hello world", "en", "e1")};
  const auto r = score_and_filter(docs, lms_, 1.0);
  ASSERT_EQ(r.dropped.size(), 1u);
  EXPECT_EQ(r.dropped[0].reason, "no-lm");
  EXPECT_EQ(r.dropped[0].doc.source_id, "f1");
  EXPECT_THROW(score_and_filter(docs, lms_, 0.0), std::invalid_argument);
  EXPECT_THROW(score_and_filter(docs, lms_, 1.5), std::invalid_argument);
}

TEST_F(FilterTest, MonotoneInKeepFractionAndDeterministic) {
  Rng rng(21);
  std::vector<Document> docs;
  for (int i = 0; i < 60; ++i) {
    std::string t = testing::english_like_document(rng, 1 + static_cast<int>(rng.below(3)));
    if (i % 5 == 0) t = testing::shuffle_chars(t, rng);
    docs.push_back(doc(t, "en", "id" + std::to_string(rng.below(20))));  // repeated ids exercise tie-breaking
  }
  const std::vector<double> fractions{0.05, 0.1, 0.3, 0.5, 0.51, 0.9, 1.0};
  std::set<std::string> prev;
  for (double f : fractions) {
    const auto r = score_and_filter(docs, lms_, f);
    std::set<std::string> kept;
    for (const auto& d : r.kept) kept.insert(d.text);
    EXPECT_TRUE(std::includes(kept.begin(), kept.end(), prev.begin(), prev.end())) << "f=" << f;
    prev = kept;
  }
  // Parallel scoring and repeated runs give byte-identical output.
  std::ostringstream a, b;
  write_jsonl(a, score_and_filter(docs, lms_, 0.5, 1).kept);
  write_jsonl(b, score_and_filter(docs, lms_, 0.5, 4).kept);
  EXPECT_EQ(a.str(), b.str());
}

}  // namespace
}  // namespace babelforge::corpus
