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

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "babelforge/checkpoint.hpp"
#include "babelforge/langid.hpp"
#include "babelforge/probe.hpp"
#include "babelforge/report.hpp"
#include "babelforge/sweep.hpp"
#include "babelforge/synthetic.hpp"
#include "babelforge/text.hpp"
#include "babelforge/trainer.hpp"

namespace babelforge::xfer {
namespace {

std::set<std::string> types_of(const std::vector<corpus::Document>& docs, const std::string& lang) {
  std::set<std::string> out;
  for (const auto& d : docs) {
    if (d.lang != lang) continue;
    for (const auto& w : text::split_whitespace(d.text)) {
      if (w != ".") out.insert(std::string(w));
    }
  }
  return out;
}

std::map<std::string, std::vector<corpus::Document>> group(const std::vector<corpus::Document>& docs) {
  std::map<std::string, std::vector<corpus::Document>> out;
  for (const auto& d : docs) out[d.lang].push_back(d);
  return out;
}

TEST(Generator, SizeProfile) {
  SyntheticLangSpec spec;
  spec.n_langs = 4;
  spec.base_sentences = 1000;
  spec.size_decay = 0.5;
  EXPECT_EQ(size_profile(spec), (std::vector<std::int64_t>{1000, 500, 250, 125}));
  spec.min_sentences = 300;
  EXPECT_EQ(size_profile(spec), (std::vector<std::int64_t>{1000, 500, 300, 300}));

  spec.min_sentences = 0;
  spec.doc_sentences = 3;
  spec.probe_sentences = 10;
  const auto c = generate_languages(spec, 1);
  const auto counts = trainer::sentence_counts(group(c.pretrain));
  EXPECT_EQ(counts.at("s00"), 1000);
  EXPECT_EQ(counts.at("s03"), 125);
  EXPECT_EQ(c.sizes, size_profile(spec));
  for (const auto& d : c.pretrain) EXPECT_LE(corpus::count_sentences(d.text), 3);
  for (const auto& d : c.probe) {
    ASSERT_TRUE(d.topic.has_value());
    EXPECT_EQ(corpus::count_sentences(d.text), 1);
  }
}

TEST(Generator, Errors) {
  SyntheticLangSpec spec;
  spec.n_langs = 1;
  EXPECT_THROW(generate_languages(spec, 1), std::invalid_argument);
  spec.n_langs = 2;
  spec.lexicon_overlap = 1.5;
  EXPECT_THROW(generate_languages(spec, 1), std::invalid_argument);
}

TEST(Generator, FullOverlapSharesTheLexicon) {
  SyntheticLangSpec spec;
  spec.n_langs = 3;
  spec.lexicon_overlap = 1.0;
  spec.base_sentences = 5000;
  spec.size_decay = 1.0;
  const auto c = generate_languages(spec, 3);
  EXPECT_EQ(types_of(c.pretrain, "s00"), types_of(c.pretrain, "s01"));
  EXPECT_EQ(types_of(c.pretrain, "s00"), types_of(c.pretrain, "s02"));
}

TEST(Generator, ZeroOverlapSharesNothing) {
  SyntheticLangSpec spec;
  spec.n_langs = 2;
  spec.lexicon_overlap = 0.0;
  spec.base_sentences = 3000;
  const auto c = generate_languages(spec, 3);
  const auto a = types_of(c.pretrain, "s00");
  for (const auto& w : types_of(c.pretrain, "s01")) EXPECT_FALSE(a.contains(w)) << w;
}

TEST(Generator, PartialOverlapAndFamilies) {
  SyntheticLangSpec spec;
  spec.n_langs = 5;
  spec.lexicon_overlap = 0.2;
  spec.family_size = 2;
  spec.family_overlap = 0.5;
  spec.base_sentences = 4000;
  spec.size_decay = 1.0;
  const auto c = generate_languages(spec, 5);
  auto shared = [&](const std::string& x, const std::string& y) {
    const auto a = types_of(c.pretrain, x), b = types_of(c.pretrain, y);
    int n = 0;
    for (const auto& w : b) n += a.contains(w);
    return static_cast<double>(n) / static_cast<double>(b.size());
  };
  // s01 and s02 form a family; s00 belongs to none.
  EXPECT_GT(shared("s01", "s02"), shared("s00", "s02") + 0.2);
  EXPECT_NEAR(shared("s00", "s03"), shared("s00", "s01"), 0.15);
}

TEST(Generator, DeterministicAndPrefixStable) {
  SyntheticLangSpec spec;
  spec.n_langs = 3;
  spec.base_sentences = 200;
  const auto a = generate_languages(spec, 11);
  const auto b = generate_languages(spec, 11);
  ASSERT_EQ(a.pretrain.size(), b.pretrain.size());
  for (std::size_t i = 0; i < a.pretrain.size(); ++i) EXPECT_EQ(a.pretrain[i].text, b.pretrain[i].text);

  spec.n_langs = 6;
  const auto big = generate_languages(spec, 11);
  for (std::size_t i = 0; i < a.pretrain.size(); ++i) EXPECT_EQ(a.pretrain[i].text, big.pretrain[i].text);
  const auto other = generate_languages(spec, 12);
  EXPECT_NE(other.pretrain.front().text + other.pretrain[1].text, big.pretrain.front().text + big.pretrain[1].text);
}

TEST(Generator, LangIdSeparatesCipherLanguages) {
  SyntheticLangSpec spec;
  spec.n_langs = 5;
  spec.lexicon_overlap = 0.05;
  spec.base_sentences = 600;
  spec.size_decay = 1.0;
  spec.probe_sentences = 200;
  const auto c = generate_languages(spec, 21);
  std::vector<corpus::LabeledText> train;
  for (const auto& d : c.pretrain) train.push_back({d.text, d.lang});
  const auto model = corpus::LangIdModel::train(train, {});
  int correct = 0;
  for (const auto& d : c.probe) correct += model.identify(d.text).lang == d.lang;
  EXPECT_GE(static_cast<double>(correct) / static_cast<double>(c.probe.size()), 0.95);
}

// A tiny encoder pretrained on the first n languages of `c`.
struct Trained {
  tokenizer::UnigramVocab vocab;
  model::ModelParams<float> params;
};

Trained pretrain_small(const SyntheticCorpus& c, std::int64_t steps, std::uint64_t seed, int vocab_size = 600) {
  std::vector<std::string> texts;
  for (const auto& d : c.pretrain) texts.push_back(d.text);
  tokenizer::UnigramTrainerOptions topt;
  topt.vocab_size = static_cast<std::size_t>(vocab_size);
  Trained t{tokenizer::train_unigram(texts, topt), {}};
  trainer::PretrainOptions po;
  po.model = {1, 32, 2, 64, static_cast<int>(t.vocab.size()), 32, 0.0};
  po.batch_size = 16;
  po.seq_len = 32;
  po.schedule = {3e-3, steps / 10, steps};
  po.alpha = 1.0;
  po.seed = seed;
  if (steps > 0) {
    t.params = trainer::pretrain(t.vocab, group(c.pretrain), {}, po).params;
  } else {
    t.params = model::init_params<float>(po.model, seed);
  }
  return t;
}

SyntheticLangSpec probe_world(double overlap) {
  SyntheticLangSpec spec;
  spec.n_langs = 3;
  spec.lexicon_overlap = overlap;
  spec.topic_strength = 0.7;
  spec.base_sentences = 2000;
  spec.size_decay = 1.0;
  spec.doc_sentences = 4;
  spec.probe_sentences = 800;
  return spec;
}

TEST(Probe, InLanguageDominates) {
  const auto c = generate_languages(probe_world(0.3), 4);
  const auto labeled = group(c.probe);
  int wins = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto t = pretrain_small(c, 300, seed);
    ProbeOptions opt;
    opt.seed = seed;
    const auto r = probe_transfer(t.params, t.vocab, labeled, "s00", c.langs, opt);
    wins += r.accuracy.at("s00") >= r.accuracy.at("s01") && r.accuracy.at("s00") >= r.accuracy.at("s02");
  }
  EXPECT_GE(wins, 3);
}

TEST(Probe, RandomEncoderDoesNotTransferAcrossDisjointLexicons) {
  auto spec = probe_world(0.0);
  spec.n_langs = 6;
  spec.base_sentences = 500;
  const auto c = generate_languages(spec, 4);
  const auto labeled = group(c.probe);
  const std::vector<std::string> targets(c.langs.begin() + 1, c.langs.end());
  double sum = 0.0;
  int n = 0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto t = pretrain_small(c, 0, seed);
    ProbeOptions opt;
    opt.seed = seed;
    for (const auto& [lang, acc] : probe_transfer(t.params, t.vocab, labeled, "s00", targets, opt).accuracy) {
      sum += acc;
      ++n;
    }
  }
  EXPECT_NEAR(sum / n, 0.25, 0.05);
}

TEST(Probe, IdenticalLanguagesTransferFully) {
  auto spec = probe_world(1.0);
  spec.probe_sentences = 5000;
  const auto c = generate_languages(spec, 4);
  const auto t = pretrain_small(c, 200, 3);
  ProbeOptions opt;
  opt.seed = 5;
  const auto r = probe_transfer(t.params, t.vocab, group(c.probe), "s00", {"s00", "s01", "s02"}, opt);
  EXPECT_GT(r.accuracy.at("s00"), 0.5);
  EXPECT_NEAR(r.accuracy.at("s01"), r.accuracy.at("s00"), 0.02);
  EXPECT_NEAR(r.accuracy.at("s02"), r.accuracy.at("s00"), 0.02);
}

TEST(Probe, FrozenEncoderGroupsAndOmissions) {
  const auto c = generate_languages(probe_world(0.3), 4);
  const auto t = pretrain_small(c, 20, 1);
  const auto before = checkpoint::fingerprint(t.params);
  ProbeOptions opt;
  opt.hi_langs = {"s00", "s01"};
  opt.lo_langs = {"s02", "zz"};
  const auto r = probe_transfer(t.params, t.vocab, group(c.probe), "s00", {"s00", "s01", "s02", "zz"}, opt);
  EXPECT_EQ(checkpoint::fingerprint(t.params), before);
  EXPECT_EQ(r.omitted, std::vector<std::string>{"zz"});
  EXPECT_EQ(r.accuracy.size(), 3u);
  EXPECT_DOUBLE_EQ(r.hi_avg, (r.accuracy.at("s00") + r.accuracy.at("s01")) / 2);
  EXPECT_DOUBLE_EQ(r.lo_avg, r.accuracy.at("s02"));

  opt.n_train = 800;
  EXPECT_THROW(probe_transfer(t.params, t.vocab, group(c.probe), "s00", {"s00"}, opt), std::invalid_argument);
  EXPECT_THROW(probe_transfer(t.params, t.vocab, group(c.probe), "zz", {"s00"}, opt), std::invalid_argument);
}

TEST(Groups, SizeRank) {
  std::vector<std::string> hi, lo;
  size_rank_groups({"a", "b", "c", "d", "e"}, hi, lo);
  EXPECT_EQ(hi, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(lo, (std::vector<std::string>{"d", "e"}));
  size_rank_groups({"a", "b"}, hi, lo);
  EXPECT_EQ(hi, std::vector<std::string>{"a"});
  EXPECT_EQ(lo, std::vector<std::string>{"b"});
}

TEST(SolveWidth, Examples) {
  const model::TransformerConfig base{4, 128, 4, 512, 8000, 128, 0.0};
  const auto target = model::param_count(base);
  EXPECT_EQ(solve_width(target, base), 128);

  auto big = base;
  big.vocab = 32000;
  const int h = solve_width(target, big);
  EXPECT_LT(h, 128);
  EXPECT_EQ(h % 4, 0);
  const auto got = model::param_count(with_width(big, h));
  EXPECT_LE(got, target);
  EXPECT_GT(static_cast<double>(got), 0.98 * static_cast<double>(target));
  EXPECT_GT(model::param_count(with_width(big, h + 4)), target);

  EXPECT_THROW(solve_width(static_cast<std::int64_t>(32000) * 4, big), std::invalid_argument);
}

TEST(Fingerprint, IgnoresOnlyTheExcludedKey) {
  std::map<std::string, std::string> a{{"alpha", "0.3"}, {"hidden", "32"}};
  auto b = a;
  b["alpha"] = "1";
  EXPECT_NE(config_fingerprint(a), config_fingerprint(b));
  EXPECT_EQ(config_fingerprint(a, "alpha"), config_fingerprint(b, "alpha"));
  b["hidden"] = "64";
  EXPECT_NE(config_fingerprint(a, "alpha"), config_fingerprint(b, "alpha"));
  EXPECT_EQ(config_fingerprint(a).size(), 12u);
}

SweepConfig micro_config() {
  SweepConfig c;
  c.data.n_langs = 3;
  c.data.base_sentences = 300;
  c.data.probe_sentences = 60;
  c.n_langs = 3;
  c.model = {1, 16, 1, 32, 0, 32, 0.0};
  c.vocab_size = 200;
  c.batch_size = 4;
  c.total_steps = 4;
  c.tokenizer_docs = 500;
  c.probe_train = 30;
  c.seeds = {1, 2};
  return c;
}

TEST(Sweep, PointsDifferOnlyInTheSweptKey) {
  const auto curve = sweep_alpha({0.0, 0.5, 1.0}, micro_config());
  ASSERT_EQ(curve.points.size(), 3u);
  for (const auto& p : curve.points) {
    EXPECT_EQ(config_fingerprint(p.config, "alpha"), curve.fingerprint);
    EXPECT_EQ(p.runs.size(), 2u);
    EXPECT_EQ(p.hi.n, 2);
    for (const auto& [k, v] : p.config) {
      if (k != "alpha") EXPECT_EQ(v, curve.points.front().config.at(k)) << k;
    }
  }
  EXPECT_NE(curve.points[0].config_id, curve.points[1].config_id);
  EXPECT_THROW(sweep_alpha({0.0, 1.0}, micro_config()), std::invalid_argument);
  EXPECT_THROW(sweep_alpha({-0.1, 0.5, 1.0}, micro_config()), std::invalid_argument);
  EXPECT_THROW(sweep_alpha({0.5, 0.3, 1.0}, micro_config()), std::invalid_argument);
}

TEST(Sweep, LanguagesAndVocab) {
  auto cfg = micro_config();
  const auto k = sweep_languages({2, 3}, cfg);
  EXPECT_EQ(k.points.size(), 2u);
  EXPECT_EQ(k.points[1].per_language.size(), 2u);  // probed on the languages of k=2
  EXPECT_THROW(sweep_languages({2, 4}, cfg), std::invalid_argument);
  EXPECT_THROW(sweep_languages({1, 3}, cfg), std::invalid_argument);

  const std::int64_t budget = 80000;
  const auto v = sweep_vocab({150, 300}, budget, cfg);
  for (const auto& p : v.points) {
    EXPECT_LE(p.param_count, budget);
    EXPECT_GT(static_cast<double>(p.param_count), 0.98 * static_cast<double>(budget));
  }
  EXPECT_EQ(sweep_vocab({150}, budget, cfg).points.size(), 1u);
}

TEST(Sweep, MeanStd) {
  const auto m = mean_std({1.0, 2.0, 3.0});
  EXPECT_DOUBLE_EQ(m.mean, 2.0);
  EXPECT_DOUBLE_EQ(m.stdev, 1.0);
  EXPECT_EQ(m.n, 3);
  EXPECT_DOUBLE_EQ(mean_std({4.0}).stdev, 0.0);
}

SweepCurve fake_curve() {
  SweepCurve c;
  c.variable = "alpha";
  c.fingerprint = "0123456789ab";
  for (double x : {0.1, 0.5, 1.0}) {
    SweepPoint p;
    p.x = x;
    p.hi_langs = {"s00"};
    p.lo_langs = {"s02"};
    for (const char* l : {"s00", "s01", "s02"}) p.per_language[l] = {0.5 + x / 4, 0.01, 3};
    p.hi = p.lo = p.overall = {0.5, 0.02, 3};
    c.points.push_back(p);
  }
  return c;
}

TEST(Report, CsvAndFiles) {
  std::ostringstream csv;
  write_curve_csv(csv, fake_curve());
  std::istringstream lines(csv.str());
  std::string line;
  int n = 0;
  std::getline(lines, line);
  EXPECT_EQ(line, "x,lang,group,mean_acc,stdev_acc,n_seeds");
  while (std::getline(lines, line)) ++n;
  EXPECT_EQ(n, 3 * 3);

  std::istringstream back(csv.str());
  const auto round = read_curve_csv(back, "alpha", "0123456789ab");
  ASSERT_EQ(round.points.size(), 3u);
  EXPECT_NEAR(round.points[2].per_language.at("s01").mean, 0.75, 1e-9);

  const auto dir = std::filesystem::temp_directory_path() / "babelforge_report_test";
  std::filesystem::remove_all(dir);
  const auto files = emit_report({fake_curve()}, dir.string());
  ASSERT_EQ(files.size(), 2u);
  EXPECT_EQ(std::filesystem::path(files[0]).filename(), "alpha_0123456789ab.csv");
  auto slurp = [](const std::string& p) {
    std::ifstream in(p);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  const std::string first_csv = slurp(files[0]), first_svg = slurp(files[1]);
  emit_report({fake_curve()}, dir.string());
  EXPECT_EQ(slurp(files[0]), first_csv);
  EXPECT_EQ(slurp(files[1]), first_svg);
  EXPECT_NE(first_svg.find("<svg"), std::string::npos);
  std::filesystem::remove_all(dir);

  EXPECT_THROW(emit_report({}, dir.string()), std::invalid_argument);
  EXPECT_THROW(emit_report({fake_curve()}, "/proc/babelforge/nope"), std::runtime_error);
}

}  // namespace
}  // namespace babelforge::xfer
