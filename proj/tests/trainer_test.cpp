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

#include "babelforge/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <sstream>

#include <gtest/gtest.h>

#include "babelforge/checkpoint.hpp"
#include "fixtures.hpp"
#include "gradcheck.hpp"

namespace babelforge::trainer {
namespace {

using model::Matrix;
using model::ModelParams;
using model::TransformerConfig;

TransformerConfig tiny() { return {1, 4, 1, 8, 10, 4, 0.0}; }

TEST(LrScheduleTest, Boundaries) {
  const LrSchedule s{1e-3, 10, 100};
  EXPECT_EQ(s.at(0), 0.0);
  EXPECT_NEAR(s.at(5), 5e-4, 1e-15);
  EXPECT_NEAR(s.at(10), 1e-3, 1e-15);
  EXPECT_NEAR(s.at(55), 5e-4, 1e-15);
  EXPECT_EQ(s.at(100), 0.0);
  const LrSchedule flat{1e-3, 0, 100};
  EXPECT_NEAR(flat.at(1), 1e-3 * 99.0 / 100.0, 1e-15);
}

TEST(AdamTest, OneStepByHand) {
  auto state = make_train_state(model::zero_params<double>(tiny()), LrSchedule{0.01, 0, 1000000});
  auto grads = model::zero_params<double>(tiny());
  grads.output_bias(0, 3) = 1.0;
  const double lr = adam_step(state, grads);
  EXPECT_EQ(state.step, 1);
  // m = 0.1, v = 0.02; corrected m_hat = 1, v_hat = 1.
  EXPECT_NEAR(state.adam_m.output_bias(0, 3), 0.1, 1e-15);
  EXPECT_NEAR(state.adam_v.output_bias(0, 3), 0.02, 1e-15);
  EXPECT_NEAR(state.params.output_bias(0, 3), -lr * 1.0 / (1.0 + 1e-6), 1e-15);
  EXPECT_EQ(state.params.output_bias(0, 2), 0.0);
}

TEST(AdamTest, ZeroGradientsOnlyDecayMoments) {
  auto state = make_train_state(model::init_params<double>(tiny(), 1), LrSchedule{0.01, 0, 1000});
  auto grads = model::zero_params<double>(tiny());
  grads.head_dense.setConstant(0.5);
  adam_step(state, grads);
  const auto m = state.adam_m.head_dense, v = state.adam_v.head_dense;
  const auto params = state.params;
  grads = model::zero_params<double>(tiny());
  adam_step(state, grads);
  // With g = 0 the update is lr * m_hat / (sqrt(v_hat) + eps); only tensors
  // with zero moments stay put.
  EXPECT_TRUE(state.adam_m.head_dense.isApprox(0.9 * m));
  EXPECT_TRUE(state.adam_v.head_dense.isApprox(0.98 * v));
  EXPECT_EQ(state.params.token_embedding, params.token_embedding);
  EXPECT_EQ(state.params.layers[0].query, params.layers[0].query);
}

TEST(AdamTest, UpdatesExactlyParamCountScalars) {
  const TransformerConfig cfg{2, 8, 2, 16, 17, 8, 0.0};
  auto state = make_train_state(model::init_params<double>(cfg, 2), LrSchedule{0.01, 0, 100});
  const auto before = state.params;
  auto grads = model::zero_params<double>(cfg);
  for (auto& nt : model::named_tensors(grads)) nt.tensor->setOnes();
  adam_step(state, grads);
  std::int64_t changed = 0;
  const auto a = model::named_tensors(before);
  const auto b = model::named_tensors(std::as_const(state.params));
  for (std::size_t i = 0; i < a.size(); ++i) changed += (a[i].second->array() != b[i].second->array()).count();
  EXPECT_EQ(changed, model::param_count(cfg));
}

TEST(AdamTest, NonFiniteGradientNamesTensor) {
  auto state = make_train_state(model::zero_params<double>(tiny()), LrSchedule{});
  auto grads = model::zero_params<double>(tiny());
  grads.layers[0].ffn_in(1, 1) = std::nan("");
  try {
    adam_step(state, grads);
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("layer0.ffn_in"), std::string::npos);
  }
  EXPECT_EQ(state.step, 0);
}

TEST(ClipTest, GlobalNorm) {
  auto grads = model::zero_params<double>(tiny());
  grads.output_bias(0, 0) = 3.0;
  grads.head_dense(0, 0) = 4.0;
  EXPECT_NEAR(clip_grad_norm(grads, 1.0), 5.0, 1e-12);
  EXPECT_NEAR(grads.output_bias(0, 0), 0.6, 1e-12);
  EXPECT_NEAR(clip_grad_norm(grads, 1.0), 1.0, 1e-12);
}

// Memorize one fixed batch. Returns the loss trace.
std::vector<double> overfit_losses(std::uint64_t seed, int steps) {
  const TransformerConfig cfg{2, 32, 2, 64, 40, 16, 0.0};
  const auto batch = testing::random_batch(cfg, 4, 16, seed);
  auto state = make_train_state(model::init_params<float>(cfg, seed), LrSchedule{1e-2, 20, steps});
  std::vector<double> losses;
  for (int s = 0; s < steps; ++s) {
    auto bw = model::backward(state.params, batch);
    losses.push_back(bw.loss);
    clip_grad_norm(bw.grads, 1.0);
    adam_step(state, bw.grads);
  }
  const auto f = model::forward(state.params, batch);
  losses.push_back(model::mlm_loss(f.logits, f.targets).loss);
  return losses;
}

TEST(TrainingTest, OverfitsOneBatch) {
  const auto losses = overfit_losses(3, 500);
  EXPECT_NEAR(losses.front(), std::log(40.0), 0.1 * std::log(40.0));
  EXPECT_LT(losses.back(), 0.05);
  EXPECT_LT(losses.back() * 10.0, losses.front());
  EXPECT_EQ(losses, overfit_losses(3, 500));
}

class PretrainTest : public ::testing::Test {
 protected:
  void SetUp() override {
    Rng rng(31);
    std::vector<std::string> texts;
    for (int i = 0; i < 300; ++i) {
      corpus::Document d;
      d.text = testing::english_like_document(rng, 2);
      d.lang = i % 3 ? "en" : "xx";
      d.source_id = d.lang + std::to_string(i);
      texts.push_back(d.text);
      (i % 10 == 0 ? heldout_ : train_)[d.lang].push_back(d);
    }
    tokenizer::UnigramTrainerOptions topt;
    topt.vocab_size = 120;
    vocab_ = tokenizer::train_unigram(texts, topt);

    options_.model = {1, 16, 2, 32, 0, 32, 0.0};
    options_.batch_size = 8;
    options_.seq_len = 32;
    options_.schedule = {3e-3, 10, 120};
    options_.eval.max_rows = 64;
  }

  std::map<std::string, sampler::LanguageStream> heldout_streams(const std::map<std::string, std::vector<corpus::Document>>& docs) const {
    std::map<std::string, sampler::LanguageStream> out;
    for (const auto& [lang, d] : docs) {
      out.emplace(lang, sampler::LanguageStream::from_documents(d, vocab_, options_.seq_len, options_.eval.seed));
    }
    return out;
  }

  std::map<std::string, std::vector<corpus::Document>> train_, heldout_;
  tokenizer::UnigramVocab vocab_;
  PretrainOptions options_;
};

TEST_F(PretrainTest, DeterministicAndLearns) {
  const auto a = pretrain(vocab_, train_, heldout_, options_);
  const auto b = pretrain(vocab_, train_, heldout_, options_);
  std::ostringstream la, lb;
  write_metrics_csv(la, a.metrics);
  write_metrics_csv(lb, b.metrics);
  EXPECT_EQ(la.str(), lb.str());
  EXPECT_EQ(a.train_losses.size(), 120u);
  EXPECT_NEAR(a.train_losses.front(), std::log(120.0), 0.1 * std::log(120.0));

  // Trained beats random init on the same held-out data.
  const auto policy = sampler::smoothed_distribution(sentence_counts(train_), options_.alpha);
  const auto streams = heldout_streams(heldout_);
  auto cfg = options_.model;
  cfg.vocab = static_cast<int>(vocab_.size());
  const auto init = evaluate_mlm(model::init_params<float>(cfg, 99), streams, policy, vocab_.specials(), options_.eval);
  const auto trained = evaluate_mlm(a.params, streams, policy, vocab_.specials(), options_.eval);
  for (const auto& [lang, e] : trained.per_language) {
    EXPECT_LT(e.loss, init.per_language.at(lang).loss) << lang;
    EXPECT_GE(e.accuracy, 0.0);
    EXPECT_LE(e.accuracy, 1.0);
  }
}

TEST_F(PretrainTest, EvaluationProperties) {
  auto cfg = options_.model;
  cfg.vocab = static_cast<int>(vocab_.size());
  const auto params = model::init_params<float>(cfg, 5);
  auto docs = heldout_;
  docs["copy"] = docs["en"];
  docs["empty"] = {};
  const auto counts = std::map<std::string, std::int64_t>{{"en", 50}, {"xx", 7}, {"copy", 12}, {"empty", 3}};
  const auto policy = sampler::smoothed_distribution(counts, 0.5);
  const auto rep = evaluate_mlm(params, heldout_streams(docs), policy, vocab_.specials(), options_.eval);

  EXPECT_EQ(rep.omitted, std::vector<std::string>{"empty"});
  EXPECT_EQ(rep.per_language.at("copy").loss, rep.per_language.at("en").loss);
  EXPECT_EQ(rep.per_language.at("copy").accuracy, rep.per_language.at("en").accuracy);
  double num = 0.0, den = 0.0;
  for (const auto& [lang, e] : rep.per_language) {
    EXPECT_GE(e.loss, 0.0);
    num += policy.q_of(lang) * e.loss;
    den += policy.q_of(lang);
  }
  EXPECT_NEAR(rep.aggregate_loss, num / den, 1e-6);
}

TEST_F(PretrainTest, CheckpointRoundTripIsBitwise) {
  const auto dir = std::filesystem::temp_directory_path() / "babelforge_trainer_ckpt";
  std::filesystem::remove_all(dir);
  auto opt = options_;
  opt.schedule.total_steps = 20;
  opt.out_dir = dir.string();
  const auto run = pretrain(vocab_, train_, heldout_, opt);
  const auto ck = checkpoint::load((dir / "checkpoint").string());
  EXPECT_EQ(ck.step, 20);
  EXPECT_EQ(checkpoint::fingerprint(ck.params), checkpoint::fingerprint(run.params));

  const auto policy = sampler::smoothed_distribution(sentence_counts(train_), opt.alpha);
  const auto streams = heldout_streams(heldout_);
  const auto a = evaluate_mlm(run.params, streams, policy, vocab_.specials(), opt.eval);
  const auto b = evaluate_mlm(ck.params, streams, policy, vocab_.specials(), opt.eval);
  EXPECT_EQ(a.aggregate_loss, b.aggregate_loss);
  for (const auto& [lang, e] : a.per_language) {
    EXPECT_EQ(e.loss, b.per_language.at(lang).loss);
    EXPECT_EQ(e.accuracy, b.per_language.at(lang).accuracy);
  }
  EXPECT_TRUE(std::filesystem::exists(dir / "metrics.csv"));
  std::filesystem::remove_all(dir);
}

TEST_F(PretrainTest, DivergenceAbortsAndKeepsLastCheckpoint) {
  const auto dir = std::filesystem::temp_directory_path() / "babelforge_trainer_abort";
  std::filesystem::remove_all(dir);
  auto opt = options_;
  opt.out_dir = dir.string();
  opt.ckpt_interval = 1;
  opt.clip_norm = 0.0;
  opt.schedule = {1e30, 0, 50};
  EXPECT_THROW(pretrain(vocab_, train_, heldout_, opt), TrainingAborted);
  EXPECT_TRUE(std::filesystem::exists(dir / "checkpoint" / "manifest.txt"));
  std::filesystem::remove_all(dir);
}

// Same token budget: 8x the batch at 1/8 the steps, learning rate scaled by
// sqrt(8), lands within 0.05 nats of the small-batch held-out loss.
TEST_F(PretrainTest, LargerBatchAtEqualTokensKeepsHeldoutLoss) {
  auto run = [&](int batch, std::int64_t steps, double lr) {
    auto opt = options_;
    opt.batch_size = batch;
    opt.schedule = {lr, steps / 10, steps};
    return pretrain(vocab_, train_, heldout_, opt).final_eval->aggregate_loss;
  };
  const double small = run(4, 800, 2e-3);
  const double large = run(32, 100, 2e-3 * std::sqrt(8.0));
  EXPECT_LE(large, small + 0.05);
}

TEST(HeldoutSplitTest, AboutTwoPercent) {
  int n = 0;
  for (int i = 0; i < 100000; ++i) n += is_heldout("doc-" + std::to_string(i));
  EXPECT_NEAR(n / 100000.0, 0.02, 0.003);
  EXPECT_EQ(is_heldout("abc"), is_heldout("abc"));
}

}  // namespace
}  // namespace babelforge::trainer
