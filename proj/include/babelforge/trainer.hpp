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

#ifndef BABELFORGE_TRAINER_HPP_
#define BABELFORGE_TRAINER_HPP_

#include <cmath>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "babelforge/corpus.hpp"
#include "babelforge/model.hpp"
#include "babelforge/run_config.hpp"
#include "babelforge/sampler.hpp"
#include "babelforge/unigram.hpp"

namespace babelforge::trainer {

// Linear warmup from 0 to peak_lr over warmup_steps, then linear decay to 0
// at total_steps. at(t) is the rate used by update number t (1-based).
struct LrSchedule {
  double peak_lr = 5e-4;
  std::int64_t warmup_steps = 0;
  std::int64_t total_steps = 1;

  double at(std::int64_t step) const;
};

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-6;
};

template <typename Scalar>
struct TrainState {
  std::int64_t step = 0;
  model::ModelParams<Scalar> params;
  model::ModelParams<Scalar> adam_m;
  model::ModelParams<Scalar> adam_v;
  LrSchedule schedule;
  AdamOptions adam;
  std::uint64_t rng_seed = 0;
  std::map<std::string, int> epochs;
};

template <typename Scalar>
TrainState<Scalar> make_train_state(model::ModelParams<Scalar> params, const LrSchedule& schedule,
                                    std::uint64_t seed = 0, const AdamOptions& adam = {}) {
  TrainState<Scalar> s;
  s.adam_m = model::zero_params<Scalar>(params.config);
  s.adam_v = model::zero_params<Scalar>(params.config);
  s.params = std::move(params);
  s.schedule = schedule;
  s.adam = adam;
  s.rng_seed = seed;
  return s;
}

// One bias-corrected Adam update with the scheduled learning rate. Throws,
// naming the tensor, if a gradient is not finite. Returns the rate used.
template <typename Scalar>
double adam_step(TrainState<Scalar>& state, model::ModelParams<Scalar>& grads) {
  auto g = model::named_tensors(grads);
  for (const auto& nt : g) {
    if (!nt.tensor->allFinite()) throw std::runtime_error("adam_step: non-finite gradient in " + nt.name);
  }
  auto p = model::named_tensors(state.params);
  auto m = model::named_tensors(state.adam_m);
  auto v = model::named_tensors(state.adam_v);
  if (p.size() != g.size()) throw std::invalid_argument("adam_step: gradient structure mismatch");
  const std::int64_t t = state.step + 1;
  const double lr = state.schedule.at(t);
  const double b1 = state.adam.beta1, b2 = state.adam.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i].tensor->rows() != g[i].tensor->rows() || p[i].tensor->cols() != g[i].tensor->cols()) {
      throw std::invalid_argument("adam_step: shape mismatch for " + p[i].name);
    }
    auto& mt = *m[i].tensor;
    auto& vt = *v[i].tensor;
    const auto& gt = *g[i].tensor;
    mt = Scalar(b1) * mt + Scalar(1.0 - b1) * gt;
    vt = Scalar(b2) * vt + Scalar(1.0 - b2) * gt.cwiseProduct(gt);
    p[i].tensor->array() -= Scalar(lr) * (mt.array() / Scalar(c1)) /
                            ((vt.array() / Scalar(c2)).sqrt() + Scalar(state.adam.eps));
  }
  state.step = t;
  return lr;
}

// Scales gradients so that their global L2 norm is at most max_norm; returns
// the norm before scaling.
template <typename Scalar>
double clip_grad_norm(model::ModelParams<Scalar>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& nt : model::named_tensors(grads)) sq += static_cast<double>(nt.tensor->squaredNorm());
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const Scalar s = Scalar(max_norm / norm);
    for (auto& nt : model::named_tensors(grads)) *nt.tensor *= s;
  }
  return norm;
}

struct LanguageEval {
  double loss = 0.0;
  double accuracy = 0.0;
  std::int64_t n_predictions = 0;
};

struct EvalReport {
  std::int64_t step = 0;
  std::map<std::string, LanguageEval> per_language;
  double aggregate_loss = 0.0;  // q-weighted over the languages present
  std::vector<std::string> omitted;
};

struct EvalOptions {
  std::uint64_t seed = 12345;
  double mask_prob = 0.15;
  int batch_size = 32;
  int max_rows = 256;
};

// Deterministic masked-token evaluation. Every language uses the same masking
// seed, so metrics never depend on the language code.
EvalReport evaluate_mlm(const model::ModelParams<float>& params, const std::map<std::string, sampler::LanguageStream>& heldout,
                        const sampler::SamplingPolicy& policy, const tokenizer::SpecialIds& specials,
                        const EvalOptions& options, std::int64_t step = 0);

// Documents whose source_id hashes into the first `permille` of 1000 buckets.
bool is_heldout(const std::string& source_id, int permille = 20);

struct PretrainOptions {
  model::TransformerConfig model;
  int batch_size = 32;
  int seq_len = 64;
  double mask_prob = 0.15;
  double alpha = 0.3;
  LrSchedule schedule;
  AdamOptions adam;
  double clip_norm = 1.0;
  std::int64_t eval_interval = 0;  // 0 disables periodic evaluation
  std::int64_t ckpt_interval = 0;  // 0 disables periodic checkpoints
  std::string out_dir;             // empty: keep everything in memory
  std::uint64_t seed = 1;
  std::uint64_t init_seed = 0;     // 0: derived from seed
  EvalOptions eval;
  std::map<std::string, std::string> echo;  // extra header lines for the metrics log
};

struct MetricsRow {
  std::int64_t step = 0;
  std::string lang;
  std::string split;
  double loss = 0.0;
  double acc = 0.0;
  double lr = 0.0;
  std::int64_t tokens_seen = 0;
};

struct PretrainResult {
  model::ModelParams<float> params;
  std::vector<MetricsRow> metrics;
  std::optional<EvalReport> final_eval;
  std::vector<double> train_losses;
  std::map<std::string, int> epochs;
};

class TrainingAborted : public std::runtime_error {
 public:
  TrainingAborted(const std::string& what, std::int64_t step) : std::runtime_error(what), step_(step) {}
  std::int64_t step() const { return step_; }

 private:
  std::int64_t step_;
};

// Sentence counts per language, the n_i of the sampling policy.
std::map<std::string, std::int64_t> sentence_counts(const std::map<std::string, std::vector<corpus::Document>>& docs);

// build_batch -> forward -> mlm_loss -> backward -> clip -> adam_step, for
// exactly schedule.total_steps updates. Never stops early. Throws
// TrainingAborted on a non-finite loss; checkpoints already written are kept.
PretrainResult pretrain(const tokenizer::UnigramVocab& vocab,
                        const std::map<std::string, std::vector<corpus::Document>>& train_docs,
                        const std::map<std::string, std::vector<corpus::Document>>& heldout_docs,
                        const PretrainOptions& options);

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows,
                       const std::map<std::string, std::string>& header = {});

// Reads the pretraining keys (model shape, optimizer, batching) from a flat config.
PretrainOptions pretrain_options_from_config(KeyValueConfig& cfg, int vocab_size);

}  // namespace babelforge::trainer

#endif  // BABELFORGE_TRAINER_HPP_
