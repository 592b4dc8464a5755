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

#ifndef BABELFORGE_SWEEP_HPP_
#define BABELFORGE_SWEEP_HPP_

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "babelforge/model.hpp"
#include "babelforge/probe.hpp"
#include "babelforge/run_config.hpp"
#include "babelforge/synthetic.hpp"

namespace babelforge::xfer {

// The default synthetic grid: 20 languages in families of six, one large
// language and a geometric tail.
SyntheticLangSpec default_sweep_languages();

// Everything that defines one pretrain-and-probe run apart from the seed.
// The defaults are the calibrated desk-scale setting.
struct SweepConfig {
  SyntheticLangSpec data = default_sweep_languages();
  std::uint64_t data_seed = 7;
  int n_langs = 7;  // languages used for pretraining (the first n)
  model::TransformerConfig model{2, 32, 2, 64, 0, 32, 0.0};
  int vocab_size = 2000;  // tokenizer size, specials included
  int seq_len = 32;
  int batch_size = 32;
  std::int64_t total_steps = 8000;
  double peak_lr = 2e-3;
  double warmup_fraction = 0.1;
  double alpha = 0.3;
  double mask_prob = 0.15;
  int tokenizer_docs = 20000;
  int probe_train = 400;
  // When positive, the hidden width of each run is solve_width(param_budget)
  // for the trained tokenizer's size instead of model.hidden.
  std::int64_t param_budget = 0;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  int jobs = 1;
  std::function<void(const std::string&)> progress;  // not part of the config identity

  std::map<std::string, std::string> to_map() const;
  static SweepConfig from_config(KeyValueConfig& cfg);
};

struct MeanStd {
  double mean = 0.0;
  double stdev = 0.0;  // sample standard deviation (n - 1)
  int n = 0;
};
MeanStd mean_std(const std::vector<double>& values);

struct SweepPoint {
  double x = 0.0;
  std::map<std::string, std::string> config;  // full effective config of this point
  std::string config_id;
  std::vector<ProbeResult> runs;  // one per seed
  std::map<std::string, MeanStd> per_language;
  std::vector<std::string> hi_langs, lo_langs;
  MeanStd hi, lo, overall;
  std::int64_t param_count = 0;
};

struct SweepCurve {
  std::string variable;
  std::vector<SweepPoint> points;
  std::string fingerprint;  // hash of the config without the swept key
};

// Which languages to probe and how to group them.
struct EvalLanguages {
  std::vector<std::string> langs;
  std::vector<std::string> hi, lo;
};

// Hex FNV-1a of the sorted key=value lines, skipping `excluded_key`.
std::string config_fingerprint(const std::map<std::string, std::string>& config, const std::string& excluded_key = "");

// Tokenizer training text: per language, a seeded random subset of its
// documents sized by the alpha-smoothed share of `total` (at least one).
std::vector<std::string> tokenizer_sample(const std::map<std::string, std::vector<corpus::Document>>& docs,
                                          double alpha, int total, std::uint64_t seed);

// One configuration over every seed: generate, train the tokenizer on an
// alpha-smoothed sample, pretrain, probe from the largest language.
SweepPoint run_point(const SweepConfig& cfg, const EvalLanguages& eval, double x = 0.0);

// Languages of the first k synthetic languages, grouped by size rank.
EvalLanguages default_eval_languages(int k);

// Pretrains on the first k languages for each k. The probed languages are
// those of the smallest k, so every point is measured on the same set.
SweepCurve sweep_languages(const std::vector<int>& k_values, const SweepConfig& cfg);

SweepCurve sweep_alpha(const std::vector<double>& alpha_values, const SweepConfig& cfg);

// Largest H (a multiple of the head count) whose param_count fits the target,
// with the FFN width scaled by the template's ffn / hidden ratio.
int solve_width(std::int64_t target_params, const model::TransformerConfig& templ);
model::TransformerConfig with_width(const model::TransformerConfig& templ, int hidden);

// Every point keeps param_count within the budget; H comes from solve_width
// for the tokenizer's actual size.
SweepCurve sweep_vocab(const std::vector<int>& vocab_values, std::int64_t param_budget, const SweepConfig& cfg);

}  // namespace babelforge::xfer

#endif  // BABELFORGE_SWEEP_HPP_
