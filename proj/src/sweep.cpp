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

#include "babelforge/sweep.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <future>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "babelforge/rng.hpp"
#include "babelforge/sampler.hpp"
#include "babelforge/trainer.hpp"
#include "babelforge/unigram.hpp"

namespace babelforge::xfer {

namespace {

void report(const SweepConfig& cfg, const std::string& line) {
  if (cfg.progress) cfg.progress(line);
}

std::map<std::string, std::vector<corpus::Document>> by_lang(const std::vector<corpus::Document>& docs,
                                                             const std::vector<std::string>& langs) {
  std::map<std::string, std::vector<corpus::Document>> out;
  for (const auto& l : langs) out[l];
  for (const auto& d : docs) {
    const auto it = out.find(d.lang);
    if (it != out.end()) it->second.push_back(d);
  }
  return out;
}

}  // namespace

std::vector<std::string> tokenizer_sample(const std::map<std::string, std::vector<corpus::Document>>& docs,
                                          double alpha, int total, std::uint64_t seed) {
  const auto policy = sampler::smoothed_distribution(trainer::sentence_counts(docs), alpha);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < policy.langs.size(); ++i) {
    const auto& d = docs.at(policy.langs[i]);
    const auto quota = std::min<std::size_t>(
        d.size(), static_cast<std::size_t>(std::llround(policy.q[i] * static_cast<double>(total))));
    std::vector<std::size_t> idx(d.size());
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng = Rng(seed).split("tokenizer:" + policy.langs[i]);
    rng.shuffle(std::span<std::size_t>(idx));
    for (std::size_t j = 0; j < std::max<std::size_t>(quota, 1); ++j) out.push_back(d[idx[j]].text);
  }
  return out;
}

namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

void check_increasing(const std::vector<double>& xs) {
  if (xs.empty()) throw std::invalid_argument("sweep: no values to sweep");
  for (std::size_t i = 1; i < xs.size(); ++i) {
    if (!(xs[i] > xs[i - 1])) throw std::invalid_argument("sweep: swept values must be strictly increasing");
  }
}

}  // namespace

SyntheticLangSpec default_sweep_languages() {
  SyntheticLangSpec s;
  s.n_langs = 20;
  s.topic_words = 60;
  s.generic_words = 120;
  s.topic_strength = 0.7;
  s.lexicon_overlap = 0.2;
  s.family_size = 6;
  s.family_overlap = 0.8;
  s.base_sentences = 40000;
  s.size_decay = 0.5;
  s.min_sentences = 2500;
  s.probe_sentences = 1000;
  s.doc_sentences = 4;
  return s;
}

std::map<std::string, std::string> SweepConfig::to_map() const {
  auto m = data.to_map("data.");
  m["data_seed"] = std::to_string(data_seed);
  m["n_langs"] = std::to_string(n_langs);
  m["layers"] = std::to_string(model.layers);
  m["hidden"] = std::to_string(model.hidden);
  m["heads"] = std::to_string(model.heads);
  m["ffn"] = std::to_string(model.ffn);
  m["dropout"] = format_double(model.dropout);
  m["vocab_size"] = std::to_string(vocab_size);
  m["seq_len"] = std::to_string(seq_len);
  m["batch_size"] = std::to_string(batch_size);
  m["total_steps"] = std::to_string(total_steps);
  m["peak_lr"] = format_double(peak_lr);
  m["warmup_fraction"] = format_double(warmup_fraction);
  m["alpha"] = format_double(alpha);
  m["mask_prob"] = format_double(mask_prob);
  m["tokenizer_docs"] = std::to_string(tokenizer_docs);
  m["probe_train"] = std::to_string(probe_train);
  m["param_budget"] = std::to_string(param_budget);
  std::string seeds_str;
  for (auto s : seeds) seeds_str += (seeds_str.empty() ? "" : ",") + std::to_string(s);
  m["seeds"] = seeds_str;
  return m;
}

SweepConfig SweepConfig::from_config(KeyValueConfig& cfg) {
  SweepConfig c;
  c.data = SyntheticLangSpec::from_config(cfg, "data.", c.data);
  c.data_seed = static_cast<std::uint64_t>(cfg.get_int("data_seed", static_cast<std::int64_t>(c.data_seed)));
  c.n_langs = static_cast<int>(cfg.get_int("n_langs", c.n_langs));
  c.model.layers = static_cast<int>(cfg.get_int("layers", c.model.layers));
  c.model.hidden = static_cast<int>(cfg.get_int("hidden", c.model.hidden));
  c.model.heads = static_cast<int>(cfg.get_int("heads", c.model.heads));
  c.model.ffn = static_cast<int>(cfg.get_int("ffn", 2 * c.model.hidden));
  c.model.dropout = cfg.get_double("dropout", c.model.dropout);
  c.vocab_size = static_cast<int>(cfg.get_int("vocab_size", c.vocab_size));
  c.seq_len = static_cast<int>(cfg.get_int("seq_len", c.seq_len));
  c.batch_size = static_cast<int>(cfg.get_int("batch_size", c.batch_size));
  c.total_steps = cfg.get_int("total_steps", c.total_steps);
  c.peak_lr = cfg.get_double("peak_lr", c.peak_lr);
  c.warmup_fraction = cfg.get_double("warmup_fraction", c.warmup_fraction);
  c.alpha = cfg.get_double("alpha", c.alpha);
  c.mask_prob = cfg.get_double("mask_prob", c.mask_prob);
  c.tokenizer_docs = static_cast<int>(cfg.get_int("tokenizer_docs", c.tokenizer_docs));
  c.probe_train = static_cast<int>(cfg.get_int("probe_train", c.probe_train));
  c.param_budget = cfg.get_int("param_budget", c.param_budget);
  c.seeds.clear();
  for (auto s : cfg.get_ints("seeds", {1, 2, 3})) c.seeds.push_back(static_cast<std::uint64_t>(s));
  c.model.max_positions = c.seq_len;
  return c;
}

MeanStd mean_std(const std::vector<double>& v) {
  MeanStd r;
  r.n = static_cast<int>(v.size());
  if (v.empty()) return r;
  r.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - r.mean) * (x - r.mean);
    r.stdev = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return r;
}

std::string config_fingerprint(const std::map<std::string, std::string>& config, const std::string& excluded_key) {
  std::string lines;
  for (const auto& [k, v] : config) {
    if (k == excluded_key) continue;
    lines += k + "=" + v + "\n";
  }
  return hex64(fnv1a(lines)).substr(0, 12);
}

EvalLanguages default_eval_languages(int k) {
  EvalLanguages e;
  for (int i = 0; i < k; ++i) e.langs.push_back(lang_code(i));
  size_rank_groups(e.langs, e.hi, e.lo);
  return e;
}

model::TransformerConfig with_width(const model::TransformerConfig& templ, int hidden) {
  model::TransformerConfig c = templ;
  const double ratio = static_cast<double>(templ.ffn) / static_cast<double>(templ.hidden);
  c.hidden = hidden;
  c.ffn = std::max(hidden, static_cast<int>(std::lround(ratio * hidden)));
  return c;
}

int solve_width(std::int64_t target_params, const model::TransformerConfig& templ) {
  if (templ.heads < 1) throw std::invalid_argument("solve_width: heads must be positive");
  int best = 0;
  for (int h = templ.heads;; h += templ.heads) {
    if (model::param_count(with_width(templ, h)) > target_params) break;
    best = h;
  }
  if (best == 0) {
    throw std::invalid_argument("solve_width: no feasible width for " + std::to_string(target_params) + " parameters");
  }
  return best;
}

SweepPoint run_point(const SweepConfig& cfg, const EvalLanguages& eval, double x) {
  if (cfg.seeds.empty()) throw std::invalid_argument("run_point: no seeds");
  if (cfg.n_langs < 1 || cfg.n_langs > cfg.data.n_langs) {
    throw std::invalid_argument("run_point: n_langs " + std::to_string(cfg.n_langs) + " exceeds the " +
                                std::to_string(cfg.data.n_langs) + " generated languages");
  }
  const SyntheticCorpus corpus = generate_languages(cfg.data, cfg.data_seed);
  const std::vector<std::string> train_langs(corpus.langs.begin(), corpus.langs.begin() + cfg.n_langs);
  const auto train_docs = by_lang(corpus.pretrain, train_langs);
  const auto labeled = by_lang(corpus.probe, eval.langs);

  SweepPoint pt;
  pt.x = x;
  pt.config = cfg.to_map();
  pt.config_id = config_fingerprint(pt.config);
  pt.hi_langs = eval.hi;
  pt.lo_langs = eval.lo;

  tokenizer::UnigramTrainerOptions topt;
  topt.vocab_size = static_cast<std::size_t>(cfg.vocab_size);
  const auto vocab =
      tokenizer::train_unigram(tokenizer_sample(train_docs, cfg.alpha, cfg.tokenizer_docs, cfg.data_seed), topt);

  model::TransformerConfig mc = cfg.model;
  mc.vocab = static_cast<int>(vocab.size());
  mc.max_positions = cfg.seq_len;
  if (cfg.param_budget > 0) mc = with_width(mc, solve_width(cfg.param_budget, mc));
  pt.param_count = model::param_count(mc);
  report(cfg, "point x=" + format_double(x) + " id=" + pt.config_id + " vocab=" + std::to_string(vocab.size()) +
                  " hidden=" + std::to_string(mc.hidden) + " params=" + std::to_string(pt.param_count));

  auto one_seed = [&](std::uint64_t seed) {
    trainer::PretrainOptions po;
    po.model = mc;
    po.batch_size = cfg.batch_size;
    po.seq_len = cfg.seq_len;
    po.mask_prob = cfg.mask_prob;
    po.alpha = cfg.alpha;
    po.schedule.peak_lr = cfg.peak_lr;
    po.schedule.total_steps = cfg.total_steps;
    po.schedule.warmup_steps =
        static_cast<std::int64_t>(std::llround(cfg.warmup_fraction * static_cast<double>(cfg.total_steps)));
    po.seed = seed;
    const auto run = trainer::pretrain(vocab, train_docs, {}, po);
    ProbeOptions pr;
    pr.n_train = cfg.probe_train;
    pr.seq_len = cfg.seq_len;
    pr.seed = seed;
    pr.hi_langs = eval.hi;
    pr.lo_langs = eval.lo;
    pr.config_id = pt.config_id;
    return probe_transfer(run.params, vocab, labeled, corpus.langs.front(), eval.langs, pr);
  };

  std::vector<ProbeResult> runs(cfg.seeds.size());
  const std::size_t jobs = static_cast<std::size_t>(std::max(1, cfg.jobs));
  for (std::size_t start = 0; start < cfg.seeds.size(); start += jobs) {
    std::vector<std::future<ProbeResult>> futures;
    const std::size_t end = std::min(cfg.seeds.size(), start + jobs);
    for (std::size_t i = start; i < end; ++i) {
      futures.push_back(std::async(jobs > 1 ? std::launch::async : std::launch::deferred, one_seed, cfg.seeds[i]));
    }
    for (std::size_t i = start; i < end; ++i) {
      runs[i] = futures[i - start].get();
      std::ostringstream line;
      line << "run x=" << format_double(x) << " seed=" << cfg.seeds[i] << " hi=" << format_double(runs[i].hi_avg)
           << " lo=" << format_double(runs[i].lo_avg) << " overall=" << format_double(runs[i].overall);
      report(cfg, line.str());
    }
  }
  pt.runs = runs;

  std::vector<double> hi, lo, all;
  for (const auto& r : runs) {
    hi.push_back(r.hi_avg);
    lo.push_back(r.lo_avg);
    all.push_back(r.overall);
  }
  pt.hi = mean_std(hi);
  pt.lo = mean_std(lo);
  pt.overall = mean_std(all);
  for (const auto& lang : eval.langs) {
    std::vector<double> acc;
    for (const auto& r : runs) {
      const auto it = r.accuracy.find(lang);
      if (it != r.accuracy.end()) acc.push_back(it->second);
    }
    if (!acc.empty()) pt.per_language[lang] = mean_std(acc);
  }
  return pt;
}

SweepCurve sweep_languages(const std::vector<int>& k_values, const SweepConfig& cfg) {
  check_increasing(std::vector<double>(k_values.begin(), k_values.end()));
  if (k_values.front() < 2) throw std::invalid_argument("sweep_languages: k must be at least 2");
  if (k_values.back() > cfg.data.n_langs) {
    throw std::invalid_argument("sweep_languages: k=" + std::to_string(k_values.back()) + " exceeds the " +
                                std::to_string(cfg.data.n_langs) + " generated languages");
  }
  SweepCurve curve;
  curve.variable = "n_langs";
  const EvalLanguages eval = default_eval_languages(k_values.front());
  for (int k : k_values) {
    SweepConfig c = cfg;
    c.n_langs = k;
    curve.points.push_back(run_point(c, eval, k));
  }
  curve.fingerprint = config_fingerprint(curve.points.front().config, curve.variable);
  return curve;
}

SweepCurve sweep_alpha(const std::vector<double>& alpha_values, const SweepConfig& cfg) {
  for (double a : alpha_values) {
    if (a < 0.0) throw std::invalid_argument("sweep_alpha: negative alpha");
  }
  check_increasing(alpha_values);
  if (alpha_values.size() < 3) throw std::invalid_argument("sweep_alpha: need at least 3 alpha values");
  SweepCurve curve;
  curve.variable = "alpha";
  const EvalLanguages eval = default_eval_languages(cfg.n_langs);
  for (double a : alpha_values) {
    SweepConfig c = cfg;
    c.alpha = a;
    curve.points.push_back(run_point(c, eval, a));
  }
  curve.fingerprint = config_fingerprint(curve.points.front().config, curve.variable);
  return curve;
}

SweepCurve sweep_vocab(const std::vector<int>& vocab_values, std::int64_t param_budget, const SweepConfig& cfg) {
  check_increasing(std::vector<double>(vocab_values.begin(), vocab_values.end()));
  if (param_budget <= 0) throw std::invalid_argument("sweep_vocab: parameter budget must be positive");
  SweepCurve curve;
  curve.variable = "vocab_size";
  const EvalLanguages eval = default_eval_languages(cfg.n_langs);
  for (int v : vocab_values) {
    SweepConfig c = cfg;
    c.vocab_size = v;
    c.param_budget = param_budget;
    curve.points.push_back(run_point(c, eval, v));
  }
  curve.fingerprint = config_fingerprint(curve.points.front().config, curve.variable);
  return curve;
}

}  // namespace babelforge::xfer
