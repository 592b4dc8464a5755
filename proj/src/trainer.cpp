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

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "babelforge/checkpoint.hpp"

namespace babelforge::trainer {

double LrSchedule::at(std::int64_t step) const {
  if (step <= 0) return 0.0;
  if (step < warmup_steps) return peak_lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
  if (total_steps <= warmup_steps) return peak_lr;
  const double remaining = static_cast<double>(total_steps - step) / static_cast<double>(total_steps - warmup_steps);
  return peak_lr * std::max(0.0, remaining);
}

bool is_heldout(const std::string& source_id, int permille) {
  return static_cast<int>(fnv1a(source_id) % 1000) < permille;
}

std::map<std::string, std::int64_t> sentence_counts(const std::map<std::string, std::vector<corpus::Document>>& docs) {
  std::map<std::string, std::int64_t> out;
  for (const auto& [lang, ds] : docs) {
    std::int64_t n = 0;
    for (const auto& d : ds) n += corpus::count_sentences(d.text);
    out[lang] = n;
  }
  return out;
}

namespace {

struct Tally {
  double loss_sum = 0.0;
  std::int64_t correct = 0;
  std::int64_t n = 0;
};

void tally_predictions(const model::Matrix<float>& logits, const std::vector<int>& targets, Tally& t) {
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const auto row = logits.row(i).cast<double>();
    Eigen::Index best = 0;
    const double mx = row.maxCoeff(&best);
    const double lse = mx + std::log((row.array() - mx).exp().sum());
    const int target = targets[static_cast<std::size_t>(i)];
    t.loss_sum += lse - row(target);
    t.correct += best == target ? 1 : 0;
    t.n += 1;
  }
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

EvalReport evaluate_mlm(const model::ModelParams<float>& params,
                        const std::map<std::string, sampler::LanguageStream>& heldout,
                        const sampler::SamplingPolicy& policy, const tokenizer::SpecialIds& specials,
                        const EvalOptions& options, std::int64_t step) {
  EvalReport report;
  report.step = step;
  double weighted = 0.0, weight = 0.0;
  for (std::size_t li = 0; li < policy.langs.size(); ++li) {
    const std::string& lang = policy.langs[li];
    const auto it = heldout.find(lang);
    if (it == heldout.end() || it->second.windows().empty()) {
      report.omitted.push_back(lang);
      continue;
    }
    const auto& windows = it->second.windows();
    const std::size_t n_rows = std::min(windows.size(), static_cast<std::size_t>(options.max_rows));
    Rng rng(options.seed);
    Tally tally;
    for (std::size_t start = 0; start < n_rows; start += static_cast<std::size_t>(options.batch_size)) {
      const std::size_t end = std::min(n_rows, start + static_cast<std::size_t>(options.batch_size));
      std::vector<std::vector<int>> tokens, labels;
      for (std::size_t r = start; r < end; ++r) {
        auto m = sampler::apply_masking(windows[r], options.mask_prob, rng, specials, params.config.vocab);
        tokens.push_back(std::move(m.tokens));
        labels.push_back(std::move(m.labels));
      }
      const auto batch = sampler::make_batch(tokens, labels, std::vector<std::string>(tokens.size(), lang), specials.pad);
      if (batch.num_labels() == 0) continue;
      const auto fwd = model::forward(params, batch, false);
      tally_predictions(fwd.logits, fwd.targets, tally);
    }
    if (tally.n == 0) {
      report.omitted.push_back(lang);
      continue;
    }
    LanguageEval e;
    e.loss = tally.loss_sum / static_cast<double>(tally.n);
    e.accuracy = static_cast<double>(tally.correct) / static_cast<double>(tally.n);
    e.n_predictions = tally.n;
    report.per_language[lang] = e;
    weighted += policy.q[li] * e.loss;
    weight += policy.q[li];
  }
  report.aggregate_loss = weight > 0.0 ? weighted / weight : 0.0;
  return report;
}

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows,
                       const std::map<std::string, std::string>& header) {
  for (const auto& [k, v] : header) out << "# " << k << '=' << v << '\n';
  out << "step,lang,split,loss,acc,lr,tokens_seen\n";
  for (const auto& r : rows) {
    out << r.step << ',' << r.lang << ',' << r.split << ',' << fmt(r.loss) << ',' << fmt(r.acc) << ',' << fmt(r.lr)
        << ',' << r.tokens_seen << '\n';
  }
}

namespace {

std::map<std::string, std::string> options_echo(const PretrainOptions& o) {
  std::map<std::string, std::string> h = o.echo;
  const auto& m = o.model;
  h["layers"] = std::to_string(m.layers);
  h["hidden"] = std::to_string(m.hidden);
  h["heads"] = std::to_string(m.heads);
  h["ffn"] = std::to_string(m.ffn);
  h["vocab"] = std::to_string(m.vocab);
  h["max_positions"] = std::to_string(m.max_positions);
  h["dropout"] = format_double(m.dropout);
  h["batch_size"] = std::to_string(o.batch_size);
  h["seq_len"] = std::to_string(o.seq_len);
  h["mask_prob"] = format_double(o.mask_prob);
  h["alpha"] = format_double(o.alpha);
  h["peak_lr"] = format_double(o.schedule.peak_lr);
  h["warmup_steps"] = std::to_string(o.schedule.warmup_steps);
  h["total_steps"] = std::to_string(o.schedule.total_steps);
  h["adam_beta1"] = format_double(o.adam.beta1);
  h["adam_beta2"] = format_double(o.adam.beta2);
  h["adam_eps"] = format_double(o.adam.eps);
  h["clip_norm"] = format_double(o.clip_norm);
  h["eval_interval"] = std::to_string(o.eval_interval);
  h["ckpt_interval"] = std::to_string(o.ckpt_interval);
  h["seed"] = std::to_string(o.seed);
  h["init_seed"] = std::to_string(o.init_seed);
  h["eval_seed"] = std::to_string(o.eval.seed);
  h["eval_rows"] = std::to_string(o.eval.max_rows);
  return h;
}

}  // namespace

PretrainResult pretrain(const tokenizer::UnigramVocab& vocab,
                        const std::map<std::string, std::vector<corpus::Document>>& train_docs,
                        const std::map<std::string, std::vector<corpus::Document>>& heldout_docs,
                        const PretrainOptions& options) {
  PretrainOptions opt = options;
  opt.model.vocab = static_cast<int>(vocab.size());
  opt.model.max_positions = std::max(opt.model.max_positions, opt.seq_len);
  opt.model.validate();
  const auto& specials = vocab.specials();

  const sampler::SamplingPolicy policy = sampler::smoothed_distribution(sentence_counts(train_docs), opt.alpha);
  std::map<std::string, sampler::LanguageStream> streams, heldout;
  for (const auto& [lang, docs] : train_docs) {
    streams.emplace(lang, sampler::LanguageStream::from_documents(docs, vocab, opt.seq_len,
                                                                  Rng::mix(opt.seed ^ fnv1a("stream:" + lang))));
  }
  for (const auto& [lang, docs] : heldout_docs) {
    heldout.emplace(lang, sampler::LanguageStream::from_documents(docs, vocab, opt.seq_len, opt.eval.seed));
  }

  const std::uint64_t init_seed = opt.init_seed ? opt.init_seed : Rng::mix(opt.seed);
  TrainState<float> state =
      make_train_state(model::init_params<float>(opt.model, init_seed), opt.schedule, opt.seed, opt.adam);
  Rng batch_rng = Rng(opt.seed).split("batches");
  Rng dropout_rng = Rng(opt.seed).split("dropout");

  PretrainResult result;
  const auto header = options_echo(opt);
  const bool on_disk = !opt.out_dir.empty();
  if (on_disk) std::filesystem::create_directories(opt.out_dir);
  auto flush_metrics = [&] {
    if (!on_disk) return;
    std::ofstream out(opt.out_dir + "/metrics.csv");
    write_metrics_csv(out, result.metrics, header);
  };
  auto save_ckpt = [&] {
    if (on_disk) checkpoint::save(opt.out_dir + "/checkpoint", state.params, state.step, header);
  };
  auto run_eval = [&] {
    EvalReport rep = evaluate_mlm(state.params, heldout, policy, specials, opt.eval, state.step);
    for (const auto& [lang, e] : rep.per_language) {
      result.metrics.push_back({state.step, lang, "heldout", e.loss, e.accuracy, state.schedule.at(state.step), 0});
    }
    if (!rep.per_language.empty()) {
      result.metrics.push_back({state.step, "all", "heldout", rep.aggregate_loss, 0.0, state.schedule.at(state.step), 0});
    }
    return rep;
  };

  std::int64_t tokens_seen = 0;
  const std::int64_t total = opt.schedule.total_steps;
  for (std::int64_t step = 1; step <= total; ++step) {
    sampler::MaskedBatch batch;
    do {
      batch = sampler::build_batch(streams, policy, opt.batch_size, opt.seq_len, opt.mask_prob, batch_rng, specials,
                                   opt.model.vocab);
    } while (batch.num_labels() == 0);
    auto bw = model::backward(state.params, batch, opt.model.dropout > 0.0, &dropout_rng);
    if (!std::isfinite(bw.loss)) {
      flush_metrics();
      throw TrainingAborted("non-finite loss at step " + std::to_string(step), step);
    }
    clip_grad_norm(bw.grads, opt.clip_norm);
    const double lr = adam_step(state, bw.grads);
    tokens_seen += batch.attn_mask.count();

    Tally t;
    tally_predictions(bw.forward.logits, bw.forward.targets, t);
    result.metrics.push_back({state.step, "all", "train", static_cast<double>(bw.loss),
                              static_cast<double>(t.correct) / static_cast<double>(t.n), lr, tokens_seen});
    result.train_losses.push_back(static_cast<double>(bw.loss));

    if (opt.eval_interval > 0 && step % opt.eval_interval == 0 && step != total) run_eval();
    if (opt.ckpt_interval > 0 && step % opt.ckpt_interval == 0 && step != total) save_ckpt();
  }
  if (!heldout.empty()) result.final_eval = run_eval();
  save_ckpt();
  flush_metrics();
  for (const auto& [lang, s] : streams) result.epochs[lang] = s.epoch();
  result.params = std::move(state.params);
  return result;
}

PretrainOptions pretrain_options_from_config(KeyValueConfig& cfg, int vocab_size) {
  PretrainOptions o;
  o.model.layers = static_cast<int>(cfg.get_int("layers", 2));
  o.model.hidden = static_cast<int>(cfg.get_int("hidden", 64));
  o.model.heads = static_cast<int>(cfg.get_int("heads", 2));
  o.model.ffn = static_cast<int>(cfg.get_int("ffn", 4 * o.model.hidden));
  o.model.dropout = cfg.get_double("dropout", 0.0);
  o.model.vocab = vocab_size;
  o.batch_size = static_cast<int>(cfg.get_int("batch_size", 32));
  o.seq_len = static_cast<int>(cfg.get_int("seq_len", 64));
  o.model.max_positions = static_cast<int>(cfg.get_int("max_positions", o.seq_len));
  o.mask_prob = cfg.get_double("mask_prob", 0.15);
  o.alpha = cfg.get_double("alpha", 0.3);
  o.schedule.total_steps = cfg.get_int("total_steps", 1000);
  o.schedule.peak_lr = cfg.get_double("peak_lr", 5e-4);
  o.schedule.warmup_steps = cfg.get_int("warmup_steps", o.schedule.total_steps / 10);
  o.clip_norm = cfg.get_double("clip_norm", 1.0);
  o.eval_interval = cfg.get_int("eval_interval", 0);
  o.ckpt_interval = cfg.get_int("ckpt_interval", 0);
  o.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 1));
  o.init_seed = static_cast<std::uint64_t>(cfg.get_int("init_seed", 0));
  o.eval.seed = static_cast<std::uint64_t>(cfg.get_int("eval_seed", 12345));
  o.eval.max_rows = static_cast<int>(cfg.get_int("eval_rows", 256));
  return o;
}

}  // namespace babelforge::trainer
