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

// babelforge command line: one subcommand per pipeline stage, files between
// stages. stdout carries only `key=value` progress records; diagnostics go
// to stderr. Exit codes: 0 success, 1 usage error, 2 runtime error.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "babelforge/char_lm.hpp"
#include "babelforge/checkpoint.hpp"
#include "babelforge/corpus.hpp"
#include "babelforge/langid.hpp"
#include "babelforge/probe.hpp"
#include "babelforge/report.hpp"
#include "babelforge/run_config.hpp"
#include "babelforge/sweep.hpp"
#include "babelforge/synthetic.hpp"
#include "babelforge/trainer.hpp"
#include "babelforge/unigram.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace babelforge {
namespace {

// Bad flag combinations found after parsing; reported like parse errors.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::uint64_t seed = 1;
  int jobs = 1;
  bool seed_given = false;
};

void emit(const std::string& record) { std::cout << record << std::endl; }

// Creates the directory an output file goes into and returns it.
std::string parent_dir(const std::string& file) {
  const fs::path p = fs::path(file).parent_path();
  if (p.empty()) return ".";
  fs::create_directories(p);
  return p.string();
}

void write_manifest(const std::string& dir, const std::string& subcommand, const Globals& g,
                    const std::vector<std::string>& inputs, const std::vector<std::string>& outputs,
                    const std::map<std::string, std::string>& config) {
  fs::create_directories(dir);
  json j;
  j["tool"] = "babelforge";
  j["version"] = BABELFORGE_VERSION;
  j["subcommand"] = subcommand;
  j["seed"] = g.seed;
  j["jobs"] = g.jobs;
  j["inputs"] = inputs;
  j["outputs"] = outputs;
  j["config"] = config;
  const std::string path = (fs::path(dir) / "manifest.json").string();
  std::ofstream out(path);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("cannot write " + path);
}

std::vector<corpus::Document> read_all(const std::vector<std::string>& paths) {
  std::vector<corpus::Document> out;
  for (const auto& p : paths) {
    std::size_t skipped = 0;
    auto docs = corpus::read_jsonl_file(p, &skipped);
    if (skipped) std::cerr << p << ": skipped " << skipped << " empty documents\n";
    out.insert(out.end(), std::make_move_iterator(docs.begin()), std::make_move_iterator(docs.end()));
  }
  return out;
}

void check_unused(const KeyValueConfig& cfg) {
  for (const auto& k : cfg.unused_keys()) std::cerr << "warning: config key '" << k << "' is not used\n";
}

// Flat config from an optional file plus repeated --set key=value overrides.
KeyValueConfig load_config(const std::string& path, const std::vector<std::string>& sets) {
  KeyValueConfig cfg = path.empty() ? KeyValueConfig() : KeyValueConfig::parse_file(path);
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--set expects key=value, got '" + s + "'");
    cfg.set(s.substr(0, eq), s.substr(eq + 1));
  }
  return cfg;
}

// ---- clean ----------------------------------------------------------------

struct CleanArgs {
  std::vector<std::string> in;
  std::string out, stats, dropped, langid, lm_train;
  double keep = 0.7;
  int lm_order = 5;
  double min_conf = 0.0;
};

void run_clean(const CleanArgs& a, const Globals& g) {
  auto docs = read_all(a.in);
  std::size_t low_conf = 0;
  if (!a.langid.empty()) {
    std::ifstream in(a.langid, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + a.langid);
    const auto model = corpus::LangIdModel::load(in);
    std::vector<corpus::Document> labeled;
    for (auto& d : docs) {
      const auto p = model.identify(d.text);
      d.lang = p.lang;
      d.langid_conf = p.confidence;
      if (p.confidence < a.min_conf || p.lang == "und") {
        ++low_conf;
        continue;
      }
      labeled.push_back(std::move(d));
    }
    docs = std::move(labeled);
  }
  const std::size_t before_dedup = docs.size();
  docs = corpus::dedup(docs);

  std::map<std::string, corpus::CharLM> lms;
  const auto lm_docs = a.lm_train.empty() ? docs : read_all({a.lm_train});
  for (const auto& [lang, group] : corpus::group_by_lang(lm_docs)) lms.emplace(lang, corpus::CharLM::train(group, a.lm_order));
  const auto res = corpus::score_and_filter(docs, lms, a.keep, g.jobs);

  const std::string out_dir = parent_dir(a.out);
  corpus::write_jsonl_file(a.out, res.kept);
  const std::string stats_path = a.stats.empty() ? a.out + ".stats.csv" : a.stats;
  {
    std::ofstream s(stats_path);
    const auto st = corpus::compute_stats(res.kept);
    corpus::write_stats_csv(s, st);
    if (!s) throw std::runtime_error("cannot write " + stats_path);
  }
  std::vector<std::string> outputs{a.out, stats_path};
  if (!a.dropped.empty()) {
    std::vector<corpus::Document> dropped;
    std::ofstream out(a.dropped);
    for (const auto& d : res.dropped) {
      json j = json::parse(corpus::document_to_json(d.doc));
      j["reason"] = d.reason;
      out << j.dump() << '\n';
    }
    outputs.push_back(a.dropped);
  }
  write_manifest(out_dir, "clean", g, a.in, outputs,
                 {{"keep", format_double(a.keep)}, {"lm_order", std::to_string(a.lm_order)},
                  {"langid", a.langid}, {"min_conf", format_double(a.min_conf)}, {"lm_train", a.lm_train}});
  emit("clean input=" + std::to_string(before_dedup + low_conf) + " low_conf=" + std::to_string(low_conf) +
       " duplicates=" + std::to_string(before_dedup - docs.size()) + " kept=" + std::to_string(res.kept.size()) +
       " dropped=" + std::to_string(res.dropped.size()));
}

// ---- stats ----------------------------------------------------------------

void run_stats(const std::vector<std::string>& in, const std::string& out, const Globals& g) {
  const auto docs = read_all(in);
  const auto stats = corpus::compute_stats(docs);
  if (out.empty()) {
    corpus::write_stats_csv(std::cout, stats);
    return;
  }
  const std::string dir = parent_dir(out);
  std::ofstream s(out);
  corpus::write_stats_csv(s, stats);
  if (!s) throw std::runtime_error("cannot write " + out);
  write_manifest(dir, "stats", g, in, {out}, {});
  emit("stats languages=" + std::to_string(stats.size()) + " docs=" + std::to_string(docs.size()));
}

// ---- train-langid ---------------------------------------------------------

struct LangIdArgs {
  std::vector<std::string> in;
  std::string out;
  corpus::LangIdOptions opt;
};

void run_train_langid(LangIdArgs a, const Globals& g) {
  std::vector<corpus::LabeledText> data;
  for (const auto& d : read_all(a.in)) data.push_back({d.text, d.lang});
  a.opt.seed = g.seed;
  std::size_t skipped = 0;
  const auto model = corpus::LangIdModel::train(data, a.opt, &skipped);
  if (skipped) std::cerr << "train-langid: skipped " << skipped << " empty texts\n";
  const std::string dir = parent_dir(a.out);
  {
    std::ofstream out(a.out, std::ios::binary);
    model.save(out);
    if (!out) throw std::runtime_error("cannot write " + a.out);
  }
  std::size_t correct = 0;
  for (const auto& t : data) correct += model.identify(t.text).lang == t.lang;
  write_manifest(dir, "train-langid", g, a.in, {a.out},
                 {{"min_ngram", std::to_string(a.opt.min_ngram)},
                  {"max_ngram", std::to_string(a.opt.max_ngram)},
                  {"feature_dim", std::to_string(a.opt.feature_dim)},
                  {"epochs", std::to_string(a.opt.epochs)},
                  {"lr", format_double(a.opt.lr)}});
  emit("train-langid languages=" + std::to_string(model.labels().size()) + " texts=" + std::to_string(data.size()) +
       " train_acc=" + format_double(data.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(data.size())));
}

// ---- train-tokenizer ------------------------------------------------------

struct TokenizerArgs {
  std::vector<std::string> in;
  std::string out;
  double alpha = 0.3;
  int sample = 20000;
  tokenizer::UnigramTrainerOptions opt;
};

void run_train_tokenizer(const TokenizerArgs& a, const Globals& g) {
  const auto docs = corpus::group_by_lang(read_all(a.in));
  if (docs.empty()) throw std::runtime_error("train-tokenizer: no documents");
  const auto sample = xfer::tokenizer_sample(docs, a.alpha, a.sample, g.seed);
  const auto vocab = tokenizer::train_unigram(sample, a.opt);
  const std::string dir = parent_dir(a.out);
  vocab.save_file(a.out);
  write_manifest(dir, "train-tokenizer", g, a.in, {a.out},
                 {{"vocab_size", std::to_string(a.opt.vocab_size)},
                  {"alpha", format_double(a.alpha)},
                  {"sample_docs", std::to_string(a.sample)},
                  {"seed_multiplier", format_double(a.opt.seed_multiplier)},
                  {"em_iters", std::to_string(a.opt.em_iters)},
                  {"prune_keep", format_double(a.opt.prune_keep)},
                  {"max_piece_length", std::to_string(a.opt.max_piece_length)}});
  emit("train-tokenizer pieces=" + std::to_string(vocab.size()) + " sample_docs=" + std::to_string(sample.size()));
}

// ---- pretrain -------------------------------------------------------------

void run_pretrain(const std::string& config_path, const std::vector<std::string>& sets, const std::string& out_flag,
                  const Globals& g) {
  KeyValueConfig cfg = load_config(config_path, sets);
  if (g.seed_given || !cfg.contains("seed")) cfg.set("seed", std::to_string(g.seed));
  const std::string train_path = cfg.require_string("train");
  const std::string vocab_path = cfg.require_string("vocab");
  const std::string out = out_flag.empty() ? cfg.require_string("out") : out_flag;
  const int heldout_permille = static_cast<int>(cfg.get_int("heldout_permille", 20));

  const auto vocab = tokenizer::UnigramVocab::load_file(vocab_path);
  std::map<std::string, std::vector<corpus::Document>> train, heldout;
  for (auto& d : read_all({train_path})) {
    (trainer::is_heldout(d.source_id, heldout_permille) ? heldout : train)[d.lang].push_back(std::move(d));
  }
  auto opt = trainer::pretrain_options_from_config(cfg, static_cast<int>(vocab.size()));
  opt.out_dir = out;
  check_unused(cfg);
  opt.echo = cfg.effective();
  const auto res = trainer::pretrain(vocab, train, heldout, opt);
  write_manifest(out, "pretrain", g, {train_path, vocab_path}, {out + "/metrics.csv", out + "/checkpoint"},
                 cfg.effective());
  std::ostringstream line;
  line << "pretrain steps=" << res.train_losses.size()
       << " final_loss=" << format_double(res.train_losses.empty() ? 0.0 : res.train_losses.back());
  if (res.final_eval) line << " heldout_loss=" << format_double(res.final_eval->aggregate_loss);
  emit(line.str());
}

// ---- probe ----------------------------------------------------------------

struct ProbeArgs {
  std::string checkpoint, vocab, data, train_lang, out;
  std::vector<std::string> test_langs, hi, lo;
  xfer::ProbeOptions opt;
};

void run_probe(ProbeArgs a, const Globals& g) {
  const auto ckpt = checkpoint::load(a.checkpoint);
  const auto vocab = tokenizer::UnigramVocab::load_file(a.vocab);
  const auto labeled = corpus::group_by_lang(read_all({a.data}));
  if (a.test_langs.empty()) {
    for (const auto& [lang, _] : labeled) a.test_langs.push_back(lang);
  }
  a.opt.seed = g.seed;
  a.opt.hi_langs = a.hi;
  a.opt.lo_langs = a.lo;
  const auto r = xfer::probe_transfer(ckpt.params, vocab, labeled, a.train_lang, a.test_langs, a.opt);
  for (const auto& [lang, acc] : r.accuracy) emit("probe lang=" + lang + " acc=" + format_double(acc));
  emit("probe hi_avg=" + format_double(r.hi_avg) + " lo_avg=" + format_double(r.lo_avg) +
       " overall=" + format_double(r.overall));
  if (!a.out.empty()) {
    json j;
    j["train_lang"] = a.train_lang;
    j["accuracy"] = r.accuracy;
    j["hi_langs"] = r.hi_langs;
    j["lo_langs"] = r.lo_langs;
    j["hi_avg"] = r.hi_avg;
    j["lo_avg"] = r.lo_avg;
    j["overall"] = r.overall;
    j["omitted"] = r.omitted;
    const std::string dir = parent_dir(a.out);
    std::ofstream out(a.out);
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("cannot write " + a.out);
    write_manifest(dir, "probe", g, {a.checkpoint, a.vocab, a.data}, {a.out},
                   {{"train_lang", a.train_lang},
                    {"n_train", std::to_string(a.opt.n_train)},
                    {"seq_len", std::to_string(a.opt.seq_len)},
                    {"iterations", std::to_string(a.opt.iterations)},
                    {"lr", format_double(a.opt.learning_rate)},
                    {"l2", format_double(a.opt.l2)},
                    {"center_languages", a.opt.center_languages ? "1" : "0"}});
  }
}

// ---- sweep ----------------------------------------------------------------

void run_sweep(const std::string& config_path, const std::vector<std::string>& sets, const std::string& out,
               const Globals& g) {
  KeyValueConfig cfg = load_config(config_path, sets);
  const std::string kind = cfg.require_string("sweep");
  auto sc = xfer::SweepConfig::from_config(cfg);
  sc.jobs = g.jobs;
  if (g.seed_given) sc.data_seed = g.seed;
  sc.progress = [](const std::string& s) { emit(s); };

  xfer::SweepCurve curve;
  if (kind == "languages") {
    std::vector<int> ks;
    for (auto k : cfg.get_ints("values", {2, 4, 7, 12, 20})) ks.push_back(static_cast<int>(k));
    check_unused(cfg);
    curve = xfer::sweep_languages(ks, sc);
  } else if (kind == "alpha") {
    const auto values = cfg.get_doubles("values", {0.01, 0.3, 0.7, 1.0});
    check_unused(cfg);
    curve = xfer::sweep_alpha(values, sc);
  } else if (kind == "vocab") {
    std::vector<int> vs;
    for (auto v : cfg.get_ints("values", {1000, 2000, 4000, 8000})) vs.push_back(static_cast<int>(v));
    const auto budget = cfg.require_string("budget");
    check_unused(cfg);
    curve = xfer::sweep_vocab(vs, std::stoll(budget), sc);
  } else {
    throw UsageError("sweep: unknown sweep '" + kind + "' (languages, alpha, vocab)");
  }
  const auto files = xfer::emit_report({curve}, out);
  write_manifest(out, "sweep", g, config_path.empty() ? std::vector<std::string>{} : std::vector<std::string>{config_path},
                 files, cfg.effective());
  for (const auto& p : curve.points) {
    emit("sweep " + curve.variable + "=" + format_double(p.x) + " hi=" + format_double(p.hi.mean) +
         " hi_sd=" + format_double(p.hi.stdev) + " lo=" + format_double(p.lo.mean) +
         " lo_sd=" + format_double(p.lo.stdev) + " overall=" + format_double(p.overall.mean) +
         " params=" + std::to_string(p.param_count));
  }
}

// ---- report ---------------------------------------------------------------

void run_report(const std::vector<std::string>& in, const std::string& out, const Globals& g) {
  std::vector<xfer::SweepCurve> curves;
  for (const auto& path : in) {
    // File names are <variable>_<fingerprint>.csv; the variable may contain '_'.
    const std::string stem = fs::path(path).stem().string();
    const auto cut = stem.rfind('_');
    if (cut == std::string::npos) throw std::runtime_error("report: cannot parse curve file name " + path);
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    curves.push_back(xfer::read_curve_csv(f, stem.substr(0, cut), stem.substr(cut + 1)));
  }
  const auto files = xfer::emit_report(curves, out);
  write_manifest(out, "report", g, in, files, {});
  for (const auto& f : files) emit("report file=" + f);
}

// ---- generate -------------------------------------------------------------

void run_generate(const std::string& config_path, const std::vector<std::string>& sets, const std::string& out,
                  const Globals& g) {
  KeyValueConfig cfg = load_config(config_path, sets);
  const auto spec = xfer::SyntheticLangSpec::from_config(cfg);
  check_unused(cfg);
  const auto corpus = xfer::generate_languages(spec, g.seed);
  fs::create_directories(out);
  const std::string pre = (fs::path(out) / "pretrain.jsonl").string();
  const std::string probe = (fs::path(out) / "probe.jsonl").string();
  corpus::write_jsonl_file(pre, corpus.pretrain);
  corpus::write_jsonl_file(probe, corpus.probe);
  write_manifest(out, "generate", g, {}, {pre, probe}, spec.to_map());
  for (std::size_t i = 0; i < corpus.langs.size(); ++i) {
    emit("generate lang=" + corpus.langs[i] + " sentences=" + std::to_string(corpus.sizes[i]));
  }
}

int run(int argc, char** argv) {
  CLI::App app{"babelforge: multilingual masked-LM pretraining pipeline"};
  app.set_version_flag("--version", std::string(BABELFORGE_VERSION));
  app.require_subcommand(1, 1);
  app.fallthrough();

  Globals g;
  app.add_option("--seed", g.seed, "seed for every random choice")->each([&](const std::string&) { g.seed_given = true; });
  app.add_option("--jobs", g.jobs, "parallel jobs for independent work")->check(CLI::PositiveNumber);

  CleanArgs clean;
  auto* c = app.add_subcommand("clean", "langid, dedup and perplexity-filter a JSONL corpus");
  c->add_option("--in", clean.in, "input JSONL files")->required();
  c->add_option("--out", clean.out, "kept documents (JSONL)")->required();
  c->add_option("--keep", clean.keep, "fraction kept per language")->check(CLI::Range(0.0, 1.0));
  c->add_option("--stats", clean.stats, "stats CSV (default <out>.stats.csv)");
  c->add_option("--dropped", clean.dropped, "dropped documents with reasons (JSONL)");
  c->add_option("--langid", clean.langid, "relabel languages with this model");
  c->add_option("--min-conf", clean.min_conf, "drop documents below this langid confidence");
  c->add_option("--lm-order", clean.lm_order, "character LM order")->check(CLI::Range(2, 12));
  c->add_option("--lm-train", clean.lm_train, "JSONL used to train the filtering LMs (default: the input)");

  std::vector<std::string> stats_in;
  std::string stats_out;
  auto* s = app.add_subcommand("stats", "per-language corpus statistics as CSV");
  s->add_option("--in", stats_in, "input JSONL files")->required();
  s->add_option("--out", stats_out, "CSV path (default: stdout)");

  LangIdArgs lid;
  std::size_t log2_dim = 18;
  auto* l = app.add_subcommand("train-langid", "train the character n-gram language identifier");
  l->add_option("--in", lid.in, "labeled JSONL files")->required();
  l->add_option("--out", lid.out, "model file")->required();
  l->add_option("--min-n", lid.opt.min_ngram)->check(CLI::Range(1, 8));
  l->add_option("--max-n", lid.opt.max_ngram)->check(CLI::Range(1, 8));
  l->add_option("--log2-dim", log2_dim, "hashed feature buckets = 2^log2-dim")->check(CLI::Range(4, 26));
  l->add_option("--epochs", lid.opt.epochs)->check(CLI::PositiveNumber);
  l->add_option("--lr", lid.opt.lr)->check(CLI::PositiveNumber);

  TokenizerArgs tok;
  auto* t = app.add_subcommand("train-tokenizer", "train a unigram tokenizer on an alpha-smoothed sample");
  t->add_option("--in", tok.in, "JSONL files")->required();
  t->add_option("--out", tok.out, "vocabulary file")->required();
  t->add_option("--vocab-size", tok.opt.vocab_size)->check(CLI::Range(8, 1 << 22));
  t->add_option("--alpha", tok.alpha)->check(CLI::NonNegativeNumber);
  t->add_option("--sample", tok.sample, "documents in the training sample")->check(CLI::PositiveNumber);
  t->add_option("--em-iters", tok.opt.em_iters)->check(CLI::PositiveNumber);

  std::string config, out;
  std::vector<std::string> sets;
  auto* p = app.add_subcommand("pretrain", "masked-LM pretraining from a run config");
  p->add_option("--config", config, "key = value run config")->required();
  p->add_option("--set", sets, "override a config key (key=value)");
  p->add_option("--out", out, "output directory (default: config key 'out')");

  ProbeArgs pr;
  auto* b = app.add_subcommand("probe", "cross-lingual topic probe on a frozen checkpoint");
  b->add_option("--checkpoint", pr.checkpoint, "checkpoint directory")->required();
  b->add_option("--vocab", pr.vocab, "vocabulary file")->required();
  b->add_option("--data", pr.data, "topic-labeled JSONL")->required();
  b->add_option("--train-lang", pr.train_lang, "language the probe is fit on")->required();
  b->add_option("--test-langs", pr.test_langs, "languages to test (default: all)")->delimiter(',');
  b->add_option("--hi", pr.hi, "high-resource group")->delimiter(',');
  b->add_option("--lo", pr.lo, "low-resource group")->delimiter(',');
  b->add_option("--n-train", pr.opt.n_train)->check(CLI::PositiveNumber);
  b->add_option("--seq-len", pr.opt.seq_len)->check(CLI::Range(3, 4096));
  b->add_option("--out", pr.out, "result JSON");

  auto* w = app.add_subcommand("sweep", "language-count, alpha or vocabulary sweep");
  w->add_option("--config", config, "sweep config (key 'sweep' = languages|alpha|vocab)");
  w->add_option("--set", sets, "override a config key (key=value)");
  w->add_option("--out", out, "report directory")->required();

  std::vector<std::string> report_in;
  auto* r = app.add_subcommand("report", "redraw CSV curves and plots");
  r->add_option("--in", report_in, "curve CSV files")->required()->check(CLI::ExistingFile);
  r->add_option("--out", out, "report directory")->required();

  auto* gen = app.add_subcommand("generate", "write a synthetic multilingual corpus");
  gen->add_option("--config", config, "generator config");
  gen->add_option("--set", sets, "override a config key (key=value)");
  gen->add_option("--out", out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cerr << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    std::cout << BABELFORGE_VERSION << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (*c) run_clean(clean, g);
    if (*s) run_stats(stats_in, stats_out, g);
    if (*l) {
      lid.opt.feature_dim = std::size_t{1} << log2_dim;
      if (lid.opt.min_ngram > lid.opt.max_ngram) throw UsageError("--min-n exceeds --max-n");
      run_train_langid(lid, g);
    }
    if (*t) run_train_tokenizer(tok, g);
    if (*p) run_pretrain(config, sets, out, g);
    if (*b) run_probe(pr, g);
    if (*w) run_sweep(config, sets, out, g);
    if (*r) run_report(report_in, out, g);
    if (*gen) run_generate(config, sets, out, g);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace
}  // namespace babelforge

int main(int argc, char** argv) { return babelforge::run(argc, argv); }
