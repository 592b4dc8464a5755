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

#include "babelforge/probe.hpp"

#include <algorithm>
#include <iostream>
#include <numeric>
#include <stdexcept>

#include "babelforge/rng.hpp"
#include "babelforge/sampler.hpp"

namespace babelforge::xfer {

namespace {

// Multinomial logistic regression by full-batch gradient descent on
// standardized features.
class SoftmaxProbe {
 public:
  SoftmaxProbe(const Eigen::MatrixXd& x, const std::vector<int>& y, int classes, const ProbeOptions& opt) {
    mean_ = x.colwise().mean();
    const Eigen::MatrixXd centered = x.rowwise() - mean_;
    scale_ = (centered.array().square().colwise().mean().sqrt() + 1e-8).inverse().matrix();
    const Eigen::MatrixXd z = centered.array().rowwise() * scale_.array();
    const auto n = static_cast<double>(x.rows());
    w_ = Eigen::MatrixXd::Zero(x.cols(), classes);
    b_ = Eigen::RowVectorXd::Zero(classes);
    Eigen::MatrixXd target = Eigen::MatrixXd::Zero(x.rows(), classes);
    for (Eigen::Index i = 0; i < x.rows(); ++i) target(i, y[static_cast<std::size_t>(i)]) = 1.0;
    for (int it = 0; it < opt.iterations; ++it) {
      const Eigen::MatrixXd p = probs(z);
      const Eigen::MatrixXd d = (p - target) / n;
      w_ -= opt.learning_rate * (z.transpose() * d + opt.l2 * w_);
      b_ -= opt.learning_rate * d.colwise().sum();
    }
  }

  std::vector<int> predict(const Eigen::MatrixXd& x) const {
    const Eigen::MatrixXd z = (x.rowwise() - mean_).array().rowwise() * scale_.array();
    const Eigen::MatrixXd s = (z * w_).rowwise() + b_;
    std::vector<int> out(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
      Eigen::Index best = 0;
      s.row(i).maxCoeff(&best);
      out[static_cast<std::size_t>(i)] = static_cast<int>(best);
    }
    return out;
  }

 private:
  Eigen::MatrixXd probs(const Eigen::MatrixXd& z) const {
    Eigen::MatrixXd s = (z * w_).rowwise() + b_;
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
      s.row(i) = (s.row(i).array() - s.row(i).maxCoeff()).exp();
      s.row(i) /= s.row(i).sum();
    }
    return s;
  }

  Eigen::RowVectorXd mean_, scale_;
  Eigen::MatrixXd w_;
  Eigen::RowVectorXd b_;
};

double mean_of(const std::map<std::string, double>& acc, const std::vector<std::string>& langs) {
  double s = 0.0;
  int n = 0;
  for (const auto& l : langs) {
    const auto it = acc.find(l);
    if (it == acc.end()) continue;
    s += it->second;
    ++n;
  }
  return n ? s / n : 0.0;
}

}  // namespace

Eigen::MatrixXd sentence_vectors(const model::ModelParams<float>& params, const tokenizer::UnigramVocab& vocab,
                                 const std::vector<std::string>& texts, int seq_len, int batch_size) {
  const auto& sp = vocab.specials();
  const auto body = static_cast<std::size_t>(std::max(1, seq_len - 2));
  Eigen::MatrixXd out(static_cast<Eigen::Index>(texts.size()), params.config.hidden);
  for (std::size_t start = 0; start < texts.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(texts.size(), start + static_cast<std::size_t>(batch_size));
    std::vector<std::vector<int>> rows, labels;
    std::size_t width = 0;
    for (std::size_t i = start; i < end; ++i) {
      std::vector<int> ids = tokenizer::viterbi_encode(vocab, texts[i]);
      if (ids.size() > body) ids.resize(body);
      ids.insert(ids.begin(), sp.bos);
      ids.push_back(sp.eos);
      width = std::max(width, ids.size());
      rows.push_back(std::move(ids));
    }
    for (auto& r : rows) {
      r.resize(width, sp.pad);
      labels.emplace_back(width, sampler::kIgnoreLabel);
    }
    const auto batch = sampler::make_batch(rows, labels, std::vector<std::string>(rows.size()), sp.pad);
    const auto f = model::forward(params, batch);
    out.middleRows(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(end - start)) = f.pooled.cast<double>();
  }
  return out;
}

void size_rank_groups(const std::vector<std::string>& langs_by_size, std::vector<std::string>& hi,
                      std::vector<std::string>& lo) {
  const std::size_t n = langs_by_size.size();
  const std::size_t g = std::min<std::size_t>(2, n / 2);
  hi.assign(langs_by_size.begin(), langs_by_size.begin() + static_cast<std::ptrdiff_t>(g));
  lo.assign(langs_by_size.end() - static_cast<std::ptrdiff_t>(g), langs_by_size.end());
}

ProbeResult probe_transfer(const model::ModelParams<float>& params, const tokenizer::UnigramVocab& vocab,
                           const std::map<std::string, std::vector<corpus::Document>>& labeled,
                           const std::string& train_lang, const std::vector<std::string>& test_langs,
                           const ProbeOptions& options) {
  const auto train_it = labeled.find(train_lang);
  if (train_it == labeled.end() || train_it->second.empty()) {
    throw std::invalid_argument("probe_transfer: no labeled documents for train language " + train_lang);
  }
  const auto& src = train_it->second;
  if (options.n_train < 1 || static_cast<std::size_t>(options.n_train) >= src.size()) {
    throw std::invalid_argument("probe_transfer: n_train must leave held-out documents in " + train_lang);
  }

  int classes = 0;
  for (const auto& [lang, docs] : labeled) {
    for (const auto& d : docs) {
      if (!d.topic) throw std::invalid_argument("probe_transfer: document without topic label: " + d.source_id);
      classes = std::max(classes, *d.topic + 1);
    }
  }

  std::vector<std::size_t> order(src.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(options.seed);
  rng.shuffle(std::span<std::size_t>(order));
  const auto n_train = static_cast<std::size_t>(options.n_train);

  auto vectors_of = [&](const std::vector<corpus::Document>& docs, auto first, auto last, std::vector<int>& y) {
    std::vector<std::string> texts;
    y.clear();
    for (auto it = first; it != last; ++it) {
      texts.push_back(docs[*it].text);
      y.push_back(*docs[*it].topic);
    }
    return sentence_vectors(params, vocab, texts, options.seq_len, options.batch_size);
  };

  std::vector<int> y_train;
  const Eigen::MatrixXd x_train = vectors_of(src, order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train), y_train);
  const SoftmaxProbe probe(x_train, y_train, classes, options);

  ProbeResult res;
  res.config_id = options.config_id;
  for (const auto& lang : test_langs) {
    const auto it = labeled.find(lang);
    if (it == labeled.end() || it->second.empty()) {
      std::cerr << "probe_transfer: no labeled documents for " << lang << ", omitted\n";
      res.omitted.push_back(lang);
      continue;
    }
    std::vector<int> y;
    Eigen::MatrixXd x;
    if (lang == train_lang) {
      x = vectors_of(src, order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end(), y);
    } else {
      std::vector<std::size_t> all(it->second.size());
      std::iota(all.begin(), all.end(), 0);
      x = vectors_of(it->second, all.begin(), all.end(), y);
    }
    if (options.center_languages) x = (x.rowwise() - x.colwise().mean()).rowwise() + x_train.colwise().mean();
    const auto pred = probe.predict(x);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == y[i];
    res.accuracy[lang] = static_cast<double>(correct) / static_cast<double>(pred.size());
  }
  res.hi_langs = options.hi_langs;
  res.lo_langs = options.lo_langs;
  res.hi_avg = mean_of(res.accuracy, res.hi_langs);
  res.lo_avg = mean_of(res.accuracy, res.lo_langs);
  double s = 0.0;
  for (const auto& [l, a] : res.accuracy) s += a;
  res.overall = res.accuracy.empty() ? 0.0 : s / static_cast<double>(res.accuracy.size());
  return res;
}

}  // namespace babelforge::xfer
