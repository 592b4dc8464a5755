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

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "babelforge/rng.hpp"
#include "babelforge/text.hpp"

namespace babelforge::corpus {

namespace {

Eigen::VectorXd softmax(const Eigen::VectorXd& z) {
  Eigen::VectorXd e = (z.array() - z.maxCoeff()).exp();
  return e / e.sum();
}

constexpr std::string_view kMagic = "babelforge-langid v1";

}  // namespace

LangIdModel::SparseFeatures LangIdModel::features(std::string_view normalized_text) const {
  const std::u32string cps = text::to_u32(normalized_text);
  std::map<std::uint32_t, float> counts;
  for (int n = min_ngram_; n <= max_ngram_; ++n) {
    if (cps.size() < static_cast<std::size_t>(n)) break;
    const std::uint64_t basis = Rng::mix(static_cast<std::uint64_t>(n));
    for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= cps.size(); ++i) {
      const std::string gram = text::to_utf8(std::u32string_view(cps).substr(i, static_cast<std::size_t>(n)));
      counts[static_cast<std::uint32_t>(fnv1a(gram, basis) % feature_dim_)] += 1.0f;
    }
  }
  // L2-normalized count profile, so repeating a text leaves it unchanged.
  float norm = 0.0f;
  for (const auto& [idx, c] : counts) norm += c * c;
  norm = std::sqrt(norm);
  SparseFeatures out;
  out.reserve(counts.size());
  for (const auto& [idx, c] : counts) out.emplace_back(idx, c / norm);
  return out;
}

Eigen::VectorXd LangIdModel::scores(const SparseFeatures& x) const {
  Eigen::VectorXd z = bias_.cast<double>();
  for (const auto& [idx, v] : x) z += static_cast<double>(v) * weights_.row(idx).transpose().cast<double>();
  return z;
}

LangIdModel LangIdModel::train(std::span<const LabeledText> data, const LangIdOptions& options,
                               std::size_t* skipped) {
  if (options.min_ngram < 1 || options.max_ngram < options.min_ngram) {
    throw std::invalid_argument("langid: invalid n-gram range");
  }
  if (options.feature_dim == 0) throw std::invalid_argument("langid: feature_dim must be positive");

  LangIdModel model;
  model.min_ngram_ = options.min_ngram;
  model.max_ngram_ = options.max_ngram;
  model.feature_dim_ = options.feature_dim;

  std::map<std::string, int> label_ids;
  for (const auto& d : data) label_ids.emplace(d.lang, 0);
  if (label_ids.size() < 2) throw std::invalid_argument("langid: need >=2 classes");
  for (const auto& [lang, _] : label_ids) model.labels_.push_back(lang);
  for (std::size_t i = 0; i < model.labels_.size(); ++i) label_ids[model.labels_[i]] = static_cast<int>(i);

  const auto n_classes = static_cast<Eigen::Index>(model.labels_.size());
  model.weights_ = WeightMatrix::Zero(static_cast<Eigen::Index>(options.feature_dim), n_classes);
  model.bias_ = Eigen::VectorXf::Zero(n_classes);

  std::vector<std::pair<SparseFeatures, int>> examples;
  std::size_t n_skipped = 0;
  for (const auto& d : data) {
    const std::string norm = text::normalize(d.text);
    auto x = norm.empty() ? SparseFeatures{} : model.features(norm);
    if (x.empty()) {
      ++n_skipped;
      continue;
    }
    examples.emplace_back(std::move(x), label_ids[d.lang]);
  }
  if (skipped) *skipped = n_skipped;

  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(options.seed);
  const double total_updates = static_cast<double>(options.epochs) * static_cast<double>(examples.size());
  // Iterates of the second half of training are averaged (lazily: the
  // average is w - u / c), which removes most of the dependence on the order
  // of the last few updates.
  const int average_from = options.epochs / 2;
  WeightMatrix u = WeightMatrix::Zero(model.weights_.rows(), n_classes);
  Eigen::VectorXf u_bias = Eigen::VectorXf::Zero(n_classes);
  double c = 0.0;
  double done = 0.0;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t i : order) {
      const auto& [x, y] = examples[i];
      const double lr = options.lr * std::max(0.0, 1.0 - done / total_updates);
      done += 1.0;
      Eigen::VectorXd grad = softmax(model.scores(x));
      grad(y) -= 1.0;
      const Eigen::VectorXf step = (lr * grad).cast<float>();
      const Eigen::VectorXf ustep = (c * lr * grad).cast<float>();
      for (const auto& [idx, v] : x) {
        model.weights_.row(idx) -= v * step.transpose();
        if (c > 0.0) u.row(idx) -= v * ustep.transpose();
      }
      model.bias_ -= step;
      if (c > 0.0) u_bias -= ustep;
      if (epoch >= average_from) c += 1.0;
    }
  }
  if (c > 0.0) {
    model.weights_ -= u / static_cast<float>(c);
    model.bias_ -= u_bias / static_cast<float>(c);
  }
  return model;
}

Eigen::VectorXd LangIdModel::predict_proba(std::string_view t) const {
  const std::string norm = text::normalize(t);
  if (norm.empty()) throw std::invalid_argument("langid: empty text");
  const SparseFeatures x = features(norm);
  if (x.empty()) return {};
  return softmax(scores(x));
}

LangIdPrediction LangIdModel::identify(std::string_view t) const {
  const Eigen::VectorXd p = predict_proba(t);
  if (p.size() == 0) return {"und", 0.0};
  Eigen::Index best = 0;
  p.maxCoeff(&best);
  return {labels_[static_cast<std::size_t>(best)], p(best)};
}

void LangIdModel::save(std::ostream& out) const {
  out << kMagic << '\n'
      << min_ngram_ << ' ' << max_ngram_ << ' ' << feature_dim_ << ' ' << labels_.size() << '\n';
  for (const auto& l : labels_) out << l << '\n';
  out.write(reinterpret_cast<const char*>(bias_.data()), static_cast<std::streamsize>(bias_.size() * sizeof(float)));
  out.write(reinterpret_cast<const char*>(weights_.data()),
            static_cast<std::streamsize>(weights_.size() * sizeof(float)));
}

LangIdModel LangIdModel::load(std::istream& in) {
  std::string magic;
  std::getline(in, magic);
  if (magic != kMagic) throw std::runtime_error("langid: bad model header");
  LangIdModel m;
  std::size_t n_labels = 0;
  in >> m.min_ngram_ >> m.max_ngram_ >> m.feature_dim_ >> n_labels;
  in.ignore(1);
  for (std::size_t i = 0; i < n_labels; ++i) {
    std::string l;
    std::getline(in, l);
    m.labels_.push_back(l);
  }
  const auto k = static_cast<Eigen::Index>(n_labels);
  m.bias_.resize(k);
  m.weights_.resize(static_cast<Eigen::Index>(m.feature_dim_), k);
  in.read(reinterpret_cast<char*>(m.bias_.data()), static_cast<std::streamsize>(k * sizeof(float)));
  in.read(reinterpret_cast<char*>(m.weights_.data()), static_cast<std::streamsize>(m.weights_.size() * sizeof(float)));
  if (!in) throw std::runtime_error("langid: truncated model file");
  return m;
}

}  // namespace babelforge::corpus
