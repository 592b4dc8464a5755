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

#ifndef BABELFORGE_LANGID_HPP_
#define BABELFORGE_LANGID_HPP_

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace babelforge::corpus {

struct LabeledText {
  std::string text;
  std::string lang;
};

struct LangIdOptions {
  int min_ngram = 1;
  int max_ngram = 4;
  std::size_t feature_dim = std::size_t{1} << 18;
  int epochs = 5;
  double lr = 0.5;
  std::uint64_t seed = 0;
};

struct LangIdPrediction {
  std::string lang;
  double confidence = 0.0;
};

// Multinomial logistic regression over hashed character n-grams. Feature
// values are n-gram frequencies normalized by the total n-gram count, so a
// text and its repetition map to nearly the same point.
class LangIdModel {
 public:
  using SparseFeatures = std::vector<std::pair<std::uint32_t, float>>;
  using WeightMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  // Throws if fewer than two languages are present. Texts that are empty
  // after normalization are skipped and counted in `skipped`.
  static LangIdModel train(std::span<const LabeledText> data, const LangIdOptions& options,
                           std::size_t* skipped = nullptr);

  // Softmax over the languages; throws on text that normalizes to empty.
  // Text shorter than the minimum n-gram length yields an empty vector.
  Eigen::VectorXd predict_proba(std::string_view text) const;
  // ("und", 0) when the text is shorter than the minimum n-gram length.
  LangIdPrediction identify(std::string_view text) const;

  SparseFeatures features(std::string_view normalized_text) const;

  const std::vector<std::string>& labels() const { return labels_; }
  const WeightMatrix& weights() const { return weights_; }
  std::pair<int, int> ngram_range() const { return {min_ngram_, max_ngram_}; }
  std::size_t feature_dim() const { return feature_dim_; }

  void save(std::ostream& out) const;
  static LangIdModel load(std::istream& in);

 private:
  Eigen::VectorXd scores(const SparseFeatures& x) const;

  int min_ngram_ = 1;
  int max_ngram_ = 4;
  std::size_t feature_dim_ = 0;
  WeightMatrix weights_;  // [feature_dim x n_languages]
  Eigen::VectorXf bias_;
  std::vector<std::string> labels_;
};

}  // namespace babelforge::corpus

#endif  // BABELFORGE_LANGID_HPP_
