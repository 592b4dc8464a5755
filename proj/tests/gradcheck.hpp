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

#ifndef BABELFORGE_TESTS_GRADCHECK_HPP_
#define BABELFORGE_TESTS_GRADCHECK_HPP_

#include <algorithm>
#include <cmath>
#include <map>
#include <regex>
#include <string>

#include "babelforge/model.hpp"
#include "babelforge/rng.hpp"
#include "babelforge/sampler.hpp"

namespace babelforge::testing {

using model::ModelParams;
using model::Matrix;
using model::TransformerConfig;
using model::backward;
using model::forward;
using model::init_params;
using model::mlm_loss;
using model::named_tensors;

// Random batch with a padded tail on the last row and ~30% labeled positions.
inline sampler::MaskedBatch random_batch(const TransformerConfig& cfg, int rows, int cols, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<int>> tokens, labels;
  for (int r = 0; r < rows; ++r) {
    std::vector<int> t(static_cast<std::size_t>(cols)), l(static_cast<std::size_t>(cols), sampler::kIgnoreLabel);
    const int len = r == rows - 1 ? std::max(2, cols - 2) : cols;
    for (int c = 0; c < cols; ++c) {
      if (c >= len) {
        t[static_cast<std::size_t>(c)] = 1;
        continue;
      }
      t[static_cast<std::size_t>(c)] = 5 + static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.vocab - 5)));
      if (c == 1 || rng.uniform() < 0.3) {
        l[static_cast<std::size_t>(c)] = t[static_cast<std::size_t>(c)];
        if (rng.uniform() < 0.8) t[static_cast<std::size_t>(c)] = 4;
      }
    }
    tokens.push_back(std::move(t));
    labels.push_back(std::move(l));
  }
  return sampler::make_batch(tokens, labels, std::vector<std::string>(static_cast<std::size_t>(rows), "x"), 1);
}

// Tensor kind = name with the layer index removed ("layer1.query" -> "query").
inline std::string tensor_kind(const std::string& name) {
  static const std::regex layer_prefix("^layer[0-9]+\\.");
  return std::regex_replace(name, layer_prefix, "");
}

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst;
  int coordinates = 0;
  int kinds = 0;
};

// Central differences in double precision against backward(). Relative error
// is |a - n| / max(|a|, |n|, floor); the floor only matters for coordinates
// whose gradient is zero up to rounding (key biases, for example).
inline GradCheckReport finite_difference_check(const TransformerConfig& cfg, std::uint64_t seed, int per_kind, double spread = 0.1,
                                               double eps = 1e-3, double floor = 1e-7) {
  ModelParams<double> p = init_params<double>(cfg, seed);
  // Larger-than-default weights so every path carries signal.
  Rng perturb(seed + 1);
  for (auto& nt : named_tensors(p)) {
    for (Eigen::Index i = 0; i < nt.tensor->size(); ++i) nt.tensor->data()[i] += spread * perturb.normal();
  }
  const auto batch = random_batch(cfg, 3, std::min(cfg.max_positions, 7), seed + 2);
  auto analytic = backward(p, batch);

  auto loss = [&] {
    const auto f = forward(p, batch);
    return mlm_loss(f.logits, f.targets).loss;
  };
  auto grads = named_tensors(analytic.grads);
  auto params = named_tensors(p);
  Rng pick(seed + 3);
  std::map<std::string, std::vector<std::size_t>> tensors_of_kind;
  for (std::size_t t = 0; t < params.size(); ++t) tensors_of_kind[tensor_kind(params[t].name)].push_back(t);

  GradCheckReport report;
  for (const auto& [kind, idx] : tensors_of_kind) {
    ++report.kinds;
    for (int n = 0; n < per_kind; ++n) {
      const std::size_t t = idx[pick.below(idx.size())];
      Matrix<double>& w = *params[t].tensor;
      const auto coord = static_cast<Eigen::Index>(pick.below(static_cast<std::uint64_t>(w.size())));
      const double orig = w.data()[coord];
      auto at = [&](double delta) {
        w.data()[coord] = orig + delta;
        const double l = loss();
        w.data()[coord] = orig;
        return l;
      };
      // Five-point central stencil: truncation error O(eps^4).
      const double numeric = (8.0 * (at(eps) - at(-eps)) - (at(2 * eps) - at(-2 * eps))) / (12.0 * eps);
      const double a = grads[t].tensor->data()[coord];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      ++report.coordinates;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst = params[t].name + "[" + std::to_string(coord) + "] analytic=" + std::to_string(a) +
                       " numeric=" + std::to_string(numeric);
      }
    }
  }
  return report;
}

}  // namespace babelforge::testing

#endif  // BABELFORGE_TESTS_GRADCHECK_HPP_
