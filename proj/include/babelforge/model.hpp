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

#ifndef BABELFORGE_MODEL_HPP_
#define BABELFORGE_MODEL_HPP_

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "babelforge/rng.hpp"
#include "babelforge/sampler.hpp"

// Post-layer-norm transformer encoder with a tied-weight MLM head, templated
// on the scalar type: float for training, double for gradient checks.
namespace babelforge::model {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct TransformerConfig {
  int layers = 2;
  int hidden = 64;
  int heads = 2;
  int ffn = 256;
  int vocab = 1000;
  int max_positions = 64;
  double dropout = 0.0;

  void validate() const;
  bool operator==(const TransformerConfig&) const = default;
};

// Exact number of scalars in ModelParams; the output projection is the token
// embedding and is counted once.
std::int64_t param_count(const TransformerConfig& config);

template <typename Scalar>
struct EncoderLayer {
  Matrix<Scalar> query, query_bias;
  Matrix<Scalar> key, key_bias;
  Matrix<Scalar> value, value_bias;
  Matrix<Scalar> attn_out, attn_out_bias;
  Matrix<Scalar> attn_norm_gain, attn_norm_bias;
  Matrix<Scalar> ffn_in, ffn_in_bias;    // [H x F], [1 x F]
  Matrix<Scalar> ffn_out, ffn_out_bias;  // [F x H], [1 x H]
  Matrix<Scalar> ffn_norm_gain, ffn_norm_bias;
};

// Biases and norm parameters are stored as 1-row matrices so that every
// tensor has the same type. There is no language embedding.
template <typename Scalar>
struct ModelParams {
  TransformerConfig config;
  Matrix<Scalar> token_embedding;     // [V x H], also the MLM output projection
  Matrix<Scalar> position_embedding;  // [S_max x H]
  Matrix<Scalar> embedding_norm_gain, embedding_norm_bias;
  std::vector<EncoderLayer<Scalar>> layers;
  Matrix<Scalar> head_dense, head_dense_bias;  // [H x H]
  Matrix<Scalar> head_norm_gain, head_norm_bias;
  Matrix<Scalar> output_bias;  // [1 x V]
};

template <typename Scalar>
struct NamedTensor {
  std::string name;
  Matrix<Scalar>* tensor;
};

template <typename Scalar>
std::vector<NamedTensor<Scalar>> named_tensors(ModelParams<Scalar>& p) {
  std::vector<NamedTensor<Scalar>> out{{"token_embedding", &p.token_embedding},
                                       {"position_embedding", &p.position_embedding},
                                       {"embedding_norm.gain", &p.embedding_norm_gain},
                                       {"embedding_norm.bias", &p.embedding_norm_bias}};
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    auto& L = p.layers[l];
    const std::string pre = "layer" + std::to_string(l) + ".";
    out.insert(out.end(), {{pre + "query", &L.query},
                           {pre + "query_bias", &L.query_bias},
                           {pre + "key", &L.key},
                           {pre + "key_bias", &L.key_bias},
                           {pre + "value", &L.value},
                           {pre + "value_bias", &L.value_bias},
                           {pre + "attn_out", &L.attn_out},
                           {pre + "attn_out_bias", &L.attn_out_bias},
                           {pre + "attn_norm.gain", &L.attn_norm_gain},
                           {pre + "attn_norm.bias", &L.attn_norm_bias},
                           {pre + "ffn_in", &L.ffn_in},
                           {pre + "ffn_in_bias", &L.ffn_in_bias},
                           {pre + "ffn_out", &L.ffn_out},
                           {pre + "ffn_out_bias", &L.ffn_out_bias},
                           {pre + "ffn_norm.gain", &L.ffn_norm_gain},
                           {pre + "ffn_norm.bias", &L.ffn_norm_bias}});
  }
  out.insert(out.end(), {{"head.dense", &p.head_dense},
                         {"head.dense_bias", &p.head_dense_bias},
                         {"head.norm.gain", &p.head_norm_gain},
                         {"head.norm.bias", &p.head_norm_bias},
                         {"head.output_bias", &p.output_bias}});
  return out;
}

template <typename Scalar>
std::vector<std::pair<std::string, const Matrix<Scalar>*>> named_tensors(const ModelParams<Scalar>& p) {
  std::vector<std::pair<std::string, const Matrix<Scalar>*>> out;
  for (auto& nt : named_tensors(const_cast<ModelParams<Scalar>&>(p))) out.emplace_back(nt.name, nt.tensor);
  return out;
}

// Parameters shaped for `config` and filled with zeros.
template <typename Scalar>
ModelParams<Scalar> zero_params(const TransformerConfig& config) {
  config.validate();
  const Eigen::Index H = config.hidden, F = config.ffn, V = config.vocab, S = config.max_positions;
  auto z = [](Eigen::Index r, Eigen::Index c) { return Matrix<Scalar>::Zero(r, c); };
  ModelParams<Scalar> p;
  p.config = config;
  p.token_embedding = z(V, H);
  p.position_embedding = z(S, H);
  p.embedding_norm_gain = z(1, H);
  p.embedding_norm_bias = z(1, H);
  p.layers.resize(static_cast<std::size_t>(config.layers));
  for (auto& L : p.layers) {
    L.query = z(H, H), L.key = z(H, H), L.value = z(H, H), L.attn_out = z(H, H);
    L.query_bias = z(1, H), L.key_bias = z(1, H), L.value_bias = z(1, H), L.attn_out_bias = z(1, H);
    L.attn_norm_gain = z(1, H), L.attn_norm_bias = z(1, H);
    L.ffn_in = z(H, F), L.ffn_in_bias = z(1, F), L.ffn_out = z(F, H), L.ffn_out_bias = z(1, H);
    L.ffn_norm_gain = z(1, H), L.ffn_norm_bias = z(1, H);
  }
  p.head_dense = z(H, H);
  p.head_dense_bias = z(1, H);
  p.head_norm_gain = z(1, H);
  p.head_norm_bias = z(1, H);
  p.output_bias = z(1, V);
  return p;
}

inline bool is_norm_gain(const std::string& name) { return name.ends_with("norm.gain"); }
inline bool is_weight_matrix(const std::string& name) {
  return !name.ends_with("bias") && !name.ends_with("norm.gain");
}

// Weights ~ N(0, 0.02), biases 0, norm gains 1. Deterministic per seed.
template <typename Scalar>
ModelParams<Scalar> init_params(const TransformerConfig& config, std::uint64_t seed) {
  ModelParams<Scalar> p = zero_params<Scalar>(config);
  Rng rng(seed);
  for (auto& [name, t] : named_tensors(p)) {
    if (is_norm_gain(name)) {
      t->setOnes();
    } else if (is_weight_matrix(name)) {
      for (Eigen::Index i = 0; i < t->size(); ++i) t->data()[i] = static_cast<Scalar>(0.02 * rng.normal());
    }
  }
  return p;
}

template <typename To, typename From>
ModelParams<To> cast_params(const ModelParams<From>& src) {
  ModelParams<To> dst = zero_params<To>(src.config);
  auto s = named_tensors(src);
  auto d = named_tensors(dst);
  for (std::size_t i = 0; i < s.size(); ++i) *d[i].tensor = s[i].second->template cast<To>();
  return dst;
}

template <typename Scalar>
std::int64_t count_scalars(const ModelParams<Scalar>& p) {
  std::int64_t n = 0;
  for (const auto& [_, t] : named_tensors(p)) n += t->size();
  return n;
}

namespace detail {

inline constexpr double kNormEps = 1e-5;

template <typename Scalar>
Scalar gelu(Scalar x) {
  return Scalar(0.5) * x * (Scalar(1) + std::erf(x / Scalar(std::numbers::sqrt2)));
}

template <typename Scalar>
Scalar gelu_grad(Scalar x) {
  const Scalar cdf = Scalar(0.5) * (Scalar(1) + std::erf(x / Scalar(std::numbers::sqrt2)));
  const Scalar pdf = std::exp(Scalar(-0.5) * x * x) / Scalar(std::sqrt(2.0 * std::numbers::pi));
  return cdf + x * pdf;
}

template <typename Scalar>
struct NormCache {
  Matrix<Scalar> normalized;  // (x - mean) * rstd
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> rstd;
};

template <typename Scalar>
Matrix<Scalar> layer_norm(const Matrix<Scalar>& x, const Matrix<Scalar>& gain, const Matrix<Scalar>& bias,
                          NormCache<Scalar>& cache) {
  const Eigen::Index n = x.rows(), h = x.cols();
  cache.normalized.resize(n, h);
  cache.rstd.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Scalar mean = x.row(i).mean();
    const Scalar var = (x.row(i).array() - mean).square().mean();
    const Scalar rstd = Scalar(1) / std::sqrt(var + Scalar(kNormEps));
    cache.rstd(i) = rstd;
    cache.normalized.row(i) = (x.row(i).array() - mean) * rstd;
  }
  Matrix<Scalar> y = cache.normalized.array().rowwise() * gain.row(0).array();
  y.rowwise() += bias.row(0);
  return y;
}

template <typename Scalar>
Matrix<Scalar> layer_norm_backward(const Matrix<Scalar>& dy, const Matrix<Scalar>& gain, const NormCache<Scalar>& cache,
                                   Matrix<Scalar>& dgain, Matrix<Scalar>& dbias) {
  dgain.row(0) += (dy.array() * cache.normalized.array()).colwise().sum().matrix();
  dbias.row(0) += dy.colwise().sum();
  const Matrix<Scalar> dxhat = dy.array().rowwise() * gain.row(0).array();
  Matrix<Scalar> dx(dy.rows(), dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    const Scalar mean_d = dxhat.row(i).mean();
    const Scalar mean_dx = (dxhat.row(i).array() * cache.normalized.row(i).array()).mean();
    dx.row(i) = cache.rstd(i) * (dxhat.row(i).array() - mean_d - cache.normalized.row(i).array() * mean_dx);
  }
  return dx;
}

template <typename Scalar>
Matrix<Scalar> dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
  Matrix<Scalar> m(rows, cols);
  const Scalar keep_scale = Scalar(1.0 / (1.0 - rate));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform() < rate ? Scalar(0) : keep_scale;
  return m;
}

template <typename Scalar>
struct LayerCache {
  Matrix<Scalar> input, q, k, v, probs_flat, context, attn_out;
  NormCache<Scalar> attn_norm;
  Matrix<Scalar> h1, ffn_pre, ffn_act;
  NormCache<Scalar> ffn_norm;
  Matrix<Scalar> attn_drop, ffn_drop;
  // probs[b][h] is the [S x S] attention matrix of row b, head h.
  std::vector<std::vector<Matrix<Scalar>>> probs;
};

template <typename Scalar>
struct ForwardCache {
  Eigen::Index batch = 0, seq = 0;
  NormCache<Scalar> embedding_norm;
  Matrix<Scalar> embedding_drop;
  std::vector<LayerCache<Scalar>> layers;
  Matrix<Scalar> final_hidden;  // [B*S x H]
  std::vector<Eigen::Index> label_positions;
  std::vector<int> targets;
  Matrix<Scalar> head_in, head_pre, head_act;
  NormCache<Scalar> head_norm;
  Matrix<Scalar> head_out;
};

}  // namespace detail

template <typename Scalar>
struct ForwardResult {
  Matrix<Scalar> logits;       // [N_labeled x V]
  std::vector<int> targets;    // original ids at labeled positions, row-major order
  Matrix<Scalar> pooled;       // [B x H], mean over non-pad positions
};

namespace detail {

template <typename Scalar>
void check_batch(const ModelParams<Scalar>& p, const sampler::MaskedBatch& batch) {
  if (batch.cols() > p.config.max_positions) {
    throw std::invalid_argument("forward: sequence length " + std::to_string(batch.cols()) + " exceeds S_max " +
                                std::to_string(p.config.max_positions));
  }
  if (batch.attn_mask.rows() != batch.rows() || batch.attn_mask.cols() != batch.cols()) {
    throw std::invalid_argument("forward: attn_mask shape mismatch");
  }
  for (Eigen::Index r = 0; r < batch.rows(); ++r) {
    if (!batch.attn_mask.row(r).any()) throw std::invalid_argument("forward: empty row");
  }
  for (Eigen::Index i = 0; i < batch.tokens.size(); ++i) {
    const auto id = batch.tokens.data()[i];
    if (id < 0 || id >= p.config.vocab) throw std::invalid_argument("forward: token id out of range");
  }
}

template <typename Scalar>
ForwardResult<Scalar> forward_impl(const ModelParams<Scalar>& p, const sampler::MaskedBatch& batch, bool train_mode,
                                   Rng* rng, ForwardCache<Scalar>& cache) {
  check_batch(p, batch);
  const auto& cfg = p.config;
  const Eigen::Index B = batch.rows(), S = batch.cols(), H = cfg.hidden, A = cfg.heads, D = H / A;
  const Eigen::Index T = B * S;
  const bool use_dropout = train_mode && cfg.dropout > 0.0;
  if (use_dropout && rng == nullptr) throw std::invalid_argument("forward: dropout requires an rng");
  const Scalar scale = Scalar(1.0 / std::sqrt(static_cast<double>(D)));
  cache.batch = B;
  cache.seq = S;

  Matrix<Scalar> x(T, H);
  for (Eigen::Index b = 0; b < B; ++b) {
    for (Eigen::Index s = 0; s < S; ++s) {
      x.row(b * S + s) = p.token_embedding.row(batch.tokens(b, s)) + p.position_embedding.row(s);
    }
  }
  x = layer_norm(x, p.embedding_norm_gain, p.embedding_norm_bias, cache.embedding_norm);
  if (use_dropout) {
    cache.embedding_drop = dropout_mask<Scalar>(T, H, cfg.dropout, *rng);
    x = x.cwiseProduct(cache.embedding_drop);
  }

  cache.layers.resize(p.layers.size());
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const auto& L = p.layers[l];
    auto& c = cache.layers[l];
    c.input = x;
    c.q = x * L.query;
    c.q.rowwise() += L.query_bias.row(0);
    c.k = x * L.key;
    c.k.rowwise() += L.key_bias.row(0);
    c.v = x * L.value;
    c.v.rowwise() += L.value_bias.row(0);
    c.context.resize(T, H);
    c.probs.assign(static_cast<std::size_t>(B), std::vector<Matrix<Scalar>>(static_cast<std::size_t>(A)));
    for (Eigen::Index b = 0; b < B; ++b) {
      for (Eigen::Index h = 0; h < A; ++h) {
        const auto qh = c.q.block(b * S, h * D, S, D);
        const auto kh = c.k.block(b * S, h * D, S, D);
        const auto vh = c.v.block(b * S, h * D, S, D);
        Matrix<Scalar> scores = (qh * kh.transpose()) * scale;
        for (Eigen::Index i = 0; i < S; ++i) {
          Scalar mx = -std::numeric_limits<Scalar>::infinity();
          for (Eigen::Index j = 0; j < S; ++j) {
            if (batch.attn_mask(b, j)) mx = std::max(mx, scores(i, j));
          }
          Scalar sum = 0;
          for (Eigen::Index j = 0; j < S; ++j) {
            const Scalar e = batch.attn_mask(b, j) ? std::exp(scores(i, j) - mx) : Scalar(0);
            scores(i, j) = e;
            sum += e;
          }
          scores.row(i) /= sum;
        }
        c.context.block(b * S, h * D, S, D) = scores * vh;
        c.probs[static_cast<std::size_t>(b)][static_cast<std::size_t>(h)] = std::move(scores);
      }
    }
    c.attn_out = c.context * L.attn_out;
    c.attn_out.rowwise() += L.attn_out_bias.row(0);
    if (use_dropout) {
      c.attn_drop = dropout_mask<Scalar>(T, H, cfg.dropout, *rng);
      c.attn_out = c.attn_out.cwiseProduct(c.attn_drop);
    }
    c.h1 = layer_norm(Matrix<Scalar>(x + c.attn_out), L.attn_norm_gain, L.attn_norm_bias, c.attn_norm);
    c.ffn_pre = c.h1 * L.ffn_in;
    c.ffn_pre.rowwise() += L.ffn_in_bias.row(0);
    c.ffn_act = c.ffn_pre.unaryExpr([](Scalar v) { return gelu(v); });
    Matrix<Scalar> ff = c.ffn_act * L.ffn_out;
    ff.rowwise() += L.ffn_out_bias.row(0);
    if (use_dropout) {
      c.ffn_drop = dropout_mask<Scalar>(T, H, cfg.dropout, *rng);
      ff = ff.cwiseProduct(c.ffn_drop);
    }
    x = layer_norm(Matrix<Scalar>(c.h1 + ff), L.ffn_norm_gain, L.ffn_norm_bias, c.ffn_norm);
  }
  cache.final_hidden = x;

  ForwardResult<Scalar> result;
  result.pooled.resize(B, H);
  for (Eigen::Index b = 0; b < B; ++b) {
    Eigen::Matrix<Scalar, 1, Eigen::Dynamic> acc = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>::Zero(H);
    Scalar n = 0;
    for (Eigen::Index s = 0; s < S; ++s) {
      if (!batch.attn_mask(b, s)) continue;
      acc += x.row(b * S + s);
      n += 1;
    }
    result.pooled.row(b) = acc / n;
  }

  cache.label_positions.clear();
  cache.targets.clear();
  for (Eigen::Index b = 0; b < B; ++b) {
    for (Eigen::Index s = 0; s < S; ++s) {
      const auto label = batch.labels(b, s);
      if (label == sampler::kIgnoreLabel) continue;
      if (label < 0 || label >= cfg.vocab) throw std::invalid_argument("forward: label id out of range");
      cache.label_positions.push_back(b * S + s);
      cache.targets.push_back(label);
    }
  }
  const auto N = static_cast<Eigen::Index>(cache.label_positions.size());
  cache.head_in.resize(N, H);
  for (Eigen::Index i = 0; i < N; ++i) cache.head_in.row(i) = x.row(cache.label_positions[static_cast<std::size_t>(i)]);
  cache.head_pre = cache.head_in * p.head_dense;
  cache.head_pre.rowwise() += p.head_dense_bias.row(0);
  cache.head_act = cache.head_pre.unaryExpr([](Scalar v) { return gelu(v); });
  cache.head_out = layer_norm(cache.head_act, p.head_norm_gain, p.head_norm_bias, cache.head_norm);
  result.logits = cache.head_out * p.token_embedding.transpose();
  result.logits.rowwise() += p.output_bias.row(0);
  result.targets = cache.targets;
  return result;
}

}  // namespace detail

// Logits at labeled positions plus mean-pooled final states. Dropout is only
// active in train_mode (and then requires `rng`).
template <typename Scalar>
ForwardResult<Scalar> forward(const ModelParams<Scalar>& params, const sampler::MaskedBatch& batch,
                              bool train_mode = false, Rng* rng = nullptr) {
  detail::ForwardCache<Scalar> cache;
  return detail::forward_impl(params, batch, train_mode, rng, cache);
}

template <typename Scalar>
struct LossAndGradient {
  Scalar loss = 0;
  Matrix<Scalar> grad;  // d loss / d logits
};

// Mean cross-entropy over the rows of `logits`.
template <typename Scalar>
LossAndGradient<Scalar> mlm_loss(const Matrix<Scalar>& logits, const std::vector<int>& targets) {
  if (targets.empty() || logits.rows() == 0) throw std::invalid_argument("mlm_loss: no labeled positions");
  if (static_cast<Eigen::Index>(targets.size()) != logits.rows()) {
    throw std::invalid_argument("mlm_loss: targets/logits size mismatch");
  }
  const Eigen::Index N = logits.rows();
  LossAndGradient<Scalar> out;
  out.grad.resize(N, logits.cols());
  double total = 0.0;
  for (Eigen::Index i = 0; i < N; ++i) {
    const Scalar mx = logits.row(i).maxCoeff();
    const auto shifted = (logits.row(i).array() - mx).eval();
    const Scalar lse = std::log(shifted.exp().sum());
    const int t = targets[static_cast<std::size_t>(i)];
    total += static_cast<double>(lse - shifted(t));
    out.grad.row(i) = (shifted - lse).exp() / Scalar(N);
    out.grad(i, t) -= Scalar(1) / Scalar(N);
  }
  out.loss = static_cast<Scalar>(total / static_cast<double>(N));
  return out;
}

template <typename Scalar>
struct BackwardResult {
  Scalar loss = 0;
  Eigen::Index num_labels = 0;
  ModelParams<Scalar> grads;
  ForwardResult<Scalar> forward;
};

// Loss and exact gradients with respect to every parameter tensor.
template <typename Scalar>
BackwardResult<Scalar> backward(const ModelParams<Scalar>& p, const sampler::MaskedBatch& batch, bool train_mode = false,
                                Rng* rng = nullptr) {
  using detail::layer_norm_backward;
  detail::ForwardCache<Scalar> cache;
  BackwardResult<Scalar> out;
  out.forward = detail::forward_impl(p, batch, train_mode, rng, cache);
  const LossAndGradient<Scalar> lg = mlm_loss(out.forward.logits, out.forward.targets);
  out.loss = lg.loss;
  out.num_labels = out.forward.logits.rows();

  const auto& cfg = p.config;
  const Eigen::Index B = cache.batch, S = cache.seq, H = cfg.hidden, A = cfg.heads, D = H / A, T = B * S;
  const Scalar scale = Scalar(1.0 / std::sqrt(static_cast<double>(D)));
  ModelParams<Scalar> g = zero_params<Scalar>(cfg);

  // Head.
  const Matrix<Scalar>& dlogits = lg.grad;
  g.output_bias.row(0) = dlogits.colwise().sum();
  g.token_embedding.noalias() += dlogits.transpose() * cache.head_out;
  Matrix<Scalar> dhead = dlogits * p.token_embedding;
  dhead = layer_norm_backward(dhead, p.head_norm_gain, cache.head_norm, g.head_norm_gain, g.head_norm_bias);
  dhead = dhead.cwiseProduct(cache.head_pre.unaryExpr([](Scalar v) { return detail::gelu_grad(v); }));
  g.head_dense.noalias() += cache.head_in.transpose() * dhead;
  g.head_dense_bias.row(0) += dhead.colwise().sum();
  const Matrix<Scalar> dhead_in = dhead * p.head_dense.transpose();

  Matrix<Scalar> dx = Matrix<Scalar>::Zero(T, H);
  for (std::size_t i = 0; i < cache.label_positions.size(); ++i) {
    dx.row(cache.label_positions[i]) += dhead_in.row(static_cast<Eigen::Index>(i));
  }

  for (std::size_t l = p.layers.size(); l-- > 0;) {
    const auto& L = p.layers[l];
    auto& G = g.layers[l];
    const auto& c = cache.layers[l];

    Matrix<Scalar> ds2 = layer_norm_backward(dx, L.ffn_norm_gain, c.ffn_norm, G.ffn_norm_gain, G.ffn_norm_bias);
    Matrix<Scalar> dff = ds2;
    if (c.ffn_drop.size()) dff = dff.cwiseProduct(c.ffn_drop);
    G.ffn_out.noalias() += c.ffn_act.transpose() * dff;
    G.ffn_out_bias.row(0) += dff.colwise().sum();
    Matrix<Scalar> dpre = (dff * L.ffn_out.transpose())
                              .cwiseProduct(c.ffn_pre.unaryExpr([](Scalar v) { return detail::gelu_grad(v); }));
    G.ffn_in.noalias() += c.h1.transpose() * dpre;
    G.ffn_in_bias.row(0) += dpre.colwise().sum();
    Matrix<Scalar> dh1 = ds2;
    dh1.noalias() += dpre * L.ffn_in.transpose();

    Matrix<Scalar> ds1 = layer_norm_backward(dh1, L.attn_norm_gain, c.attn_norm, G.attn_norm_gain, G.attn_norm_bias);
    Matrix<Scalar> dao = ds1;
    if (c.attn_drop.size()) dao = dao.cwiseProduct(c.attn_drop);
    G.attn_out.noalias() += c.context.transpose() * dao;
    G.attn_out_bias.row(0) += dao.colwise().sum();
    const Matrix<Scalar> dctx = dao * L.attn_out.transpose();

    Matrix<Scalar> dq(T, H), dk(T, H), dv(T, H);
    for (Eigen::Index b = 0; b < B; ++b) {
      for (Eigen::Index h = 0; h < A; ++h) {
        const Matrix<Scalar>& P = c.probs[static_cast<std::size_t>(b)][static_cast<std::size_t>(h)];
        const auto dctx_h = dctx.block(b * S, h * D, S, D);
        const auto qh = c.q.block(b * S, h * D, S, D);
        const auto kh = c.k.block(b * S, h * D, S, D);
        const auto vh = c.v.block(b * S, h * D, S, D);
        const Matrix<Scalar> dP = dctx_h * vh.transpose();
        dv.block(b * S, h * D, S, D) = P.transpose() * dctx_h;
        Matrix<Scalar> dscores = P.cwiseProduct(dP);
        const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> rowdot = dscores.rowwise().sum();
        dscores -= P.cwiseProduct(rowdot.replicate(1, S));
        dscores *= scale;
        dq.block(b * S, h * D, S, D) = dscores * kh;
        dk.block(b * S, h * D, S, D) = dscores.transpose() * qh;
      }
    }
    G.query.noalias() += c.input.transpose() * dq;
    G.key.noalias() += c.input.transpose() * dk;
    G.value.noalias() += c.input.transpose() * dv;
    G.query_bias.row(0) += dq.colwise().sum();
    G.key_bias.row(0) += dk.colwise().sum();
    G.value_bias.row(0) += dv.colwise().sum();
    dx = ds1;
    dx.noalias() += dq * L.query.transpose();
    dx.noalias() += dk * L.key.transpose();
    dx.noalias() += dv * L.value.transpose();
  }

  if (cache.embedding_drop.size()) dx = dx.cwiseProduct(cache.embedding_drop);
  const Matrix<Scalar> demb =
      layer_norm_backward(dx, p.embedding_norm_gain, cache.embedding_norm, g.embedding_norm_gain, g.embedding_norm_bias);
  for (Eigen::Index b = 0; b < B; ++b) {
    for (Eigen::Index s = 0; s < S; ++s) {
      g.token_embedding.row(batch.tokens(b, s)) += demb.row(b * S + s);
      g.position_embedding.row(s) += demb.row(b * S + s);
    }
  }
  out.grads = std::move(g);
  return out;
}

}  // namespace babelforge::model

#endif  // BABELFORGE_MODEL_HPP_
