#pragma once

// Neural building blocks: linear layers, scaled dot-product attention,
// multihead attention, and the post-norm transformer encoder block
//   u   = LN(Q + MHAtt(Q, K, V))
//   out = LN(u + FFL(u)),   FFL(u) = W2 tanh(W1 u + b1) + b2.

#include <cmath>
#include <string>
#include <vector>

#include "crossfuse/rng.hpp"
#include "crossfuse/tensor.hpp"
#include "crossfuse/util.hpp"

namespace crossfuse {

// Additive score for keys that must not be attended to. Finite so softmax
// stays well-defined, yet small enough that masked weights underflow to 0.
constexpr double kMaskedScore = -1e30;

struct NamedParam {
  std::string name;
  Tensor tensor;
};

inline Tensor init_normal(Shape shape, Rng& rng, double stddev, bool trainable) {
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = rng.normal(0.0, stddev);
  return Tensor::from(std::move(shape), std::move(v), trainable);
}

class LinearLayer {
 public:
  LinearLayer() = default;
  LinearLayer(size_t in, size_t out, Rng& rng, bool trainable)
      : w_(init_normal({in, out}, rng, 0.02, trainable)),
        b_(Tensor::zeros({out}, trainable)) {}

  // x (..., in) -> (..., out)
  Tensor forward(const Tensor& x) const { return add(matmul(x, w_), b_); }

  size_t in_features() const { return w_.shape()[0]; }
  size_t out_features() const { return w_.shape()[1]; }
  const Tensor& weight() const { return w_; }
  const Tensor& bias() const { return b_; }

  void collect_params(const std::string& prefix, std::vector<NamedParam>& out) const {
    out.push_back({prefix + ".w", w_});
    out.push_back({prefix + ".b", b_});
  }

 private:
  Tensor w_, b_;
};

class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(size_t d, bool trainable, double eps = 1e-12)
      : gain_(Tensor::full({d}, 1.0, trainable)),
        shift_(Tensor::zeros({d}, trainable)),
        eps_(eps) {}

  Tensor forward(const Tensor& x) const { return layer_norm(x, gain_, shift_, eps_); }

  void collect_params(const std::string& prefix, std::vector<NamedParam>& out) const {
    out.push_back({prefix + ".gain", gain_});
    out.push_back({prefix + ".shift", shift_});
  }

 private:
  Tensor gain_, shift_;
  double eps_ = 1e-12;
};

// Att(Q, K, V) = softmax(Q K^T / sqrt(d)) V over the last two axes.
// additive_mask, if given, is added to the scores before the softmax.
// weights_out, if given, receives the post-softmax attention weights.
inline Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                   const Tensor* additive_mask = nullptr,
                                   Tensor* weights_out = nullptr) {
  if (q.rank() < 2 || k.rank() < 2 || v.rank() < 2)
    throw ShapeError("scaled_dot_attention requires rank >= 2 operands");
  size_t d = q.shape().back();
  if (k.shape().back() != d)
    throw ShapeError(strprintf("scaled_dot_attention: query dim %zu != key dim %zu", d,
                               k.shape().back()));
  size_t l_kv = k.shape()[k.rank() - 2];
  if (l_kv == 0) throw ShapeError("scaled_dot_attention: empty key/value sequence");
  if (v.shape()[v.rank() - 2] != l_kv)
    throw ShapeError(strprintf("scaled_dot_attention: %zu keys but %zu values", l_kv,
                               v.shape()[v.rank() - 2]));
  Tensor scores = scale(matmul(q, transpose_last(k)), 1.0 / std::sqrt(static_cast<double>(d)));
  if (additive_mask) scores = add(scores, *additive_mask);
  Tensor w = softmax(scores);
  if (weights_out) *weights_out = w;
  return matmul(w, v);
}

// (bs, l_kv) 0/1 key visibility -> (bs, l_q, l_kv) additive mask tensor.
inline Tensor additive_key_padding_mask(const std::vector<std::vector<int>>& key_mask, size_t l_q) {
  size_t bs = key_mask.size();
  if (bs == 0) throw ShapeError("additive_key_padding_mask: empty batch");
  size_t l_kv = key_mask[0].size();
  std::vector<double> m(bs * l_q * l_kv, 0.0);
  for (size_t b = 0; b < bs; ++b) {
    if (key_mask[b].size() != l_kv)
      throw ShapeError("additive_key_padding_mask: ragged key mask");
    for (size_t j = 0; j < l_kv; ++j) {
      if (key_mask[b][j]) continue;
      for (size_t i = 0; i < l_q; ++i) m[(b * l_q + i) * l_kv + j] = kMaskedScore;
    }
  }
  return Tensor::from({bs, l_q, l_kv}, std::move(m));
}

class MultiheadAttentionBlock {
 public:
  MultiheadAttentionBlock() = default;
  MultiheadAttentionBlock(size_t d_model, size_t n_heads, Rng& rng, bool trainable)
      : d_model_(d_model), n_heads_(n_heads) {
    if (n_heads == 0 || d_model % n_heads != 0)
      throw ShapeError(strprintf("multihead attention: d_model %zu not divisible into %zu heads",
                                 d_model, n_heads));
    size_t d_head = d_model / n_heads;
    for (size_t m = 0; m < n_heads; ++m) {
      wq_.emplace_back(d_model, d_head, rng, trainable);
      wk_.emplace_back(d_model, d_head, rng, trainable);
      wv_.emplace_back(d_model, d_head, rng, trainable);
    }
    wo_ = LinearLayer(d_model, d_model, rng, trainable);
  }

  Tensor forward(const Tensor& q, const Tensor& k, const Tensor& v,
                 const Tensor* additive_mask = nullptr) const {
    Tensor heads;
    for (size_t m = 0; m < n_heads_; ++m) {
      Tensor h = scaled_dot_attention(wq_[m].forward(q), wk_[m].forward(k), wv_[m].forward(v),
                                      additive_mask);
      heads = m == 0 ? h : concat(heads, h);
    }
    return wo_.forward(heads);
  }

  size_t n_heads() const { return n_heads_; }
  size_t d_model() const { return d_model_; }
  const LinearLayer& head_query(size_t m) const { return wq_.at(m); }
  const LinearLayer& head_key(size_t m) const { return wk_.at(m); }
  const LinearLayer& head_value(size_t m) const { return wv_.at(m); }
  const LinearLayer& output_proj() const { return wo_; }

  void collect_params(const std::string& prefix, std::vector<NamedParam>& out) const {
    for (size_t m = 0; m < n_heads_; ++m) {
      std::string hp = prefix + ".head" + std::to_string(m);
      wq_[m].collect_params(hp + ".q", out);
      wk_[m].collect_params(hp + ".k", out);
      wv_[m].collect_params(hp + ".v", out);
    }
    wo_.collect_params(prefix + ".out", out);
  }

 private:
  size_t d_model_ = 0, n_heads_ = 0;
  std::vector<LinearLayer> wq_, wk_, wv_;
  LinearLayer wo_;
};

class TransformerEncoderBlock {
 public:
  TransformerEncoderBlock() = default;
  TransformerEncoderBlock(size_t d_model, size_t n_heads, size_t d_ff, Rng& rng, bool trainable)
      : mha_(d_model, n_heads, rng, trainable),
        ln1_(d_model, trainable),
        fc1_(d_model, d_ff, rng, trainable),
        fc2_(d_ff, d_model, rng, trainable),
        ln2_(d_model, trainable) {}

  Tensor forward(const Tensor& q, const Tensor& k, const Tensor& v,
                 const Tensor* additive_mask = nullptr) const {
    Tensor u = ln1_.forward(add(q, mha_.forward(q, k, v, additive_mask)));
    Tensor ff = fc2_.forward(tanh(fc1_.forward(u)));
    return ln2_.forward(add(u, ff));
  }

  void collect_params(const std::string& prefix, std::vector<NamedParam>& out) const {
    mha_.collect_params(prefix + ".mha", out);
    ln1_.collect_params(prefix + ".ln1", out);
    fc1_.collect_params(prefix + ".ff1", out);
    fc2_.collect_params(prefix + ".ff2", out);
    ln2_.collect_params(prefix + ".ln2", out);
  }

  // 4d^2+4d attention projections, two layer norms, and the d<->d_ff pair.
  static size_t param_count(size_t d_model, size_t d_ff) {
    return 4 * d_model * d_model + 4 * d_model + 4 * d_model +
           d_model * d_ff + d_ff + d_ff * d_model + d_model;
  }

 private:
  MultiheadAttentionBlock mha_;
  LayerNorm ln1_;
  LinearLayer fc1_, fc2_;
  LayerNorm ln2_;
};

}  // namespace crossfuse
