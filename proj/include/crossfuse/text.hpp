#pragma once

// Word-level vocabulary, fixed-length tokenization, and a miniature
// BERT-style encoder: token + learned position embeddings followed by
// self-attention transformer blocks, with a tanh pooler over the leading
// marker position. Frozen encoders memoize per-sequence states, since
// identical token ids always produce identical rows.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "crossfuse/nn.hpp"
#include "crossfuse/rng.hpp"
#include "crossfuse/tensor.hpp"
#include "crossfuse/util.hpp"

namespace crossfuse {

struct TokenSequence {
  std::vector<int> ids;   // length len_max
  std::vector<int> mask;  // 1 = real token, 0 = pad
  size_t n_tokens = 0;
};

class Vocabulary {
 public:
  static constexpr int kPad = 0, kUnk = 1, kCls = 2, kSep = 3;

  // Lowercased word-level split: alphanumeric runs are words, every other
  // non-space byte stands alone as a token.
  static std::vector<std::string> word_tokens(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
      if (!cur.empty()) {
        out.push_back(cur);
        cur.clear();
      }
    };
    for (unsigned char c : text) {
      if (std::isalnum(c)) {
        cur.push_back(static_cast<char>(std::tolower(c)));
      } else {
        flush();
        if (!std::isspace(c)) out.push_back(std::string(1, static_cast<char>(c)));
      }
    }
    flush();
    return out;
  }

  static Vocabulary build(const std::vector<std::string>& corpus, size_t target_size) {
    if (corpus.empty()) throw DataError("cannot build a vocabulary from an empty corpus");
    if (target_size < 5)
      throw ValueError(strprintf("vocabulary size %zu leaves no room beyond reserved tokens",
                                 target_size));
    std::unordered_map<std::string, size_t> freq;
    for (const auto& text : corpus)
      for (auto& tok : word_tokens(text)) ++freq[tok];
    std::vector<std::pair<std::string, size_t>> ranked(freq.begin(), freq.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    Vocabulary v;
    v.tokens_ = {"[PAD]", "[UNK]", "[CLS]", "[SEP]"};
    size_t keep = std::min(ranked.size(), target_size - 4);
    for (size_t i = 0; i < keep; ++i) v.tokens_.push_back(ranked[i].first);
    v.rebuild_index();
    return v;
  }

  size_t size() const { return tokens_.size(); }

  int id(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? kUnk : it->second;
  }

  bool contains(const std::string& token) const { return index_.count(token) > 0; }

  const std::string& token_at(size_t id) const {
    if (id >= tokens_.size())
      throw ValueError(strprintf("token id %zu out of range [0, %zu)", id, tokens_.size()));
    return tokens_[id];
  }

  void save(const std::string& path) const {
    std::string out;
    for (const auto& t : tokens_) {
      out += t;
      out += '\n';
    }
    write_text_file(path, out);
  }

  static Vocabulary load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open vocabulary file: " + path);
    Vocabulary v;
    std::string line;
    while (std::getline(in, line)) v.tokens_.push_back(line);
    if (v.tokens_.size() < 4 || v.tokens_[0] != "[PAD]" || v.tokens_[1] != "[UNK]" ||
        v.tokens_[2] != "[CLS]" || v.tokens_[3] != "[SEP]")
      throw DataError("vocabulary file must start with [PAD], [UNK], [CLS], [SEP]: " + path);
    v.rebuild_index();
    if (v.index_.size() != v.tokens_.size())
      throw DataError("vocabulary file contains duplicate tokens: " + path);
    return v;
  }

 private:
  void rebuild_index() {
    index_.clear();
    for (size_t i = 0; i < tokens_.size(); ++i) index_[tokens_[i]] = static_cast<int>(i);
  }

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

// [CLS] + word ids, truncated to len_max when over-long (no [SEP] then),
// otherwise closed with [SEP] and padded.
inline TokenSequence tokenize_fixed(const Vocabulary& vocab, const std::string& text,
                                    size_t len_max) {
  if (len_max < 2) throw ValueError("tokenize_fixed: len_max must be at least 2");
  TokenSequence seq;
  seq.ids.reserve(len_max);
  seq.ids.push_back(Vocabulary::kCls);
  for (const auto& tok : Vocabulary::word_tokens(text)) {
    if (seq.ids.size() == len_max) break;
    seq.ids.push_back(vocab.id(tok));
  }
  if (seq.ids.size() < len_max) seq.ids.push_back(Vocabulary::kSep);
  seq.n_tokens = seq.ids.size();
  seq.ids.resize(len_max, Vocabulary::kPad);
  seq.mask.assign(len_max, 0);
  for (size_t i = 0; i < seq.n_tokens; ++i) seq.mask[i] = 1;
  return seq;
}

struct EncoderConfig {
  size_t vocab_size = 0;  // set from the vocabulary before building
  size_t len_max = 64;
  size_t d_model = 64;
  size_t n_layers = 2;
  size_t n_heads = 4;
  size_t d_ff = 0;  // 0 -> 4 * d_model
  bool frozen = true;
  bool mask_padded_keys = true;

  size_t ff_dim() const { return d_ff ? d_ff : 4 * d_model; }

  static EncoderConfig preset(const std::string& name) {
    EncoderConfig c;
    if (name == "tiny") {
      c.len_max = 64;
      c.d_model = 64;
      c.n_layers = 2;
      c.n_heads = 4;
    } else if (name == "small") {
      c.len_max = 128;
      c.d_model = 128;
      c.n_layers = 4;
      c.n_heads = 4;
    } else if (name == "paper-base") {
      c.len_max = 512;
      c.d_model = 768;
      c.n_layers = 12;
      c.n_heads = 12;
      c.d_ff = 3072;
    } else {
      throw UsageError("unknown encoder preset: " + name +
                       " (expected tiny, small, or paper-base)");
    }
    return c;
  }
};

inline void validate_encoder_config(const EncoderConfig& c) {
  if (c.vocab_size < 5) throw ValueError("encoder config: vocab_size must be at least 5");
  if (c.len_max < 2) throw ValueError("encoder config: len_max must be at least 2");
  if (c.d_model == 0 || c.n_layers == 0) throw ValueError("encoder config: zero dimensions");
  if (c.n_heads == 0 || c.d_model % c.n_heads != 0)
    throw ShapeError(strprintf("encoder config: d_model %zu not divisible into %zu heads",
                               c.d_model, c.n_heads));
}

class TextEncoder {
 public:
  TextEncoder() = default;

  TextEncoder(const EncoderConfig& cfg, Rng& rng) : cfg_(cfg) {
    validate_encoder_config(cfg);
    bool trainable = !cfg.frozen;
    tok_emb_ = init_normal({cfg.vocab_size, cfg.d_model}, rng, 0.02, trainable);
    pos_emb_ = init_normal({cfg.len_max, cfg.d_model}, rng, 0.02, trainable);
    layers_.reserve(cfg.n_layers);
    for (size_t i = 0; i < cfg.n_layers; ++i)
      layers_.emplace_back(cfg.d_model, cfg.n_heads, cfg.ff_dim(), rng, trainable);
    pooler_ = LinearLayer(cfg.d_model, cfg.d_model, rng, trainable);
    cls_selector_ = Tensor::zeros({1, cfg.len_max});
    cls_selector_.value()[0] = 1.0;
  }

  const EncoderConfig& config() const { return cfg_; }

  // Final hidden states (bs, len_max, d_model).
  Tensor encode(const std::vector<const TokenSequence*>& batch) const {
    if (batch.empty()) throw ShapeError("encode: empty batch");
    for (const auto* s : batch) {
      if (!s) throw ValueError("encode: null sequence");
      if (s->ids.size() != cfg_.len_max || s->mask.size() != cfg_.len_max)
        throw ShapeError(strprintf("encode: sequence length %zu != len_max %zu", s->ids.size(),
                                   cfg_.len_max));
    }
    if (!cfg_.frozen) return run_layers(batch);
    // Frozen weights: assemble the batch from per-sequence cached states.
    size_t l = cfg_.len_max, d = cfg_.d_model;
    std::vector<double> out(batch.size() * l * d);
    for (size_t b = 0; b < batch.size(); ++b) {
      uint64_t key = fnv1a64(batch[b]->ids.data(), batch[b]->ids.size() * sizeof(int));
      auto it = cache_.find(key);
      if (it == cache_.end()) {
        Tensor one = run_layers({batch[b]});
        it = cache_.emplace(key, std::make_shared<std::vector<double>>(one.value())).first;
      }
      std::copy(it->second->begin(), it->second->end(), out.begin() + b * l * d);
    }
    return Tensor::from({batch.size(), l, d}, std::move(out));
  }

  // tanh(W_p h_0 + b_p): (bs, len_max, d_model) -> (bs, d_model)
  Tensor pool(const Tensor& states) const {
    if (states.rank() != 3 || states.shape()[1] != cfg_.len_max ||
        states.shape()[2] != cfg_.d_model)
      throw ShapeError("pool expects states of shape (bs, len_max, d_model), got " +
                       shape_str(states.shape()));
    size_t bs = states.shape()[0];
    Tensor cls = reshape(matmul(cls_selector_, states), {bs, cfg_.d_model});
    return tanh(pooler_.forward(cls));
  }

  Tensor encode_pooled(const std::vector<const TokenSequence*>& batch) const {
    return pool(encode(batch));
  }

  void collect_params(const std::string& prefix, std::vector<NamedParam>& out) const {
    out.push_back({prefix + ".tok_emb", tok_emb_});
    out.push_back({prefix + ".pos_emb", pos_emb_});
    for (size_t i = 0; i < layers_.size(); ++i)
      layers_[i].collect_params(prefix + ".layer" + std::to_string(i), out);
    pooler_.collect_params(prefix + ".pooler", out);
  }

  // Call after externally mutating weights (e.g. checkpoint load).
  void invalidate_cache() const { cache_.clear(); }

  static size_t param_count(const EncoderConfig& c) {
    size_t d = c.d_model;
    return c.vocab_size * d + c.len_max * d +
           c.n_layers * TransformerEncoderBlock::param_count(d, c.ff_dim()) + d * d + d;
  }

 private:
  Tensor run_layers(const std::vector<const TokenSequence*>& batch) const {
    size_t bs = batch.size(), l = cfg_.len_max, d = cfg_.d_model;
    std::vector<int> flat;
    flat.reserve(bs * l);
    for (const auto* s : batch) flat.insert(flat.end(), s->ids.begin(), s->ids.end());
    Tensor h = add(reshape(embedding_rows(tok_emb_, flat), {bs, l, d}), pos_emb_);
    Tensor mask;
    const Tensor* mask_ptr = nullptr;
    if (cfg_.mask_padded_keys) {
      std::vector<std::vector<int>> key_mask(bs);
      for (size_t b = 0; b < bs; ++b) key_mask[b] = batch[b]->mask;
      mask = additive_key_padding_mask(key_mask, l);
      mask_ptr = &mask;
    }
    for (const auto& layer : layers_) h = layer.forward(h, h, h, mask_ptr);
    return h;
  }

  EncoderConfig cfg_;
  Tensor tok_emb_, pos_emb_;
  std::vector<TransformerEncoderBlock> layers_;
  LinearLayer pooler_;
  Tensor cls_selector_;
  mutable std::unordered_map<uint64_t, std::shared_ptr<std::vector<double>>> cache_;
};

}  // namespace crossfuse
