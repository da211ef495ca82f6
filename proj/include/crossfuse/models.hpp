#pragma once

// The five neural rating predictors plus the two benchmarks.
//
//   context-aware   cross-attention between tabular tokens and text states,
//                   mean-pooled over the query positions, then the head
//   context-fusion  context-aware with the raw tabular features concatenated
//                   onto the pooled vector before the head
//   feature-fusion  pooler-output concatenated with the tabular features
//   textual         head over the pooler-output alone
//   tabular         head over the tabular features alone
//
// plus ordinary least squares on the tabular features and a uniform-random
// predictor. Heads are stacks of 2-3 tanh hidden layers with a tanh output.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "crossfuse/nn.hpp"
#include "crossfuse/rng.hpp"
#include "crossfuse/tensor.hpp"
#include "crossfuse/text.hpp"
#include "crossfuse/util.hpp"

namespace crossfuse {

enum class Architecture {
  kContextAware,
  kContextFusion,
  kFeatureFusion,
  kTextual,
  kTabular,
  kLinearRegression,
  kRandom,
};

inline std::string architecture_name(Architecture a) {
  switch (a) {
    case Architecture::kContextAware: return "context-aware";
    case Architecture::kContextFusion: return "context-fusion";
    case Architecture::kFeatureFusion: return "feature-fusion";
    case Architecture::kTextual: return "textual";
    case Architecture::kTabular: return "tabular";
    case Architecture::kLinearRegression: return "linear-regression";
    case Architecture::kRandom: return "random";
  }
  throw ValueError("unknown architecture");
}

inline Architecture architecture_from_name(const std::string& s) {
  for (auto a : {Architecture::kContextAware, Architecture::kContextFusion,
                 Architecture::kFeatureFusion, Architecture::kTextual, Architecture::kTabular,
                 Architecture::kLinearRegression, Architecture::kRandom})
    if (architecture_name(a) == s) return a;
  throw UsageError("unknown architecture: " + s);
}

inline bool is_neural(Architecture a) {
  return a != Architecture::kLinearRegression && a != Architecture::kRandom;
}

inline bool uses_text(Architecture a) {
  switch (a) {
    case Architecture::kContextAware:
    case Architecture::kContextFusion:
    case Architecture::kFeatureFusion:
    case Architecture::kTextual: return true;
    default: return false;
  }
}

inline bool uses_tabular(Architecture a) {
  switch (a) {
    case Architecture::kContextAware:
    case Architecture::kContextFusion:
    case Architecture::kFeatureFusion:
    case Architecture::kTabular:
    case Architecture::kLinearRegression: return true;
    default: return false;
  }
}

inline std::string modality_label(Architecture a) {
  if (a == Architecture::kRandom) return "none";
  if (a == Architecture::kTextual) return "text-only";
  if (a == Architecture::kTabular || a == Architecture::kLinearRegression) return "tabular-only";
  return "multimodal";
}

// Head widths default to the paper-scale stacks, shrunk proportionally with
// d_model (floor 8) for toy encoders. The tabular head is fixed at 10/10.
inline std::vector<size_t> default_head_units(Architecture a, size_t d_model) {
  if (a == Architecture::kTabular) return {10, 10};
  auto scaled = [d_model](std::initializer_list<size_t> base) {
    std::vector<size_t> u;
    for (size_t b : base) {
      auto w = static_cast<size_t>(
          std::llround(static_cast<double>(b) * static_cast<double>(d_model) / 768.0));
      u.push_back(std::max<size_t>(8, w));
    }
    return u;
  };
  if (a == Architecture::kFeatureFusion) return scaled({512, 256, 128});
  return scaled({256, 128});
}

struct ModelSpec {
  Architecture architecture = Architecture::kContextAware;
  EncoderConfig encoder;
  size_t tab_features = 15;        // J, the tabular width
  size_t n_heads_fusion = 8;
  std::vector<size_t> head_units;  // empty -> default_head_units
  bool text_as_query = false;      // swap the cross-attention roles
  uint64_t seed = 1;
};

inline ModelSpec normalize_spec(ModelSpec spec) {
  if (spec.head_units.empty() && is_neural(spec.architecture))
    spec.head_units = default_head_units(spec.architecture, spec.encoder.d_model);
  return spec;
}

inline void validate_model_spec(const ModelSpec& spec) {
  Architecture a = spec.architecture;
  if (is_neural(a)) {
    if (spec.head_units.size() < 2 || spec.head_units.size() > 3)
      throw ValueError(strprintf("head_units must list 2-3 hidden widths, got %zu",
                                 spec.head_units.size()));
    for (size_t u : spec.head_units)
      if (u == 0) throw ValueError("head_units widths must be positive");
  }
  if (uses_text(a)) validate_encoder_config(spec.encoder);
  bool j_optional = a == Architecture::kContextAware || a == Architecture::kTextual ||
                    a == Architecture::kRandom;
  if (!j_optional && spec.tab_features == 0)
    throw ValueError("tab_features must be at least 1 for " + architecture_name(a));
  if ((a == Architecture::kContextAware || a == Architecture::kContextFusion) &&
      spec.tab_features > 0) {
    if (spec.n_heads_fusion == 0 || spec.encoder.d_model % spec.n_heads_fusion != 0)
      throw ShapeError(strprintf("fusion heads %zu must divide d_model %zu",
                                 spec.n_heads_fusion, spec.encoder.d_model));
  }
}

inline std::string canonical_spec_string(const ModelSpec& raw) {
  ModelSpec spec = normalize_spec(raw);
  std::string units;
  for (size_t u : spec.head_units) {
    if (!units.empty()) units += "-";
    units += std::to_string(u);
  }
  return strprintf(
      "arch=%s;J=%zu;fusion_heads=%zu;head=%s;roles=%s;seed=%llu;"
      "V=%zu;len=%zu;d=%zu;layers=%zu;heads=%zu;ff=%zu;frozen=%d;maskpad=%d",
      architecture_name(spec.architecture).c_str(), spec.tab_features, spec.n_heads_fusion,
      units.c_str(), spec.text_as_query ? "text-query" : "tabular-query",
      static_cast<unsigned long long>(spec.seed), spec.encoder.vocab_size, spec.encoder.len_max,
      spec.encoder.d_model, spec.encoder.n_layers, spec.encoder.n_heads, spec.encoder.ff_dim(),
      spec.encoder.frozen ? 1 : 0, spec.encoder.mask_padded_keys ? 1 : 0);
}

inline uint64_t spec_hash(const ModelSpec& spec) {
  return fnv1a64(canonical_spec_string(spec));
}

struct ParamCounts {
  size_t trainable = 0;
  size_t frozen = 0;
  size_t total() const { return trainable + frozen; }
};

namespace detail {

inline size_t head_param_count(size_t in, const std::vector<size_t>& units) {
  size_t count = 0;
  for (size_t u : units) {
    count += (in + 1) * u;
    in = u;
  }
  return count + in + 1;  // output unit
}

}  // namespace detail

// Exact parameter counts from the spec alone; nothing is allocated.
inline ParamCounts param_count(const ModelSpec& raw) {
  ModelSpec spec = normalize_spec(raw);
  validate_model_spec(spec);
  ParamCounts pc;
  size_t d = spec.encoder.d_model, j = spec.tab_features;
  switch (spec.architecture) {
    case Architecture::kLinearRegression: pc.trainable = j + 1; return pc;
    case Architecture::kRandom: return pc;
    default: break;
  }
  if (uses_text(spec.architecture)) {
    size_t enc = TextEncoder::param_count(spec.encoder);
    (spec.encoder.frozen ? pc.frozen : pc.trainable) += enc;
  }
  size_t head_in = 0;
  switch (spec.architecture) {
    case Architecture::kTabular: head_in = j; break;
    case Architecture::kTextual: head_in = d; break;
    case Architecture::kFeatureFusion: head_in = d + j; break;
    case Architecture::kContextAware: head_in = d; break;
    case Architecture::kContextFusion: head_in = d + j; break;
    default: break;
  }
  if ((spec.architecture == Architecture::kContextAware ||
       spec.architecture == Architecture::kContextFusion) &&
      j > 0) {
    pc.trainable += 2 * j * d;  // tabular token embedding directions + biases
    pc.trainable += TransformerEncoderBlock::param_count(d, spec.encoder.ff_dim());
  }
  pc.trainable += detail::head_param_count(head_in, spec.head_units);
  return pc;
}

// Bridges (bs, J) tabular rows into J d_model-dimensional tokens:
// token_j = x_j * w_j + b_j.
class TabularTokenEmbedding {
 public:
  TabularTokenEmbedding() = default;
  TabularTokenEmbedding(size_t j, size_t d_model, Rng& rng)
      : w_(init_normal({j, d_model}, rng, 0.02, true)),
        b_(Tensor::zeros({j, d_model}, true)),
        ones_(Tensor::full({1, d_model}, 1.0)) {}

  Tensor forward(const Tensor& x_tab) const {
    size_t j = w_.shape()[0];
    if (x_tab.rank() != 2 || x_tab.shape()[1] != j)
      throw ShapeError(strprintf("embed_tabular: expected (bs, %zu), got %s", j,
                                 shape_str(x_tab.shape()).c_str()));
    assert_all_finite(x_tab, "tabular features");
    size_t bs = x_tab.shape()[0];
    Tensor spread = matmul(reshape(x_tab, {bs, j, 1}), ones_);  // (bs, J, d)
    return add(mul(spread, w_), b_);
  }

  void collect_params(const std::string& prefix, std::vector<NamedParam>& out) const {
    out.push_back({prefix + ".w", w_});
    out.push_back({prefix + ".b", b_});
  }

 private:
  Tensor w_, b_, ones_;
};

class FusionModel {
 public:
  explicit FusionModel(const ModelSpec& raw) : spec_(normalize_spec(raw)) {
    validate_model_spec(spec_);
    if (!is_neural(spec_.architecture))
      throw ValueError(architecture_name(spec_.architecture) +
                       " is a benchmark, not a neural architecture");
    Rng rng(spec_.seed);
    size_t d = spec_.encoder.d_model, j = spec_.tab_features;
    if (uses_text(spec_.architecture)) encoder_.emplace(spec_.encoder, rng);
    bool cross = (spec_.architecture == Architecture::kContextAware ||
                  spec_.architecture == Architecture::kContextFusion) &&
                 j > 0;
    if (cross) {
      tab_emb_.emplace(j, d, rng);
      fusion_.emplace(d, spec_.n_heads_fusion, spec_.encoder.ff_dim(), rng, true);
    }
    size_t in = head_input_width();
    for (size_t u : spec_.head_units) {
      head_.emplace_back(in, u, rng, true);
      in = u;
    }
    head_out_ = LinearLayer(in, 1, rng, true);
  }

  const ModelSpec& spec() const { return spec_; }
  const TextEncoder& encoder() const {
    if (!encoder_) throw ValueError("model has no text encoder");
    return *encoder_;
  }

  // seqs may be empty for tabular; x_tab may be undefined for textual.
  Tensor forward(const std::vector<const TokenSequence*>& seqs, const Tensor& x_tab) const {
    switch (spec_.architecture) {
      case Architecture::kTabular: return run_head(checked_tab(x_tab, 0));
      case Architecture::kTextual: return run_head(encoder_->encode_pooled(seqs));
      case Architecture::kFeatureFusion:
        return run_head(concat(encoder_->encode_pooled(seqs), checked_tab(x_tab, seqs.size())));
      case Architecture::kContextAware:
      case Architecture::kContextFusion: {
        Tensor states = encoder_->encode(seqs);
        Tensor pooled;
        if (spec_.tab_features == 0) {
          pooled = masked_mean(states, seqs);
        } else {
          Tensor tabs = tab_emb_->forward(checked_tab(x_tab, seqs.size()));
          if (spec_.text_as_query) {
            pooled = masked_mean(fusion_->forward(states, tabs, tabs), seqs);
          } else {
            std::vector<std::vector<int>> key_mask(seqs.size());
            for (size_t b = 0; b < seqs.size(); ++b) key_mask[b] = seqs[b]->mask;
            Tensor mask = additive_key_padding_mask(key_mask, spec_.tab_features);
            pooled = mean(fusion_->forward(tabs, states, states, &mask), 1);
          }
        }
        if (spec_.architecture == Architecture::kContextFusion)
          pooled = concat(pooled, checked_tab(x_tab, seqs.size()));
        return run_head(pooled);
      }
      default: throw ValueError("forward on a benchmark architecture");
    }
  }

  std::vector<NamedParam> all_params() const {
    std::vector<NamedParam> out;
    if (encoder_) encoder_->collect_params("encoder", out);
    if (tab_emb_) tab_emb_->collect_params("tab_emb", out);
    if (fusion_) fusion_->collect_params("fusion", out);
    for (size_t i = 0; i < head_.size(); ++i)
      head_[i].collect_params("head.fc" + std::to_string(i), out);
    head_out_.collect_params("head.out", out);
    return out;
  }

  std::vector<NamedParam> trainable_params() const {
    std::vector<NamedParam> out;
    for (auto& p : all_params())
      if (p.tensor.requires_grad()) out.push_back(p);
    return out;
  }

  ParamCounts counted_params() const {
    ParamCounts pc;
    for (const auto& p : all_params())
      (p.tensor.requires_grad() ? pc.trainable : pc.frozen) += p.tensor.numel();
    return pc;
  }

  void save_checkpoint(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open checkpoint for writing: " + path);
    out.write("FUSE1", 5);
    write_u64(out, spec_hash(spec_));
    for (const auto& p : all_params()) {
      write_u32(out, static_cast<uint32_t>(p.name.size()));
      out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
      const auto& shape = p.tensor.shape();
      write_u32(out, static_cast<uint32_t>(shape.size()));
      for (size_t e : shape) write_u64(out, e);
      const auto& v = p.tensor.value();
      out.write(reinterpret_cast<const char*>(v.data()),
                static_cast<std::streamsize>(v.size() * sizeof(double)));
    }
    if (!out) throw IoError("checkpoint write failed: " + path);
  }

  void load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    char magic[5];
    in.read(magic, 5);
    if (!in || std::memcmp(magic, "FUSE1", 5) != 0)
      throw DataError("not a checkpoint file (bad magic): " + path);
    if (read_u64(in) != spec_hash(spec_))
      throw DataError("checkpoint was written for a different model spec: " + path);
    std::map<std::string, std::pair<Shape, std::vector<double>>> blocks;
    while (in.peek() != std::char_traits<char>::eof()) {
      uint32_t name_len = read_u32(in);
      if (!in || name_len == 0 || name_len > 4096)
        throw DataError("corrupt checkpoint block header: " + path);
      std::string name(name_len, '\0');
      in.read(name.data(), name_len);
      uint32_t rank = read_u32(in);
      if (!in || rank > 8) throw DataError("corrupt checkpoint shape: " + path);
      Shape shape(rank);
      size_t numel = 1;
      for (uint32_t i = 0; i < rank; ++i) {
        shape[i] = read_u64(in);
        numel *= shape[i];
      }
      std::vector<double> data(numel);
      in.read(reinterpret_cast<char*>(data.data()),
              static_cast<std::streamsize>(numel * sizeof(double)));
      if (!in) throw DataError("truncated checkpoint: " + path);
      if (!blocks.emplace(name, std::make_pair(std::move(shape), std::move(data))).second)
        throw DataError("duplicate parameter in checkpoint: " + name);
    }
    auto params = all_params();
    if (params.size() != blocks.size())
      throw DataError(strprintf("checkpoint holds %zu parameters, model has %zu", blocks.size(),
                                params.size()));
    for (auto& p : params) {
      auto it = blocks.find(p.name);
      if (it == blocks.end()) throw DataError("checkpoint missing parameter: " + p.name);
      if (it->second.first != p.tensor.shape())
        throw DataError(strprintf("checkpoint shape %s != model shape %s for %s",
                                  shape_str(it->second.first).c_str(),
                                  shape_str(p.tensor.shape()).c_str(), p.name.c_str()));
      p.tensor.value() = it->second.second;
    }
    if (encoder_) encoder_->invalidate_cache();
  }

 private:
  size_t head_input_width() const {
    size_t d = spec_.encoder.d_model, j = spec_.tab_features;
    switch (spec_.architecture) {
      case Architecture::kTabular: return j;
      case Architecture::kTextual: return d;
      case Architecture::kFeatureFusion: return d + j;
      case Architecture::kContextAware: return d;
      case Architecture::kContextFusion: return d + j;
      default: return 0;
    }
  }

  Tensor checked_tab(const Tensor& x_tab, size_t expected_bs) const {
    if (!x_tab.defined()) throw ValueError("this architecture requires tabular features");
    if (x_tab.rank() != 2 || x_tab.shape()[1] != spec_.tab_features)
      throw ShapeError(strprintf("tabular input must be (bs, %zu), got %s", spec_.tab_features,
                                 shape_str(x_tab.shape()).c_str()));
    if (expected_bs && x_tab.shape()[0] != expected_bs)
      throw ShapeError(strprintf("batch mismatch: %zu sequences vs %zu tabular rows", expected_bs,
                                 x_tab.shape()[0]));
    assert_all_finite(x_tab, "tabular features");
    return x_tab;
  }

  // Mean over real (unpadded) positions of (bs, L, d) states.
  Tensor masked_mean(const Tensor& states, const std::vector<const TokenSequence*>& seqs) const {
    size_t bs = states.shape()[0], l = states.shape()[1], d = states.shape()[2];
    std::vector<double> w(bs * l * d, 0.0);
    for (size_t b = 0; b < bs; ++b) {
      double inv = 1.0 / static_cast<double>(seqs[b]->n_tokens);
      for (size_t t = 0; t < l; ++t)
        if (seqs[b]->mask[t])
          for (size_t c = 0; c < d; ++c) w[(b * l + t) * d + c] = inv;
    }
    Tensor weights = Tensor::from({bs, l, d}, std::move(w));
    return scale(mean(mul(states, weights), 1), static_cast<double>(l));
  }

  Tensor run_head(const Tensor& h0) const {
    Tensor h = h0;
    for (const auto& fc : head_) h = tanh(fc.forward(h));
    return tanh(head_out_.forward(h));
  }

  static void write_u32(std::ofstream& out, uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
  }
  static void write_u64(std::ofstream& out, uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
  }
  static uint32_t read_u32(std::ifstream& in) {
    uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
  }
  static uint64_t read_u64(std::ifstream& in) {
    uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
  }

  ModelSpec spec_;
  std::optional<TextEncoder> encoder_;
  std::optional<TabularTokenEmbedding> tab_emb_;
  std::optional<TransformerEncoderBlock> fusion_;
  std::vector<LinearLayer> head_;
  LinearLayer head_out_;
};

namespace detail {

// Gaussian elimination with partial pivoting; returns false on a tiny pivot.
inline bool solve_inplace(std::vector<std::vector<double>>& a, std::vector<double>& b) {
  size_t n = b.size();
  for (size_t col = 0; col < n; ++col) {
    size_t pivot = col;
    for (size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    if (std::abs(a[pivot][col]) < 1e-12) return false;
    std::swap(a[pivot], a[col]);
    std::swap(b[pivot], b[col]);
    for (size_t r = col + 1; r < n; ++r) {
      double f = a[r][col] / a[col][col];
      for (size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  for (size_t i = n; i-- > 0;) {
    double acc = b[i];
    for (size_t c = i + 1; c < n; ++c) acc -= a[i][c] * b[c];
    b[i] = acc / a[i][i];
  }
  return true;
}

// Cyclic Jacobi eigendecomposition of a symmetric matrix.
inline void jacobi_eigen(std::vector<std::vector<double>> a, std::vector<double>& eigvals,
                         std::vector<std::vector<double>>& eigvecs) {
  size_t n = a.size();
  eigvecs.assign(n, std::vector<double>(n, 0.0));
  for (size_t i = 0; i < n; ++i) eigvecs[i][i] = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (size_t p = 0; p < n; ++p)
      for (size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    if (off < 1e-24) break;
    for (size_t p = 0; p < n; ++p)
      for (size_t q = p + 1; q < n; ++q) {
        if (std::abs(a[p][q]) < 1e-300) continue;
        double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        double t = (theta >= 0 ? 1.0 : -1.0) /
                   (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (size_t k = 0; k < n; ++k) {
          double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (size_t k = 0; k < n; ++k) {
          double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (size_t k = 0; k < n; ++k) {
          double vkp = eigvecs[k][p], vkq = eigvecs[k][q];
          eigvecs[k][p] = c * vkp - s * vkq;
          eigvecs[k][q] = s * vkp + c * vkq;
        }
      }
  }
  eigvals.resize(n);
  for (size_t i = 0; i < n; ++i) eigvals[i] = a[i][i];
}

}  // namespace detail

// Ordinary least squares with intercept; coefficients[0] is the intercept.
// Normal equations via Gaussian elimination, with an eigendecomposition
// pseudo-inverse fallback when the system is rank-deficient.
inline std::vector<double> fit_linear_regression(const std::vector<std::vector<double>>& x,
                                                 const std::vector<double>& y) {
  size_t n = x.size();
  if (n != y.size())
    throw ShapeError(strprintf("linear regression: %zu rows vs %zu targets", n, y.size()));
  if (n == 0) throw ValueError("linear regression on an empty dataset");
  size_t j = x[0].size();
  if (n <= j + 1)
    throw ValueError(strprintf(
        "linear regression needs more than %zu samples for %zu features; provide more data",
        j + 1, j));
  size_t p = j + 1;
  std::vector<std::vector<double>> ata(p, std::vector<double>(p, 0.0));
  std::vector<double> atb(p, 0.0);
  std::vector<double> row(p);
  for (size_t r = 0; r < n; ++r) {
    if (x[r].size() != j) throw ShapeError("linear regression: ragged feature matrix");
    row[0] = 1.0;
    for (size_t c = 0; c < j; ++c) row[c + 1] = x[r][c];
    for (size_t a = 0; a < p; ++a) {
      for (size_t b = a; b < p; ++b) ata[a][b] += row[a] * row[b];
      atb[a] += row[a] * y[r];
    }
  }
  for (size_t a = 0; a < p; ++a)
    for (size_t b = 0; b < a; ++b) ata[a][b] = ata[b][a];

  auto a_copy = ata;
  std::vector<double> coeffs = atb;
  if (detail::solve_inplace(a_copy, coeffs)) return coeffs;

  std::vector<double> eigvals;
  std::vector<std::vector<double>> v;
  detail::jacobi_eigen(ata, eigvals, v);
  double lmax = 0.0;
  for (double l : eigvals) lmax = std::max(lmax, std::abs(l));
  double tol = lmax * 1e-10;
  coeffs.assign(p, 0.0);
  for (size_t k = 0; k < p; ++k) {
    if (std::abs(eigvals[k]) <= tol) continue;
    double vtb = 0.0;
    for (size_t i = 0; i < p; ++i) vtb += v[i][k] * atb[i];
    double f = vtb / eigvals[k];
    for (size_t i = 0; i < p; ++i) coeffs[i] += v[i][k] * f;
  }
  return coeffs;
}

inline double predict_linear(const std::vector<double>& coeffs, const std::vector<double>& x) {
  if (coeffs.size() != x.size() + 1)
    throw ShapeError(strprintf("linear predict: %zu coefficients vs %zu features", coeffs.size(),
                               x.size()));
  double acc = coeffs[0];
  for (size_t i = 0; i < x.size(); ++i) acc += coeffs[i + 1] * x[i];
  return acc;
}

// i.i.d. uniform draws on [0, 1].
inline std::vector<double> random_predict(size_t n, Rng& rng) {
  std::vector<double> out(n);
  for (double& v : out) v = rng.uniform();
  return out;
}

}  // namespace crossfuse
