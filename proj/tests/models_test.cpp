#include "crossfuse/models.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "crossfuse/optim.hpp"

namespace crossfuse {
namespace {

TokenSequence seq_of(const std::vector<int>& real, size_t len_max, int pad_id = 0) {
  TokenSequence s;
  s.ids.assign(len_max, pad_id);
  s.mask.assign(len_max, 0);
  s.n_tokens = real.size();
  for (size_t i = 0; i < real.size(); ++i) {
    s.ids[i] = real[i];
    s.mask[i] = 1;
  }
  return s;
}

EncoderConfig mini_encoder() {
  EncoderConfig c;
  c.vocab_size = 30;
  c.len_max = 8;
  c.d_model = 8;
  c.n_layers = 1;
  c.n_heads = 2;
  c.d_ff = 16;
  return c;
}

ModelSpec mini_spec(Architecture a) {
  ModelSpec s;
  s.architecture = a;
  s.encoder = mini_encoder();
  s.tab_features = 5;
  s.n_heads_fusion = 2;
  s.seed = 7;
  return s;
}

Tensor rand_tab(size_t bs, size_t j, uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(bs * j);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return Tensor::from({bs, j}, std::move(v));
}

Tensor find_param(const FusionModel& m, const std::string& name) {
  for (const auto& p : m.all_params())
    if (p.name == name) return p.tensor;
  ADD_FAILURE() << "parameter not found: " << name;
  return Tensor();
}

const std::vector<Architecture> kNeuralArchs = {
    Architecture::kContextAware, Architecture::kContextFusion, Architecture::kFeatureFusion,
    Architecture::kTextual, Architecture::kTabular};

TEST(ModelSpec, ArchitectureNamesRoundTrip) {
  for (auto a : {Architecture::kContextAware, Architecture::kContextFusion,
                 Architecture::kFeatureFusion, Architecture::kTextual, Architecture::kTabular,
                 Architecture::kLinearRegression, Architecture::kRandom})
    EXPECT_EQ(architecture_from_name(architecture_name(a)), a);
  EXPECT_THROW(architecture_from_name("context_aware"), UsageError);
  EXPECT_EQ(modality_label(Architecture::kContextAware), "multimodal");
  EXPECT_EQ(modality_label(Architecture::kFeatureFusion), "multimodal");
  EXPECT_EQ(modality_label(Architecture::kTextual), "text-only");
  EXPECT_EQ(modality_label(Architecture::kTabular), "tabular-only");
  EXPECT_EQ(modality_label(Architecture::kLinearRegression), "tabular-only");
  EXPECT_EQ(modality_label(Architecture::kRandom), "none");
  EXPECT_FALSE(is_neural(Architecture::kRandom));
  EXPECT_FALSE(is_neural(Architecture::kLinearRegression));
  EXPECT_TRUE(is_neural(Architecture::kTabular));
}

TEST(ModelSpec, DefaultHeadUnits) {
  EXPECT_EQ(default_head_units(Architecture::kTabular, 768), (std::vector<size_t>{10, 10}));
  EXPECT_EQ(default_head_units(Architecture::kTabular, 8), (std::vector<size_t>{10, 10}));
  EXPECT_EQ(default_head_units(Architecture::kTextual, 768), (std::vector<size_t>{256, 128}));
  EXPECT_EQ(default_head_units(Architecture::kContextAware, 768),
            (std::vector<size_t>{256, 128}));
  EXPECT_EQ(default_head_units(Architecture::kFeatureFusion, 768),
            (std::vector<size_t>{512, 256, 128}));
  EXPECT_EQ(default_head_units(Architecture::kTextual, 96), (std::vector<size_t>{32, 16}));
  // Tiny encoders floor at 8 rather than collapsing to zero-width layers.
  EXPECT_EQ(default_head_units(Architecture::kTextual, 8), (std::vector<size_t>{8, 8}));
}

TEST(ModelSpec, Validation) {
  ModelSpec s = mini_spec(Architecture::kContextAware);
  s.head_units = {8};
  EXPECT_THROW(validate_model_spec(s), ValueError);
  s.head_units = {8, 8, 8, 8};
  EXPECT_THROW(validate_model_spec(s), ValueError);
  s.head_units = {8, 0};
  EXPECT_THROW(validate_model_spec(s), ValueError);

  s = normalize_spec(mini_spec(Architecture::kContextAware));
  s.n_heads_fusion = 3;  // does not divide d_model = 8
  EXPECT_THROW(validate_model_spec(s), ShapeError);

  s = normalize_spec(mini_spec(Architecture::kContextFusion));
  s.tab_features = 0;
  EXPECT_THROW(validate_model_spec(s), ValueError);

  s = normalize_spec(mini_spec(Architecture::kTabular));
  s.tab_features = 0;
  EXPECT_THROW(validate_model_spec(s), ValueError);

  ModelSpec lin;
  lin.architecture = Architecture::kLinearRegression;
  lin.tab_features = 0;
  EXPECT_THROW(validate_model_spec(lin), ValueError);

  ModelSpec rnd;
  rnd.architecture = Architecture::kRandom;
  rnd.tab_features = 0;
  EXPECT_NO_THROW(validate_model_spec(rnd));

  // context-aware may run without tabular features (pure masked-mean pooling)
  s = normalize_spec(mini_spec(Architecture::kContextAware));
  s.tab_features = 0;
  EXPECT_NO_THROW(validate_model_spec(s));
}

TEST(ParamCount, HeadParameterBudgets) {
  ModelSpec tab;
  tab.architecture = Architecture::kTabular;
  tab.tab_features = 15;
  ParamCounts pc = param_count(tab);
  EXPECT_EQ(pc.trainable, 281u);
  EXPECT_EQ(pc.frozen, 0u);

  ModelSpec txt;
  txt.architecture = Architecture::kTextual;
  txt.encoder = EncoderConfig::preset("paper-base");
  txt.encoder.vocab_size = 30522;
  pc = param_count(txt);
  EXPECT_EQ(pc.trainable, 229889u);
  EXPECT_GT(pc.frozen, 0u);

  ModelSpec ff;
  ff.architecture = Architecture::kFeatureFusion;
  ff.encoder = EncoderConfig::preset("paper-base");
  ff.encoder.vocab_size = 30522;
  ff.tab_features = 15;
  pc = param_count(ff);
  EXPECT_EQ(pc.trainable, 565761u);

  // Concatenating the 15 raw features widens only the first head layer.
  ModelSpec ca;
  ca.architecture = Architecture::kContextAware;
  ca.encoder = EncoderConfig::preset("paper-base");
  ca.encoder.vocab_size = 30522;
  ca.tab_features = 15;
  ca.n_heads_fusion = 8;
  ModelSpec cf = ca;
  cf.architecture = Architecture::kContextFusion;
  EXPECT_EQ(param_count(cf).trainable - param_count(ca).trainable, 15u * 256u);
}

TEST(ParamCount, AnalyticMatchesAllocated) {
  for (Architecture a : kNeuralArchs) {
    ModelSpec spec = mini_spec(a);
    FusionModel model(spec);
    ParamCounts analytic = param_count(spec);
    ParamCounts counted = model.counted_params();
    EXPECT_EQ(counted.trainable, analytic.trainable) << architecture_name(a);
    EXPECT_EQ(counted.frozen, analytic.frozen) << architecture_name(a);

    std::set<std::string> names;
    for (const auto& p : model.all_params()) EXPECT_TRUE(names.insert(p.name).second) << p.name;
    for (const auto& p : model.trainable_params()) EXPECT_TRUE(p.tensor.requires_grad());
  }

  // J = 0 context-aware drops the tabular embedding and the fusion block.
  ModelSpec j0 = mini_spec(Architecture::kContextAware);
  j0.tab_features = 0;
  FusionModel m0(j0);
  EXPECT_EQ(m0.counted_params().trainable, param_count(j0).trainable);
}

TEST(ParamCount, FrozenBucketFollowsEncoderFlag) {
  ModelSpec spec = mini_spec(Architecture::kTextual);
  ParamCounts frozen_pc = param_count(spec);
  spec.encoder.frozen = false;
  ParamCounts live_pc = param_count(spec);
  EXPECT_EQ(live_pc.frozen, 0u);
  EXPECT_EQ(live_pc.trainable, frozen_pc.trainable + frozen_pc.frozen);

  FusionModel live(spec);
  EXPECT_EQ(live.counted_params().trainable, live_pc.trainable);
  EXPECT_EQ(live.counted_params().frozen, 0u);
}

TEST(TabularTokenEmbedding, ScalesLearnedDirections) {
  Rng rng(3);
  TabularTokenEmbedding emb(2, 3, rng);
  std::vector<NamedParam> ps;
  emb.collect_params("t", ps);
  ASSERT_EQ(ps.size(), 2u);
  const auto& w = ps[0].tensor.value();
  const auto& b = ps[1].tensor.value();
  Tensor x = Tensor::from({2, 2}, {0.5, -2.0, 1.25, 0.0});
  Tensor out = emb.forward(x);
  ASSERT_EQ(out.shape(), (Shape{2, 2, 3}));
  for (size_t row = 0; row < 2; ++row)
    for (size_t j = 0; j < 2; ++j)
      for (size_t c = 0; c < 3; ++c)
        EXPECT_DOUBLE_EQ(out.value()[(row * 2 + j) * 3 + c],
                         x.value()[row * 2 + j] * w[j * 3 + c] + b[j * 3 + c]);
  EXPECT_THROW(emb.forward(Tensor::from({2, 3}, std::vector<double>(6, 0.0))), ShapeError);
}

TEST(FusionModel, DeterministicConstruction) {
  ModelSpec spec = mini_spec(Architecture::kContextAware);
  FusionModel a(spec), b(spec);
  TokenSequence s1 = seq_of({2, 9, 14, 3}, 8), s2 = seq_of({2, 5, 3}, 8);
  std::vector<const TokenSequence*> seqs = {&s1, &s2};
  Tensor x = rand_tab(2, 5, 11);
  Tensor ya = a.forward(seqs, x), yb = b.forward(seqs, x);
  ASSERT_EQ(ya.shape(), yb.shape());
  for (size_t i = 0; i < ya.numel(); ++i) EXPECT_DOUBLE_EQ(ya.value()[i], yb.value()[i]);
}

TEST(FusionModel, OutputShapeAndRange) {
  TokenSequence s1 = seq_of({2, 9, 14, 3}, 8), s2 = seq_of({2, 5, 3}, 8),
                s3 = seq_of({2, 21, 22, 23, 24, 25, 26, 27}, 8);
  std::vector<const TokenSequence*> seqs = {&s1, &s2, &s3};
  Tensor x = rand_tab(3, 5, 23);
  for (Architecture a : kNeuralArchs) {
    FusionModel model(mini_spec(a));
    Tensor y = model.forward(seqs, x);
    ASSERT_EQ(y.shape(), (Shape{3, 1})) << architecture_name(a);
    for (double v : y.value()) {
      EXPECT_TRUE(std::isfinite(v)) << architecture_name(a);
      EXPECT_GT(v, -1.0) << architecture_name(a);
      EXPECT_LT(v, 1.0) << architecture_name(a);
    }
  }
}

TEST(FusionModel, SingleModalityArchitecturesIgnoreTheOther) {
  TokenSequence s1 = seq_of({2, 9, 14, 3}, 8), s2 = seq_of({2, 5, 3}, 8);
  TokenSequence other = seq_of({2, 17, 18, 19, 3}, 8);
  std::vector<const TokenSequence*> seqs = {&s1, &s2};
  std::vector<const TokenSequence*> swapped = {&other, &other};
  Tensor x = rand_tab(2, 5, 31);

  FusionModel tab(mini_spec(Architecture::kTabular));
  Tensor y_no_text = tab.forward({}, x);
  Tensor y_text = tab.forward(seqs, x);
  Tensor y_other = tab.forward(swapped, x);
  for (size_t i = 0; i < y_no_text.numel(); ++i) {
    EXPECT_DOUBLE_EQ(y_text.value()[i], y_no_text.value()[i]);
    EXPECT_DOUBLE_EQ(y_other.value()[i], y_no_text.value()[i]);
  }

  FusionModel txt(mini_spec(Architecture::kTextual));
  Tensor y_undef = txt.forward(seqs, Tensor());
  Tensor y_tab = txt.forward(seqs, x);
  for (size_t i = 0; i < y_undef.numel(); ++i)
    EXPECT_DOUBLE_EQ(y_tab.value()[i], y_undef.value()[i]);
}

TEST(FusionModel, MultimodalArchitecturesUseBothModalities) {
  TokenSequence s1 = seq_of({2, 9, 14, 3}, 8), s2 = seq_of({2, 5, 3}, 8);
  TokenSequence s1_alt = seq_of({2, 9, 16, 3}, 8);
  std::vector<const TokenSequence*> seqs = {&s1, &s2};
  std::vector<const TokenSequence*> seqs_alt = {&s1_alt, &s2};
  Tensor x = rand_tab(2, 5, 41);
  Tensor x_alt = x;
  {
    std::vector<double> v = x.value();
    v[3] += 0.25;
    x_alt = Tensor::from(x.shape(), std::move(v));
  }
  for (Architecture a : {Architecture::kContextAware, Architecture::kContextFusion,
                         Architecture::kFeatureFusion}) {
    FusionModel model(mini_spec(a));
    Tensor base = model.forward(seqs, x);
    Tensor text_changed = model.forward(seqs_alt, x);
    Tensor tab_changed = model.forward(seqs, x_alt);
    double dt = 0.0, dx = 0.0;
    for (size_t i = 0; i < base.numel(); ++i) {
      dt = std::max(dt, std::abs(text_changed.value()[i] - base.value()[i]));
      dx = std::max(dx, std::abs(tab_changed.value()[i] - base.value()[i]));
    }
    EXPECT_GT(dt, 1e-15) << architecture_name(a);
    EXPECT_GT(dx, 1e-15) << architecture_name(a);
  }
}

TEST(FusionModel, ZeroedWeightsCollapseToZeroOutput) {
  for (Architecture a : kNeuralArchs) {
    FusionModel model(mini_spec(a));
    for (auto& p : model.trainable_params())
      std::fill(p.tensor.value().begin(), p.tensor.value().end(), 0.0);
    TokenSequence s1 = seq_of({2, 9, 14, 3}, 8), s2 = seq_of({2, 5, 3}, 8);
    std::vector<const TokenSequence*> seqs = {&s1, &s2};
    Tensor y1 = model.forward(seqs, rand_tab(2, 5, 51));
    Tensor y2 = model.forward(seqs, rand_tab(2, 5, 52));
    for (double v : y1.value()) EXPECT_EQ(v, 0.0) << architecture_name(a);
    for (double v : y2.value()) EXPECT_EQ(v, 0.0) << architecture_name(a);
  }
}

TEST(FusionModel, ContextAwareRunsWithoutTabularFeatures) {
  ModelSpec spec = mini_spec(Architecture::kContextAware);
  spec.tab_features = 0;
  FusionModel model(spec);
  TokenSequence s1 = seq_of({2, 9, 14, 3}, 8), s2 = seq_of({2, 5, 3}, 8);
  std::vector<const TokenSequence*> seqs = {&s1, &s2};
  Tensor y = model.forward(seqs, Tensor());
  ASSERT_EQ(y.shape(), (Shape{2, 1}));
  for (double v : y.value()) {
    EXPECT_TRUE(std::isfinite(v));
    EXPECT_GT(v, -1.0);
    EXPECT_LT(v, 1.0);
  }
}

TEST(FusionModel, PaddingContentIsInvisible) {
  TokenSequence clean = seq_of({2, 9, 14, 3}, 8, /*pad_id=*/0);
  TokenSequence junk = clean;
  junk.ids[5] = 27;
  junk.ids[6] = 13;  // garbage ids under mask 0 must not leak into predictions
  Tensor x = rand_tab(1, 5, 61);
  for (Architecture a : kNeuralArchs) {
    if (a == Architecture::kTabular) continue;
    FusionModel model(mini_spec(a));
    std::vector<const TokenSequence*> ca = {&clean}, cb = {&junk};
    Tensor ya = model.forward(ca, x), yb = model.forward(cb, x);
    for (size_t i = 0; i < ya.numel(); ++i)
      EXPECT_NEAR(ya.value()[i], yb.value()[i], 1e-12) << architecture_name(a);
  }
  ModelSpec j0 = mini_spec(Architecture::kContextAware);
  j0.tab_features = 0;
  FusionModel pooled(j0);
  std::vector<const TokenSequence*> ca = {&clean}, cb = {&junk};
  Tensor ya = pooled.forward(ca, Tensor()), yb = pooled.forward(cb, Tensor());
  for (size_t i = 0; i < ya.numel(); ++i) EXPECT_NEAR(ya.value()[i], yb.value()[i], 1e-12);
}

TEST(FusionModel, QueryRoleSwapChangesTheModel) {
  ModelSpec spec = mini_spec(Architecture::kContextAware);
  ModelSpec swapped = spec;
  swapped.text_as_query = true;
  EXPECT_NE(spec_hash(spec), spec_hash(swapped));

  FusionModel a(spec), b(swapped);
  TokenSequence s1 = seq_of({2, 9, 14, 3}, 8), s2 = seq_of({2, 5, 3}, 8);
  std::vector<const TokenSequence*> seqs = {&s1, &s2};
  Tensor x = rand_tab(2, 5, 71);
  Tensor ya = a.forward(seqs, x), yb = b.forward(seqs, x);
  ASSERT_EQ(yb.shape(), (Shape{2, 1}));
  double diff = 0.0;
  for (size_t i = 0; i < ya.numel(); ++i)
    diff = std::max(diff, std::abs(ya.value()[i] - yb.value()[i]));
  EXPECT_GT(diff, 1e-15);
}

TEST(FusionModel, BenchmarksAreNotConstructible) {
  ModelSpec lin;
  lin.architecture = Architecture::kLinearRegression;
  lin.tab_features = 5;
  EXPECT_THROW(FusionModel{lin}, ValueError);
  ModelSpec rnd;
  rnd.architecture = Architecture::kRandom;
  EXPECT_THROW(FusionModel{rnd}, ValueError);
}

TEST(FusionModel, InputValidation) {
  FusionModel model(mini_spec(Architecture::kContextAware));
  TokenSequence s1 = seq_of({2, 9, 14, 3}, 8), s2 = seq_of({2, 5, 3}, 8),
                s3 = seq_of({2, 6, 3}, 8);
  std::vector<const TokenSequence*> three = {&s1, &s2, &s3};
  EXPECT_THROW(model.forward(three, rand_tab(2, 5, 81)), ShapeError);
  std::vector<const TokenSequence*> two = {&s1, &s2};
  EXPECT_THROW(model.forward(two, rand_tab(2, 4, 82)), ShapeError);
  Tensor bad = rand_tab(2, 5, 83);
  bad.value()[0] = std::nan("");
  EXPECT_THROW(model.forward(two, bad), ValueError);

  FusionModel tab(mini_spec(Architecture::kTabular));
  EXPECT_THROW(tab.forward({}, Tensor()), ValueError);
}

TEST(Checkpoint, RoundTripRestoresOutputs) {
  std::string path = testing::TempDir() + "roundtrip.ckpt";
  ModelSpec spec = mini_spec(Architecture::kContextAware);
  FusionModel model(spec);
  TokenSequence s1 = seq_of({2, 9, 14, 3}, 8), s2 = seq_of({2, 5, 3}, 8);
  std::vector<const TokenSequence*> seqs = {&s1, &s2};
  Tensor x = rand_tab(2, 5, 91);
  Tensor y0 = model.forward(seqs, x);

  model.save_checkpoint(path);
  for (auto& p : model.trainable_params())
    for (double& v : p.tensor.value()) v = 1.5 * v + 0.01;
  Tensor y1 = model.forward(seqs, x);
  double moved = 0.0;
  for (size_t i = 0; i < y0.numel(); ++i)
    moved = std::max(moved, std::abs(y1.value()[i] - y0.value()[i]));
  EXPECT_GT(moved, 1e-12);

  model.load_checkpoint(path);
  Tensor y2 = model.forward(seqs, x);
  for (size_t i = 0; i < y0.numel(); ++i) EXPECT_DOUBLE_EQ(y2.value()[i], y0.value()[i]);
  std::remove(path.c_str());
}

TEST(Checkpoint, LoadsOnlyIntoAMatchingModel) {
  std::string path = testing::TempDir() + "mismatch.ckpt";
  ModelSpec spec = mini_spec(Architecture::kContextAware);
  FusionModel model(spec);
  model.save_checkpoint(path);

  ModelSpec reseeded = spec;
  reseeded.seed = 8;
  FusionModel other(reseeded);
  EXPECT_THROW(other.load_checkpoint(path), DataError);

  ModelSpec fused = spec;
  fused.architecture = Architecture::kContextFusion;
  FusionModel third(fused);
  EXPECT_THROW(third.load_checkpoint(path), DataError);
  std::remove(path.c_str());
}

TEST(Checkpoint, RejectsCorruptFiles) {
  ModelSpec spec = mini_spec(Architecture::kTabular);
  FusionModel model(spec);
  EXPECT_THROW(model.load_checkpoint(testing::TempDir() + "no-such-file.ckpt"), IoError);

  std::string bad_magic = testing::TempDir() + "bad-magic.ckpt";
  write_text_file(bad_magic, "NOTACHECKPOINT______");
  EXPECT_THROW(model.load_checkpoint(bad_magic), DataError);
  std::remove(bad_magic.c_str());

  std::string full = testing::TempDir() + "full.ckpt";
  std::string cut = testing::TempDir() + "cut.ckpt";
  model.save_checkpoint(full);
  std::string bytes = read_text_file(full);
  ASSERT_GT(bytes.size(), 40u);
  std::ofstream out(cut, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 9));
  out.close();
  EXPECT_THROW(model.load_checkpoint(cut), DataError);
  std::remove(full.c_str());
  std::remove(cut.c_str());
}

TEST(FusionModel, EndToEndGradientsMatchFiniteDifferences) {
  TokenSequence s1 = seq_of({2, 9, 14, 3}, 8), s2 = seq_of({2, 5, 3}, 8);
  std::vector<const TokenSequence*> seqs = {&s1, &s2};
  Tensor x = rand_tab(2, 5, 101);
  for (Architecture a : kNeuralArchs) {
    FusionModel model(mini_spec(a));
    auto objective = [&](const Tensor&) { return sum_all(model.forward(seqs, x)); };
    EXPECT_LT(grad_check(objective, find_param(model, "head.fc0.w")), 1e-4)
        << architecture_name(a);
    if (a == Architecture::kContextAware) {
      EXPECT_LT(grad_check(objective, find_param(model, "tab_emb.w")), 1e-4);
      EXPECT_LT(grad_check(objective, find_param(model, "fusion.mha.head0.q.w")), 1e-4);
      EXPECT_LT(grad_check(objective, find_param(model, "fusion.ln2.gain")), 1e-4);
    }
  }

  // With the encoder unfrozen, gradients reach it through the fusion block.
  ModelSpec live = mini_spec(Architecture::kContextAware);
  live.encoder.frozen = false;
  FusionModel model(live);
  auto objective = [&](const Tensor&) { return sum_all(model.forward(seqs, x)); };
  EXPECT_LT(grad_check(objective, find_param(model, "encoder.layer0.ln2.gain")), 1e-4);
  EXPECT_LT(grad_check(objective, find_param(model, "encoder.pos_emb")), 1e-4);
}

TEST(LinearRegression, RecoversExactCoefficients) {
  for (uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    size_t n = 40, j = 3;
    std::vector<double> truth = {rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2),
                                 rng.uniform(-2, 2)};
    std::vector<std::vector<double>> x(n, std::vector<double>(j));
    std::vector<double> y(n);
    for (size_t r = 0; r < n; ++r) {
      for (size_t c = 0; c < j; ++c) x[r][c] = rng.uniform(-1, 1);
      y[r] = predict_linear(truth, x[r]);
    }
    auto coeffs = fit_linear_regression(x, y);
    ASSERT_EQ(coeffs.size(), j + 1);
    for (size_t c = 0; c <= j; ++c) EXPECT_NEAR(coeffs[c], truth[c], 1e-8) << "seed " << seed;
  }
}

TEST(LinearRegression, ResidualsAreOrthogonalToFeatures) {
  Rng rng(99);
  size_t n = 60, j = 4;
  std::vector<std::vector<double>> x(n, std::vector<double>(j));
  std::vector<double> y(n);
  for (size_t r = 0; r < n; ++r) {
    for (size_t c = 0; c < j; ++c) x[r][c] = rng.uniform(-1, 1);
    y[r] = 0.3 + 0.8 * x[r][1] - 0.2 * x[r][3] + rng.normal(0.0, 0.1);
  }
  auto coeffs = fit_linear_regression(x, y);
  std::vector<double> dot(j + 1, 0.0);
  for (size_t r = 0; r < n; ++r) {
    double res = y[r] - predict_linear(coeffs, x[r]);
    dot[0] += res;
    for (size_t c = 0; c < j; ++c) dot[c + 1] += res * x[r][c];
  }
  for (double d : dot) EXPECT_NEAR(d, 0.0, 1e-8);
}

TEST(LinearRegression, DuplicatedColumnFallsBackToPseudoInverse) {
  Rng rng(5);
  size_t n = 30;
  std::vector<std::vector<double>> x(n, std::vector<double>(2));
  std::vector<double> y(n);
  for (size_t r = 0; r < n; ++r) {
    double v = rng.uniform(-1, 1);
    x[r][0] = v;
    x[r][1] = v;  // exact copy makes the normal equations singular
    y[r] = 1.0 + 2.0 * v;
  }
  auto coeffs = fit_linear_regression(x, y);
  for (double c : coeffs) EXPECT_TRUE(std::isfinite(c));
  for (size_t r = 0; r < n; ++r) EXPECT_NEAR(predict_linear(coeffs, x[r]), y[r], 1e-6);
  // The minimum-norm solution splits the weight evenly across the twins.
  EXPECT_NEAR(coeffs[1], coeffs[2], 1e-8);
}

TEST(LinearRegression, RejectsDegenerateProblems) {
  std::vector<std::vector<double>> x = {{1.0, 2.0}, {3.0, 4.0}, {5.0, 6.0}};
  std::vector<double> y = {1.0, 2.0, 3.0};
  EXPECT_THROW(fit_linear_regression(x, y), ValueError);  // n == j + 1
  EXPECT_THROW(fit_linear_regression({}, {}), ValueError);
  EXPECT_THROW(fit_linear_regression(x, {1.0, 2.0}), ShapeError);
  std::vector<std::vector<double>> ragged = {{1.0, 2.0}, {3.0}, {5.0, 6.0}, {7.0, 8.0},
                                             {9.0, 1.0}};
  EXPECT_THROW(fit_linear_regression(ragged, {1, 2, 3, 4, 5}), ShapeError);
  EXPECT_THROW(predict_linear({1.0, 2.0}, {1.0, 2.0}), ShapeError);
}

TEST(RandomBenchmark, DrawsAreUniformAndSeeded) {
  Rng a(42), b(42), c(43);
  auto pa = random_predict(1000, a), pb = random_predict(1000, b), pc = random_predict(1000, c);
  for (size_t i = 0; i < pa.size(); ++i) {
    EXPECT_GE(pa[i], 0.0);
    EXPECT_LT(pa[i], 1.0);
    EXPECT_DOUBLE_EQ(pa[i], pb[i]);
  }
  EXPECT_NE(pa, pc);
}

TEST(RandomBenchmark, ErrorAgainstUniformTargetsMatchesTheory) {
  // For independent U, V ~ Uniform[0,1], E[(U-V)^2] = 1/6.
  Rng pred_rng(7), target_rng(1234);
  size_t n = 10000;
  auto pred = random_predict(n, pred_rng);
  auto target = random_predict(n, target_rng);
  EXPECT_NEAR(rmse(pred, target), 0.408248290463863, 0.02);
}

}  // namespace
}  // namespace crossfuse
