#include "crossfuse/train.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

namespace crossfuse {
namespace {

struct ToyData {
  SplitDataset split;
  size_t vocab_size = 0;
};

ToyData toy_text_data(size_t n, uint64_t seed) {
  auto records = synth_generate(n, seed, 0.05);
  PipelineConfig cfg;
  cfg.sample_n = 0;
  cfg.vocab_size = 80;
  cfg.len_max = 12;
  BuiltDataset built = build_dataset(records, cfg);
  ToyData out;
  out.vocab_size = built.vocab.size();
  out.split = split_dataset(built.examples, seed);
  normalize_count_features(out.split);
  return out;
}

// Targets are a gentle affine map of two feature columns, safely inside the
// tanh output range, so a tiny head can drive the loss toward zero.
SplitDataset affine_tabular_data(size_t n, uint64_t seed) {
  Rng rng(seed);
  std::vector<Example> all;
  for (size_t i = 0; i < n; ++i) {
    Example e;
    e.seq.ids = {2, 5, 3, 0};
    e.seq.mask = {1, 1, 1, 0};
    e.seq.n_tokens = 3;
    e.x_tab.resize(kTabFeatureCount);
    for (double& v : e.x_tab) v = rng.uniform();
    e.y = 0.5 + 0.3 * (e.x_tab[0] - 0.5) + 0.2 * (e.x_tab[1] - 0.5);
    all.push_back(std::move(e));
  }
  SplitDataset ds;
  ds.train = all;
  ds.validation = all;
  ds.test = all;
  return ds;
}

ModelSpec tabular_spec(uint64_t seed = 7) {
  ModelSpec s;
  s.architecture = Architecture::kTabular;
  s.tab_features = kTabFeatureCount;
  s.seed = seed;
  return s;
}

ModelSpec context_spec(size_t vocab_size, uint64_t seed = 7) {
  ModelSpec s;
  s.architecture = Architecture::kContextAware;
  s.encoder.vocab_size = vocab_size;
  s.encoder.len_max = 12;
  s.encoder.d_model = 8;
  s.encoder.n_layers = 1;
  s.encoder.n_heads = 2;
  s.encoder.d_ff = 16;
  s.tab_features = kTabFeatureCount;
  s.n_heads_fusion = 2;
  s.seed = seed;
  return s;
}

TrainConfig quick_config(OptimizerKind kind, size_t epochs, size_t batch_size) {
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.batch_size = batch_size;
  cfg.optimizer = OptimizerConfig::defaults(kind);
  cfg.seed = 3;
  return cfg;
}

TEST(Train, LearningRateZeroLeavesParametersUntouched) {
  SplitDataset ds = affine_tabular_data(20, 5);
  FusionModel model(tabular_spec());
  std::vector<std::vector<double>> before;
  for (const auto& p : model.trainable_params()) before.push_back(p.tensor.value());

  TrainConfig cfg = quick_config(OptimizerKind::kAdam, 3, 8);
  cfg.optimizer.alpha = 0.0;
  EvalReport report = train_model(model, ds, cfg);

  auto params = model.trainable_params();
  ASSERT_EQ(params.size(), before.size());
  for (size_t i = 0; i < params.size(); ++i) {
    const auto& now = params[i].tensor.value();
    ASSERT_EQ(now.size(), before[i].size());
    for (size_t k = 0; k < now.size(); ++k) EXPECT_EQ(now[k], before[i][k]);
  }
  ASSERT_EQ(report.trace.size(), 3u);
  EXPECT_EQ(report.best_epoch, 1u);  // identical validation scores keep the earliest epoch
  EXPECT_DOUBLE_EQ(report.trace[0].val_rmse, report.trace[2].val_rmse);
}

TEST(Train, LossDecreasesUnderAllThreeOptimizers) {
  SplitDataset ds = affine_tabular_data(32, 9);
  for (OptimizerKind kind : {OptimizerKind::kAdam, OptimizerKind::kNadam, OptimizerKind::kAdamax}) {
    FusionModel model(tabular_spec());
    EvalReport report = train_model(model, ds, quick_config(kind, 3, 8));
    EXPECT_LT(report.trace.back().train_loss, report.trace.front().train_loss)
        << optimizer_name(kind);
  }
}

TEST(Train, DeterministicGivenSeed) {
  ToyData toy = toy_text_data(40, 13);
  TrainConfig cfg = quick_config(OptimizerKind::kAdamax, 3, 8);
  FusionModel a(context_spec(toy.vocab_size));
  FusionModel b(context_spec(toy.vocab_size));
  EvalReport ra = train_model(a, toy.split, cfg);
  EvalReport rb = train_model(b, toy.split, cfg);
  ASSERT_EQ(ra.trace.size(), rb.trace.size());
  for (size_t i = 0; i < ra.trace.size(); ++i) {
    EXPECT_DOUBLE_EQ(ra.trace[i].train_loss, rb.trace[i].train_loss);
    EXPECT_DOUBLE_EQ(ra.trace[i].val_rmse, rb.trace[i].val_rmse);
  }
  EXPECT_EQ(ra.best_epoch, rb.best_epoch);
  EXPECT_EQ(ra.optimizer_steps, rb.optimizer_steps);
  EXPECT_DOUBLE_EQ(ra.test_rmse, rb.test_rmse);
}

TEST(Train, FrozenEncoderStaysBitIdentical) {
  ToyData toy = toy_text_data(30, 17);
  FusionModel model(context_spec(toy.vocab_size));
  std::vector<std::pair<std::string, std::vector<double>>> before;
  for (const auto& p : model.all_params())
    if (p.name.rfind("encoder.", 0) == 0) before.push_back({p.name, p.tensor.value()});
  ASSERT_FALSE(before.empty());

  train_model(model, toy.split, quick_config(OptimizerKind::kAdam, 2, 8));
  size_t checked = 0;
  for (const auto& p : model.all_params()) {
    if (p.name.rfind("encoder.", 0) != 0) continue;
    const auto& saved = before[checked].second;
    ASSERT_EQ(before[checked].first, p.name);
    const auto& now = p.tensor.value();
    ASSERT_EQ(now.size(), saved.size());
    for (size_t k = 0; k < now.size(); ++k) EXPECT_EQ(now[k], saved[k]) << p.name;
    ++checked;
  }
  EXPECT_EQ(checked, before.size());
}

TEST(Train, BestValidationSnapshotContract) {
  ToyData toy = toy_text_data(40, 19);
  FusionModel model(context_spec(toy.vocab_size));
  TrainConfig cfg = quick_config(OptimizerKind::kAdam, 10, 8);
  EvalReport report = train_model(model, toy.split, cfg);

  ASSERT_EQ(report.trace.size(), 10u);
  ASSERT_GE(report.best_epoch, 1u);
  ASSERT_LE(report.best_epoch, 10u);
  double min_val = report.trace[0].val_rmse;
  for (const auto& row : report.trace) min_val = std::min(min_val, row.val_rmse);
  EXPECT_DOUBLE_EQ(report.trace[report.best_epoch - 1].val_rmse, min_val);
  // Restored snapshot re-evaluates to exactly the recorded best score.
  EXPECT_DOUBLE_EQ(report.val_rmse, min_val);
  EXPECT_DOUBLE_EQ(dataset_rmse(model, toy.split.validation, cfg.batch_size), min_val);

  size_t batches_per_epoch = (toy.split.train.size() + cfg.batch_size - 1) / cfg.batch_size;
  EXPECT_EQ(report.optimizer_steps, 10u * batches_per_epoch);
}

TEST(Train, PartialFinalBatchStillTrains) {
  SplitDataset ds = affine_tabular_data(10, 23);
  FusionModel model(tabular_spec());
  EvalReport report = train_model(model, ds, quick_config(OptimizerKind::kAdam, 3, 4));
  EXPECT_EQ(report.optimizer_steps, 9u);  // 4 + 4 + 2 per epoch
}

TEST(Train, AbortsWithEpochContextOnNonFiniteLoss) {
  SplitDataset ds = affine_tabular_data(12, 29);
  FusionModel model(tabular_spec());
  auto params = model.trainable_params();
  params[0].tensor.value()[0] = std::nan("");
  try {
    train_model(model, ds, quick_config(OptimizerKind::kAdam, 2, 8));
    FAIL() << "expected a ValueError";
  } catch (const ValueError& err) {
    EXPECT_NE(std::string(err.what()).find("epoch 1"), std::string::npos) << err.what();
  }
}

TEST(Train, ValidatesInputs) {
  SplitDataset ds = affine_tabular_data(12, 31);
  FusionModel model(tabular_spec());
  TrainConfig cfg = quick_config(OptimizerKind::kAdam, 2, 8);

  TrainConfig bad = cfg;
  bad.epochs = 0;
  EXPECT_THROW(train_model(model, ds, bad), ValueError);
  bad = cfg;
  bad.batch_size = 0;
  EXPECT_THROW(train_model(model, ds, bad), ValueError);

  SplitDataset hollow = ds;
  hollow.validation.clear();
  EXPECT_THROW(train_model(model, hollow, cfg), ValueError);
}

TEST(Eval, BatchSizeNeverChangesPredictions) {
  ToyData toy = toy_text_data(25, 37);
  FusionModel model(context_spec(toy.vocab_size));
  auto small = predict_all(model, toy.split.train, 3);
  auto large = predict_all(model, toy.split.train, 64);
  ASSERT_EQ(small.size(), large.size());
  for (size_t i = 0; i < small.size(); ++i) EXPECT_DOUBLE_EQ(small[i], large[i]);
  EXPECT_THROW(predict_all(model, toy.split.train, 0), ValueError);
  EXPECT_THROW(dataset_rmse(model, {}, 8), ValueError);
}

TEST(Train, OverfitsATinyAffineDataset) {
  SplitDataset ds = affine_tabular_data(16, 41);
  FusionModel model(tabular_spec());
  TrainConfig cfg = quick_config(OptimizerKind::kAdamax, 500, 16);
  EvalReport report = train_model(model, ds, cfg);
  EXPECT_LT(report.train_rmse, 0.1);
  EXPECT_LT(report.trace.back().train_loss, report.trace.front().train_loss);
}

TEST(Trace, CsvLayout) {
  std::vector<EpochTrace> trace = {{1, 0.25, 0.5}, {2, 0.0625, 0.25}};
  std::string path = testing::TempDir() + "trace.csv";
  write_trace_csv(path, trace);
  auto lines = split_on(trim(read_text_file(path)), '\n');
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_EQ(lines[0], "epoch,train_loss,val_rmse");
  auto row = split_on(lines[1], ',');
  ASSERT_EQ(row.size(), 3u);
  EXPECT_EQ(row[0], "1");
  EXPECT_DOUBLE_EQ(std::stod(row[1]), 0.25);
  EXPECT_DOUBLE_EQ(std::stod(row[2]), 0.5);
  std::remove(path.c_str());
}

TEST(Benchmarks, LinearRegressionNailsAffineTargets) {
  SplitDataset ds = affine_tabular_data(40, 43);
  BenchmarkResult r = evaluate_linear_benchmark(ds);
  EXPECT_LT(r.train_rmse, 1e-10);  // the target is exactly affine in the features
  EXPECT_LT(r.val_rmse, 1e-10);
  EXPECT_LT(r.test_rmse, 1e-10);
}

TEST(Benchmarks, RandomBaselineIsSeededAndBounded) {
  SplitDataset ds = affine_tabular_data(50, 47);
  BenchmarkResult a = evaluate_random_benchmark(ds, 7);
  BenchmarkResult b = evaluate_random_benchmark(ds, 7);
  BenchmarkResult c = evaluate_random_benchmark(ds, 8);
  EXPECT_DOUBLE_EQ(a.train_rmse, b.train_rmse);
  EXPECT_DOUBLE_EQ(a.test_rmse, b.test_rmse);
  EXPECT_NE(a.train_rmse, c.train_rmse);
  for (double v : {a.train_rmse, a.val_rmse, a.test_rmse}) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
}

}  // namespace
}  // namespace crossfuse
