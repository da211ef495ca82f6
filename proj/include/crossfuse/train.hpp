#pragma once

// The fixed-length training loop: seeded minibatch shuffling, MSE descent
// under one of the three adaptive optimizers, per-epoch validation RMSE, and
// a best-validation parameter snapshot. There is no early stopping -- every
// run executes all configured epochs and reports metrics from the snapshot.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "crossfuse/data.hpp"
#include "crossfuse/models.hpp"
#include "crossfuse/optim.hpp"
#include "crossfuse/rng.hpp"
#include "crossfuse/tensor.hpp"
#include "crossfuse/util.hpp"

namespace crossfuse {

struct TrainConfig {
  size_t epochs = 500;
  size_t batch_size = 256;
  OptimizerConfig optimizer = OptimizerConfig::defaults(OptimizerKind::kAdam);
  uint64_t seed = 1;     // drives the per-epoch shuffle
  bool shuffle = true;
};

struct EpochTrace {
  size_t epoch = 0;        // 1-based
  double train_loss = 0.0; // size-weighted mean of the epoch's minibatch MSEs
  double val_rmse = 0.0;
};

struct EvalReport {
  double train_rmse = 0.0;  // all three RMSEs are measured at the snapshot
  double val_rmse = 0.0;
  double test_rmse = 0.0;
  size_t best_epoch = 0;  // 1-based epoch whose validation RMSE was lowest
  size_t optimizer_steps = 0;
  double wall_seconds = 0.0;
  ParamCounts parameters;
  std::vector<EpochTrace> trace;
};

namespace detail {

struct Batch {
  std::vector<const TokenSequence*> seqs;
  Tensor x_tab;  // undefined when the model takes no tabular input
  Tensor y;      // (bs, 1)
};

inline Batch make_batch(const std::vector<Example>& examples, const std::vector<size_t>& order,
                        size_t begin, size_t end, size_t tab_features) {
  Batch b;
  size_t bs = end - begin;
  b.seqs.reserve(bs);
  std::vector<double> tab, y;
  tab.reserve(bs * tab_features);
  y.reserve(bs);
  for (size_t i = begin; i < end; ++i) {
    const Example& e = examples[order[i]];
    b.seqs.push_back(&e.seq);
    if (tab_features > 0) {
      if (e.x_tab.size() != tab_features)
        throw ShapeError(strprintf("example has %zu tabular features, model expects %zu",
                                   e.x_tab.size(), tab_features));
      tab.insert(tab.end(), e.x_tab.begin(), e.x_tab.end());
    }
    y.push_back(e.y);
  }
  if (tab_features > 0) b.x_tab = Tensor::from({bs, tab_features}, std::move(tab));
  b.y = Tensor::from({bs, 1}, std::move(y));
  return b;
}

inline std::vector<size_t> identity_order(size_t n) {
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  return order;
}

}  // namespace detail

// Streaming forward pass over a whole split; batch size never changes the
// numbers because every operation is row-independent.
inline std::vector<double> predict_all(const FusionModel& model,
                                       const std::vector<Example>& examples, size_t batch_size) {
  if (batch_size == 0) throw ValueError("batch_size must be at least 1");
  std::vector<double> out;
  out.reserve(examples.size());
  auto order = detail::identity_order(examples.size());
  size_t j = model.spec().tab_features;
  for (size_t at = 0; at < examples.size(); at += batch_size) {
    size_t end = std::min(examples.size(), at + batch_size);
    detail::Batch b = detail::make_batch(examples, order, at, end, j);
    Tensor pred = model.forward(b.seqs, b.x_tab);
    out.insert(out.end(), pred.value().begin(), pred.value().end());
  }
  return out;
}

inline double dataset_rmse(const FusionModel& model, const std::vector<Example>& examples,
                           size_t batch_size) {
  if (examples.empty()) throw ValueError("cannot evaluate an empty split");
  std::vector<double> target;
  target.reserve(examples.size());
  for (const auto& e : examples) target.push_back(e.y);
  return rmse(predict_all(model, examples, batch_size), target);
}

// Runs the full fixed-length loop and leaves the model holding the
// best-validation snapshot. Validation ties keep the earliest epoch.
inline EvalReport train_model(FusionModel& model, const SplitDataset& data,
                              const TrainConfig& cfg, std::ostream* log = nullptr) {
  if (cfg.epochs < 1) throw ValueError("epochs must be at least 1");
  if (cfg.batch_size < 1) throw ValueError("batch_size must be at least 1");
  if (data.train.empty() || data.validation.empty() || data.test.empty())
    throw ValueError("training requires nonempty train/validation/test splits");

  auto t0 = std::chrono::steady_clock::now();
  auto params = model.trainable_params();
  if (params.empty()) throw ValueError("model has no trainable parameters");
  Optimizer opt(cfg.optimizer, params);
  Rng shuffle_rng(cfg.seed);
  size_t j = model.spec().tab_features;
  size_t n = data.train.size();

  EvalReport report;
  report.trace.reserve(cfg.epochs);
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> snapshot;

  auto order = detail::identity_order(n);
  for (size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (cfg.shuffle) shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    size_t batch_index = 0;
    for (size_t at = 0; at < n; at += cfg.batch_size, ++batch_index) {
      size_t end = std::min(n, at + cfg.batch_size);  // the final short batch still trains
      try {
        detail::Batch b = detail::make_batch(data.train, order, at, end, j);
        Tensor pred = model.forward(b.seqs, b.x_tab);
        Tensor loss = mse_loss(pred, b.y);
        double value = loss.item();
        if (!std::isfinite(value))
          throw ValueError("training loss became non-finite");
        loss_sum += value * static_cast<double>(end - at);
        opt.zero_grad();
        backward(loss);
        opt.step();
      } catch (const Error& err) {
        throw ValueError(strprintf("epoch %zu, batch %zu: %s", epoch, batch_index, err.what()));
      }
    }
    double train_loss = loss_sum / static_cast<double>(n);
    double val = dataset_rmse(model, data.validation, cfg.batch_size);
    if (!std::isfinite(val))
      throw ValueError(strprintf("epoch %zu: validation RMSE became non-finite", epoch));
    report.trace.push_back({epoch, train_loss, val});
    if (val < best_val) {
      best_val = val;
      report.best_epoch = epoch;
      snapshot.clear();
      for (const auto& p : params) snapshot.push_back(p.tensor.value());
    }
    if (log)
      *log << "epoch " << epoch << " train_loss " << fmt_double(train_loss) << " val_rmse "
           << fmt_double(val) << "\n";
  }

  for (size_t i = 0; i < params.size(); ++i) params[i].tensor.value() = snapshot[i];
  report.optimizer_steps = opt.steps();
  report.train_rmse = dataset_rmse(model, data.train, cfg.batch_size);
  report.val_rmse = dataset_rmse(model, data.validation, cfg.batch_size);
  report.test_rmse = dataset_rmse(model, data.test, cfg.batch_size);
  report.parameters = model.counted_params();
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

inline void write_trace_csv(const std::string& path, const std::vector<EpochTrace>& trace) {
  std::ostringstream out;
  out << "epoch,train_loss,val_rmse\n";
  for (const auto& row : trace)
    out << row.epoch << "," << fmt_double(row.train_loss) << "," << fmt_double(row.val_rmse)
        << "\n";
  write_text_file(path, out.str());
}

// ---------------------------------------------------------------------------
// Non-neural benchmarks, evaluated on the same splits.

struct BenchmarkResult {
  double train_rmse = 0.0, val_rmse = 0.0, test_rmse = 0.0;
};

inline BenchmarkResult evaluate_linear_benchmark(const SplitDataset& data) {
  std::vector<std::vector<double>> x;
  std::vector<double> y;
  for (const auto& e : data.train) {
    x.push_back(e.x_tab);
    y.push_back(e.y);
  }
  auto coeffs = fit_linear_regression(x, y);
  BenchmarkResult r;
  auto eval = [&coeffs](const std::vector<Example>& part) {
    std::vector<double> pred, target;
    for (const auto& e : part) {
      pred.push_back(predict_linear(coeffs, e.x_tab));
      target.push_back(e.y);
    }
    return rmse(pred, target);
  };
  r.train_rmse = eval(data.train);
  r.val_rmse = eval(data.validation);
  r.test_rmse = eval(data.test);
  return r;
}

inline BenchmarkResult evaluate_random_benchmark(const SplitDataset& data, uint64_t seed) {
  Rng rng(seed);
  BenchmarkResult r;
  auto eval = [&rng](const std::vector<Example>& part) {
    std::vector<double> target;
    for (const auto& e : part) target.push_back(e.y);
    return rmse(random_predict(part.size(), rng), target);
  };
  r.train_rmse = eval(data.train);
  r.val_rmse = eval(data.validation);
  r.test_rmse = eval(data.test);
  return r;
}

}  // namespace crossfuse
