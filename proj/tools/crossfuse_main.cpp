// crossfuse command-line front end.
//
// Subcommands: ingest, synth, train, grid, compare-optimizers, strata.
// Every command prints its resolved configuration at startup (flags override
// config-file entries, which override defaults), writes plain CSV with a
// header row, and reruns byte-identically given the same seeds except for
// wall-time fields, which are always the final column of a report.
//
// Exit status: 0 on success; nonzero with a one-line diagnostic of the form
//   error: <category>: <message>
// on failure, where <category> is one of usage, io, data, value, shape,
// or internal.
//
// The environment variable CROSSFUSE_OUT, when set, is prepended to every
// relative output path (input paths are taken as given).

#include <CLI11.hpp>

#include <atomic>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "crossfuse/data.hpp"
#include "crossfuse/models.hpp"
#include "crossfuse/optim.hpp"
#include "crossfuse/text.hpp"
#include "crossfuse/train.hpp"

namespace cf = crossfuse;

namespace {

// ---------------------------------------------------------------------------
// Output-path handling

std::string resolve_out(const std::string& path) {
  if (path.empty()) return path;
  std::filesystem::path p(path);
  if (p.is_absolute()) return path;
  const char* root = std::getenv("CROSSFUSE_OUT");
  if (root == nullptr || *root == '\0') return path;
  return (std::filesystem::path(root) / p).string();
}

void ensure_parent_dir(const std::string& path) {
  std::filesystem::path parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
}

// ---------------------------------------------------------------------------
// Resolved-configuration echo (provenance header on stdout)

void echo(const std::string& key, const std::string& value) {
  std::cout << "config " << key << "=" << value << "\n";
}
void echo(const std::string& key, size_t value) { echo(key, std::to_string(value)); }
void echo(const std::string& key, int value) { echo(key, std::to_string(value)); }
void echo(const std::string& key, double value) { echo(key, cf::fmt_double(value)); }
void echo(const std::string& key, bool value) { echo(key, std::string(value ? "true" : "false")); }

// ---------------------------------------------------------------------------
// Flat key=value configuration files.
//
// Keys are the long option names without the leading dashes (epochs=40,
// out-dataset=data.csv, english-only=false). A key is applied only when the
// matching flag was absent from the command line, so precedence is always
// flags > file > defaults. Blank lines and #-comments are ignored.

void apply_config_file(CLI::App* cmd, const std::string& path) {
  std::string content = cf::read_text_file(path);
  std::istringstream in(content);
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string s = cf::trim(line);
    if (s.empty() || s[0] == '#') continue;
    size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw cf::UsageError(cf::strprintf("%s:%zu: expected key=value", path.c_str(), line_no));
    std::string key = cf::trim(s.substr(0, eq));
    std::string value = cf::trim(s.substr(eq + 1));
    if (key.empty())
      throw cf::UsageError(cf::strprintf("%s:%zu: empty configuration key", path.c_str(), line_no));
    if (key == "config")
      throw cf::UsageError(path + ": configuration files cannot nest other configuration files");
    CLI::Option* op = cmd->get_option_no_throw("--" + key);
    if (op == nullptr)
      throw cf::UsageError(path + ": unknown configuration key: " + key);
    if (op->count() > 0) continue;  // command line (or an earlier line) wins
    try {
      op->add_result(value);
      op->run_callback();
    } catch (const CLI::Error& e) {
      throw cf::UsageError(cf::strprintf("%s:%zu: bad value for %s: %s", path.c_str(), line_no,
                                         key.c_str(), e.what()));
    }
  }
}

// Required values may come from the command line or a configuration file, so
// they are enforced here instead of by the parser.
void require(const std::string& value, const char* flag) {
  if (value.empty()) throw cf::UsageError(std::string("missing required option ") + flag);
}

// ---------------------------------------------------------------------------
// Shared option bundles

struct DataArgs {
  std::string dataset;
  std::string vocab_file;
  uint64_t split_seed = 1;
  bool raw_counts = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--dataset", dataset, "dataset CSV produced by ingest");
    cmd->add_option("--vocab-file", vocab_file,
                    "vocabulary file produced by ingest (required for text models)");
    cmd->add_option("--split-seed", split_seed, "seed for the train/validation/test shuffle");
    cmd->add_flag("--raw-counts", raw_counts,
                  "skip min-max normalization of the count features");
  }
  void print() const {
    echo("dataset", dataset);
    echo("vocab_file", vocab_file);
    echo("split_seed", split_seed);
    echo("raw_counts", raw_counts);
  }
};

struct ModelArgs {
  std::string model = "context-aware";
  std::string preset = "tiny";
  size_t fusion_heads = 8;
  bool unfrozen = false;
  bool text_as_query = false;
  uint64_t seed = 1;

  void attach(CLI::App* cmd, bool with_model_name = true) {
    if (with_model_name)
      cmd->add_option("--model", model,
                      "architecture: context-aware, context-fusion, feature-fusion, "
                      "textual, or tabular");
    cmd->add_option("--preset", preset, "encoder preset: tiny, small, or paper-base");
    cmd->add_option("--fusion-heads", fusion_heads, "attention heads in the fusion block");
    cmd->add_flag("--unfrozen", unfrozen, "train the text encoder instead of freezing it");
    cmd->add_flag("--text-as-query", text_as_query,
                  "swap the cross-attention roles (text queries tabular tokens)");
    cmd->add_option("--seed", seed, "seed for weight initialization and batch shuffling");
  }
  void print(bool with_model_name = true) const {
    if (with_model_name) echo("model", model);
    echo("preset", preset);
    echo("fusion_heads", fusion_heads);
    echo("unfrozen", unfrozen);
    echo("text_as_query", text_as_query);
    echo("seed", seed);
  }
};

struct FitArgs {
  std::string optimizer = "adamax";
  double alpha = 0.0;  // 0 keeps the optimizer's default step size
  size_t epochs = 500;
  size_t batch = 256;
  bool no_shuffle = false;

  void attach(CLI::App* cmd, bool with_optimizer = true) {
    if (with_optimizer)
      cmd->add_option("--optimizer", optimizer, "adam, nadam, or adamax");
    cmd->add_option("--alpha", alpha, "step size (0 keeps the optimizer default)");
    cmd->add_option("--epochs", epochs, "number of training epochs");
    cmd->add_option("--batch", batch, "minibatch size");
    cmd->add_flag("--no-shuffle", no_shuffle, "keep dataset order within every epoch");
  }
  void print(bool with_optimizer = true) const {
    if (with_optimizer) echo("optimizer", optimizer);
    echo("alpha", alpha == 0.0 ? std::string("default") : cf::fmt_double(alpha));
    echo("epochs", epochs);
    echo("batch", batch);
    echo("no_shuffle", no_shuffle);
  }

  cf::TrainConfig config(cf::OptimizerKind kind, uint64_t seed) const {
    cf::TrainConfig tc;
    tc.epochs = epochs;
    tc.batch_size = batch;
    tc.optimizer = cf::OptimizerConfig::defaults(kind);
    if (alpha != 0.0) tc.optimizer.alpha = alpha;
    tc.seed = seed;
    tc.shuffle = !no_shuffle;
    return tc;
  }
};

// ---------------------------------------------------------------------------
// Dataset loading shared by train/grid/compare-optimizers/strata

struct LoadedData {
  cf::SplitDataset split;
  size_t vocab_size = 0;
  size_t len_max = 0;
};

LoadedData load_split(const DataArgs& args, bool needs_vocab) {
  require(args.dataset, "--dataset");
  std::vector<cf::Example> examples = cf::load_dataset_csv(args.dataset);
  LoadedData out;
  out.len_max = examples[0].seq.ids.size();
  if (!args.vocab_file.empty()) {
    out.vocab_size = cf::Vocabulary::load(args.vocab_file).size();
  } else if (needs_vocab) {
    throw cf::UsageError("--vocab-file is required when the model reads text");
  }
  out.split = cf::split_dataset(std::move(examples), args.split_seed);
  if (!args.raw_counts) cf::normalize_count_features(out.split);
  return out;
}

// The encoder geometry comes from the preset, but sequence length and
// vocabulary are properties of the dataset, so they always follow it.
cf::ModelSpec make_spec(const ModelArgs& args, const std::string& model_name, size_t vocab_size,
                        size_t len_max) {
  cf::ModelSpec spec;
  spec.architecture = cf::architecture_from_name(model_name);
  spec.encoder = cf::EncoderConfig::preset(args.preset);
  spec.encoder.vocab_size = vocab_size;
  spec.encoder.len_max = len_max;
  spec.encoder.frozen = !args.unfrozen;
  spec.tab_features = cf::kTabFeatureCount;
  spec.n_heads_fusion = args.fusion_heads;
  spec.text_as_query = args.text_as_query;
  spec.seed = args.seed;
  return cf::normalize_spec(spec);
}

// ---------------------------------------------------------------------------
// Report rows

struct ReportRow {
  std::string model, modality, preset, optimizer;
  double train_rmse = 0.0, val_rmse = 0.0, test_rmse = 0.0;
  std::string best_epoch;    // empty for benchmarks and checkpoint evaluations
  std::string parameters;    // trainable parameter count
  std::string wall_seconds;  // final column; empty for benchmarks
};

constexpr const char* kReportHeader =
    "model,modality,preset,optimizer,train_rmse,val_rmse,test_rmse,"
    "best_epoch,parameters,wall_seconds";

void write_report_csv(const std::string& path, const std::vector<ReportRow>& rows) {
  std::string out(kReportHeader);
  out += "\n";
  for (const ReportRow& r : rows) {
    out += r.model + "," + r.modality + "," + r.preset + "," + r.optimizer + ",";
    out += cf::fmt_double(r.train_rmse) + "," + cf::fmt_double(r.val_rmse) + "," +
           cf::fmt_double(r.test_rmse) + ",";
    out += r.best_epoch + "," + r.parameters + "," + r.wall_seconds + "\n";
  }
  ensure_parent_dir(path);
  cf::write_text_file(path, out);
}

ReportRow row_from_report(const cf::ModelSpec& spec, const std::string& preset,
                          const std::string& optimizer, const cf::EvalReport& rep) {
  ReportRow row;
  row.model = cf::architecture_name(spec.architecture);
  row.modality = cf::modality_label(spec.architecture);
  row.preset = preset;
  row.optimizer = optimizer;
  row.train_rmse = rep.train_rmse;
  row.val_rmse = rep.val_rmse;
  row.test_rmse = rep.test_rmse;
  row.best_epoch = std::to_string(rep.best_epoch);
  row.parameters = std::to_string(rep.parameters.trainable);
  row.wall_seconds = cf::fmt_double(rep.wall_seconds);
  return row;
}

// ---------------------------------------------------------------------------
// ingest

struct IngestCmd {
  std::string reviews, users, businesses;
  std::string category = "restaurants";
  int year = 0;
  bool english_only = true;
  size_t sample = 10000;
  uint64_t seed = 1;
  size_t vocab_size = 1000;
  size_t len_max = 64;
  std::string out_dataset = "dataset.csv";
  std::string out_vocab = "dataset.vocab";

  void run() const {
    require(reviews, "--reviews");
    require(users, "--users");
    require(businesses, "--businesses");
    echo("reviews", reviews);
    echo("users", users);
    echo("businesses", businesses);
    echo("category", category);
    echo("year", year);
    echo("english_only", english_only);
    echo("sample", sample);
    echo("seed", seed);
    echo("vocab_size", vocab_size);
    echo("len_max", len_max);
    echo("out_dataset", resolve_out(out_dataset));
    echo("out_vocab", resolve_out(out_vocab));

    cf::IngestStats stats;
    std::vector<cf::ReviewRecord> records = cf::load_review_corpus(reviews, users, businesses, &stats);
    cf::PipelineConfig pc;
    pc.category = cf::category_from_name(category);
    pc.year = year;
    pc.english_only = english_only;
    pc.sample_n = sample;
    pc.seed = seed;
    pc.vocab_size = vocab_size;
    pc.len_max = len_max;
    cf::BuiltDataset built = cf::build_dataset(records, pc);

    std::string dataset_path = resolve_out(out_dataset);
    std::string vocab_path = resolve_out(out_vocab);
    ensure_parent_dir(dataset_path);
    ensure_parent_dir(vocab_path);
    cf::save_dataset_csv(dataset_path, built.examples);
    built.vocab.save(vocab_path);

    std::cout << "ingest: lines=" << stats.lines << " malformed=" << stats.malformed
              << " unjoined=" << stats.unjoined << " joined=" << stats.joined << "\n";
    std::cout << "ingest: wrote " << built.examples.size() << " examples to " << dataset_path
              << " (vocabulary " << built.vocab.size() << " tokens in " << vocab_path << ")\n";
  }
};

// ---------------------------------------------------------------------------
// synth

struct SynthCmd {
  size_t n = 2000;
  uint64_t seed = 1;
  double sigma = 0.05;
  std::string out_dir = "synth";

  void run() const {
    std::string dir = resolve_out(out_dir);
    echo("n", n);
    echo("seed", seed);
    echo("sigma", sigma);
    echo("out_dir", dir);

    std::vector<cf::ReviewRecord> records = cf::synth_generate(n, seed, sigma);
    std::filesystem::create_directories(dir);
    std::filesystem::path base(dir);
    cf::write_review_corpus(records, (base / "review.json").string(),
                            (base / "user.json").string(), (base / "business.json").string());
    std::cout << "synth: wrote " << records.size() << " reviews to " << dir
              << "/{review,user,business}.json\n";
  }
};

// ---------------------------------------------------------------------------
// train

struct TrainCmd {
  DataArgs data;
  ModelArgs model;
  FitArgs fit;
  std::string out = "report.csv";
  std::string checkpoint;  // defaults to the report path with a .ckpt suffix
  std::string trace;       // optional per-epoch trace CSV
  std::string eval_checkpoint;  // evaluate this checkpoint instead of training

  std::string checkpoint_path() const {
    if (!checkpoint.empty()) return resolve_out(checkpoint);
    std::filesystem::path p(resolve_out(out));
    p.replace_extension(".ckpt");
    return p.string();
  }

  void run() const {
    data.print();
    model.print();
    fit.print();
    echo("out", resolve_out(out));
    echo("checkpoint", checkpoint_path());
    echo("trace", trace.empty() ? std::string() : resolve_out(trace));
    echo("eval_checkpoint", eval_checkpoint);

    cf::Architecture arch = cf::architecture_from_name(model.model);
    if (!cf::is_neural(arch))
      throw cf::UsageError("train expects a neural architecture; benchmarks are computed by grid");
    LoadedData d = load_split(data, cf::uses_text(arch));
    cf::ModelSpec spec = make_spec(model, model.model, d.vocab_size, d.len_max);
    cf::FusionModel net(spec);

    std::string report_path = resolve_out(out);
    if (!eval_checkpoint.empty()) {
      net.load_checkpoint(eval_checkpoint);
      ReportRow row;
      row.model = cf::architecture_name(arch);
      row.modality = cf::modality_label(arch);
      row.preset = model.preset;
      row.optimizer = fit.optimizer;
      row.train_rmse = cf::dataset_rmse(net, d.split.train, fit.batch);
      row.val_rmse = cf::dataset_rmse(net, d.split.validation, fit.batch);
      row.test_rmse = cf::dataset_rmse(net, d.split.test, fit.batch);
      row.parameters = std::to_string(net.counted_params().trainable);
      write_report_csv(report_path, {row});
      std::cout << "eval: test_rmse=" << cf::fmt_double(row.test_rmse) << " report=" << report_path
                << "\n";
      return;
    }

    cf::TrainConfig tc = fit.config(cf::optimizer_from_name(fit.optimizer), model.seed);
    cf::EvalReport rep = cf::train_model(net, d.split, tc);

    write_report_csv(report_path, {row_from_report(spec, model.preset, fit.optimizer, rep)});
    std::string ckpt_path = checkpoint_path();
    ensure_parent_dir(ckpt_path);
    net.save_checkpoint(ckpt_path);
    if (!trace.empty()) {
      std::string trace_path = resolve_out(trace);
      ensure_parent_dir(trace_path);
      cf::write_trace_csv(trace_path, rep.trace);
    }
    std::cout << "train: best_epoch=" << rep.best_epoch
              << " val_rmse=" << cf::fmt_double(rep.val_rmse)
              << " test_rmse=" << cf::fmt_double(rep.test_rmse) << " report=" << report_path
              << " checkpoint=" << ckpt_path << "\n";
  }
};

// ---------------------------------------------------------------------------
// grid

struct GridCmd {
  DataArgs data;
  ModelArgs model;  // model name unused; grid takes a list
  FitArgs fit;      // optimizer unused; grid takes a list
  std::string models = "context-aware,context-fusion,feature-fusion,textual,tabular";
  std::string optimizers = "adamax";
  size_t jobs = 1;
  bool no_benchmarks = false;
  std::string out = "grid.csv";

  void run() const {
    data.print();
    model.print(/*with_model_name=*/false);
    fit.print(/*with_optimizer=*/false);
    echo("models", models);
    echo("optimizers", optimizers);
    echo("jobs", jobs);
    echo("no_benchmarks", no_benchmarks);
    echo("out", resolve_out(out));
    if (jobs == 0) throw cf::UsageError("--jobs must be at least 1");

    struct Cell {
      std::string model_name, optimizer_name;
      cf::ModelSpec spec;
      cf::TrainConfig tc;
    };
    std::vector<std::string> model_names, optimizer_names;
    for (const std::string& m : cf::split_on(models, ',')) {
      std::string name = cf::trim(m);
      if (name.empty()) continue;
      cf::Architecture a = cf::architecture_from_name(name);
      if (!cf::is_neural(a))
        throw cf::UsageError("grid cells must be neural architectures; " + name +
                             " is appended automatically as a benchmark");
      model_names.push_back(name);
    }
    for (const std::string& o : cf::split_on(optimizers, ',')) {
      std::string name = cf::trim(o);
      if (!name.empty()) {
        cf::optimizer_from_name(name);  // validate early
        optimizer_names.push_back(name);
      }
    }
    if (model_names.empty()) throw cf::UsageError("grid needs at least one model");
    if (optimizer_names.empty()) throw cf::UsageError("grid needs at least one optimizer");

    bool any_text = false;
    for (const std::string& m : model_names)
      any_text = any_text || cf::uses_text(cf::architecture_from_name(m));
    LoadedData d = load_split(data, any_text);

    // Cells are laid out model-major and each one gets its own seed
    // (base seed + cell index) for both initialization and shuffling.
    std::vector<Cell> cells;
    for (const std::string& m : model_names)
      for (const std::string& o : optimizer_names) {
        Cell c;
        c.model_name = m;
        c.optimizer_name = o;
        uint64_t cell_seed = model.seed + cells.size();
        ModelArgs cell_args = model;
        cell_args.seed = cell_seed;
        c.spec = make_spec(cell_args, m, d.vocab_size, d.len_max);
        c.tc = fit.config(cf::optimizer_from_name(o), cell_seed);
        cells.push_back(std::move(c));
      }

    std::vector<ReportRow> rows(cells.size());
    std::vector<std::exception_ptr> errors(cells.size());
    std::atomic<size_t> next{0};
    auto worker = [&]() {
      while (true) {
        size_t i = next.fetch_add(1);
        if (i >= cells.size()) return;
        try {
          cf::FusionModel net(cells[i].spec);
          cf::EvalReport rep = cf::train_model(net, d.split, cells[i].tc);
          rows[i] = row_from_report(cells[i].spec, model.preset, cells[i].optimizer_name, rep);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    };
    size_t n_workers = std::min(jobs, cells.size());
    if (n_workers <= 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (size_t t = 0; t < n_workers; ++t) pool.emplace_back(worker);
      for (std::thread& t : pool) t.join();
    }
    for (const std::exception_ptr& e : errors)
      if (e) std::rethrow_exception(e);

    if (!no_benchmarks) {
      cf::BenchmarkResult lin = cf::evaluate_linear_benchmark(d.split);
      ReportRow lin_row;
      lin_row.model = cf::architecture_name(cf::Architecture::kLinearRegression);
      lin_row.modality = cf::modality_label(cf::Architecture::kLinearRegression);
      lin_row.train_rmse = lin.train_rmse;
      lin_row.val_rmse = lin.val_rmse;
      lin_row.test_rmse = lin.test_rmse;
      lin_row.parameters = std::to_string(cf::kTabFeatureCount + 1);
      rows.push_back(lin_row);

      cf::BenchmarkResult rnd = cf::evaluate_random_benchmark(d.split, model.seed);
      ReportRow rnd_row;
      rnd_row.model = cf::architecture_name(cf::Architecture::kRandom);
      rnd_row.modality = cf::modality_label(cf::Architecture::kRandom);
      rnd_row.train_rmse = rnd.train_rmse;
      rnd_row.val_rmse = rnd.val_rmse;
      rnd_row.test_rmse = rnd.test_rmse;
      rnd_row.parameters = "0";
      rows.push_back(rnd_row);
    }

    std::stable_sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
      return a.test_rmse < b.test_rmse;
    });
    std::string out_path = resolve_out(out);
    write_report_csv(out_path, rows);
    std::cout << "grid: " << rows.size() << " rows sorted by test RMSE -> " << out_path << "\n";
  }
};

// ---------------------------------------------------------------------------
// compare-optimizers

struct CompareCmd {
  DataArgs data;
  ModelArgs model;
  FitArgs fit;  // optimizer flag unused; all three run
  std::string out_dir = "optimizers";

  void run() const {
    std::string dir = resolve_out(out_dir);
    data.print();
    model.print();
    fit.print(/*with_optimizer=*/false);
    echo("out_dir", dir);

    cf::Architecture arch = cf::architecture_from_name(model.model);
    if (!cf::is_neural(arch)) throw cf::UsageError("compare-optimizers expects a neural model");
    LoadedData d = load_split(data, cf::uses_text(arch));
    cf::ModelSpec spec = make_spec(model, model.model, d.vocab_size, d.len_max);
    std::filesystem::create_directories(dir);

    // Every optimizer starts from the same seed, hence identical weights;
    // the traces differ only through the update rule.
    for (cf::OptimizerKind kind :
         {cf::OptimizerKind::kAdam, cf::OptimizerKind::kNadam, cf::OptimizerKind::kAdamax}) {
      cf::FusionModel net(spec);
      cf::TrainConfig tc = fit.config(kind, model.seed);
      cf::EvalReport rep = cf::train_model(net, d.split, tc);
      std::string path =
          (std::filesystem::path(dir) / ("trace_" + cf::optimizer_name(kind) + ".csv")).string();
      cf::write_trace_csv(path, rep.trace);
      std::cout << "compare-optimizers: " << cf::optimizer_name(kind)
                << " best_epoch=" << rep.best_epoch
                << " val_rmse=" << cf::fmt_double(rep.val_rmse) << " -> " << path << "\n";
    }
  }
};

// ---------------------------------------------------------------------------
// strata

struct StrataCmd {
  DataArgs data;
  ModelArgs model;
  std::string checkpoint;
  size_t k = 5;
  size_t batch = 256;
  std::string out = "strata.csv";

  void run() const {
    require(checkpoint, "--checkpoint");
    data.print();
    model.print();
    echo("checkpoint", checkpoint);
    echo("k", k);
    echo("batch", batch);
    echo("out", resolve_out(out));

    cf::Architecture arch = cf::architecture_from_name(model.model);
    if (!cf::is_neural(arch)) throw cf::UsageError("strata expects a neural model checkpoint");
    LoadedData d = load_split(data, cf::uses_text(arch));
    cf::ModelSpec spec = make_spec(model, model.model, d.vocab_size, d.len_max);
    cf::FusionModel net(spec);
    net.load_checkpoint(checkpoint);  // rejects a spec-hash mismatch

    std::string out_csv = "split,stratum,count,mean_tokens,rmse\n";
    const std::pair<const char*, const std::vector<cf::Example>*> parts[] = {
        {"train", &d.split.train}, {"validation", &d.split.validation}, {"test", &d.split.test}};
    for (const auto& [name, part] : parts) {
      std::vector<double> preds = cf::predict_all(net, *part, batch);
      std::vector<size_t> assignment = cf::token_strata(*part, k);
      std::vector<cf::StratumSummary> sums = cf::strata_summary(*part, assignment, k, &preds);
      for (size_t s = 0; s < sums.size(); ++s) {
        out_csv += std::string(name) + "," + std::to_string(s + 1) + "," +
                   std::to_string(sums[s].count) + "," + cf::fmt_double(sums[s].mean_tokens) +
                   "," + cf::fmt_double(sums[s].rmse) + "\n";
      }
    }
    std::string out_path = resolve_out(out);
    ensure_parent_dir(out_path);
    cf::write_text_file(out_path, out_csv);
    std::cout << "strata: " << k << " buckets per split -> " << out_path << "\n";
  }
};

// Adds --config and registers a callback that merges the file (if any) into
// the command's options before running it.
template <typename Cmd>
void finish_command(CLI::App* cmd, Cmd& state, std::string& config_path) {
  cmd->add_option("--config", config_path,
                  "flat key=value configuration file (flags take precedence)");
  cmd->callback([cmd, &state, &config_path] {
    if (!config_path.empty()) apply_config_file(cmd, config_path);
    state.run();
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"crossfuse: multimodal rating prediction experiments"};
  app.require_subcommand(1);
  std::string config_paths[6];

  IngestCmd ingest;
  CLI::App* ingest_cmd = app.add_subcommand("ingest", "build a dataset from review JSON files");
  ingest_cmd->add_option("--reviews", ingest.reviews, "review JSONL file");
  ingest_cmd->add_option("--users", ingest.users, "user JSONL file");
  ingest_cmd->add_option("--businesses", ingest.businesses, "business JSONL file");
  ingest_cmd->add_option("--category", ingest.category, "restaurants, nightlife, or cafe");
  ingest_cmd->add_option("--year", ingest.year, "keep only reviews from this year (0 disables)");
  ingest_cmd->add_flag("--english-only,!--no-english-only", ingest.english_only,
                       "require at least one alphabetic token");
  ingest_cmd->add_option("--sample", ingest.sample, "uniform sample size after dedup (0 keeps all)");
  ingest_cmd->add_option("--seed", ingest.seed, "sampling seed");
  ingest_cmd->add_option("--vocab-size", ingest.vocab_size, "vocabulary size target");
  ingest_cmd->add_option("--len-max", ingest.len_max, "token sequence length");
  ingest_cmd->add_option("--out-dataset", ingest.out_dataset, "dataset CSV path");
  ingest_cmd->add_option("--out-vocab", ingest.out_vocab, "vocabulary file path");
  finish_command(ingest_cmd, ingest, config_paths[0]);

  SynthCmd synth;
  CLI::App* synth_cmd = app.add_subcommand("synth", "generate a synthetic review corpus");
  synth_cmd->add_option("--n", synth.n, "number of reviews");
  synth_cmd->add_option("--seed", synth.seed, "generator seed");
  synth_cmd->add_option("--sigma", synth.sigma, "latent noise level");
  synth_cmd->add_option("--out-dir", synth.out_dir, "directory for the three JSONL files");
  finish_command(synth_cmd, synth, config_paths[1]);

  TrainCmd train;
  CLI::App* train_cmd = app.add_subcommand("train", "train one model and write report + checkpoint");
  train.data.attach(train_cmd);
  train.model.attach(train_cmd);
  train.fit.attach(train_cmd);
  train_cmd->add_option("--out", train.out, "report CSV path");
  train_cmd->add_option("--checkpoint", train.checkpoint,
                        "checkpoint path (default: report path with .ckpt)");
  train_cmd->add_option("--trace", train.trace, "optional per-epoch trace CSV path");
  train_cmd->add_option("--eval-checkpoint", train.eval_checkpoint,
                        "skip training; evaluate this checkpoint on the splits");
  finish_command(train_cmd, train, config_paths[2]);

  GridCmd grid;
  CLI::App* grid_cmd = app.add_subcommand("grid", "train a model/optimizer grid into one table");
  grid.data.attach(grid_cmd);
  grid.model.attach(grid_cmd, /*with_model_name=*/false);
  grid.fit.attach(grid_cmd, /*with_optimizer=*/false);
  grid_cmd->add_option("--models", grid.models, "comma-separated neural architectures");
  grid_cmd->add_option("--optimizers", grid.optimizers, "comma-separated optimizers");
  grid_cmd->add_option("--jobs", grid.jobs, "worker threads for grid cells");
  grid_cmd->add_flag("--no-benchmarks", grid.no_benchmarks,
                     "skip the linear-regression and random rows");
  grid_cmd->add_option("--out", grid.out, "results CSV path");
  finish_command(grid_cmd, grid, config_paths[3]);

  CompareCmd compare;
  CLI::App* compare_cmd =
      app.add_subcommand("compare-optimizers", "write per-epoch traces for adam, nadam, adamax");
  compare.data.attach(compare_cmd);
  compare.model.attach(compare_cmd);
  compare.fit.attach(compare_cmd, /*with_optimizer=*/false);
  compare_cmd->add_option("--out-dir", compare.out_dir, "directory for the three trace CSVs");
  finish_command(compare_cmd, compare, config_paths[4]);

  StrataCmd strata;
  CLI::App* strata_cmd =
      app.add_subcommand("strata", "per-token-count accuracy table for a trained checkpoint");
  strata.data.attach(strata_cmd);
  strata.model.attach(strata_cmd);
  strata_cmd->add_option("--checkpoint", strata.checkpoint, "trained model checkpoint");
  strata_cmd->add_option("--k", strata.k, "number of token strata");
  strata_cmd->add_option("--batch", strata.batch, "evaluation batch size");
  strata_cmd->add_option("--out", strata.out, "strata CSV path");
  finish_command(strata_cmd, strata, config_paths[5]);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    std::cerr << "error: usage: " << e.what() << "\n";
    return 2;
  } catch (const cf::Error& e) {
    std::cerr << "error: " << e.category() << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
