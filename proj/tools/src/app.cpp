#include "qrt/cli/app.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>

#include "qrt/cli/experiments.hpp"
#include "qrt/cli/manifest.hpp"
#include "qrt/cli/status.hpp"
#include "qrt/data.hpp"
#include "qrt/error.hpp"
#include "qrt/tree.hpp"
#include "qrt/version.hpp"

namespace qrt::cli {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct TreeFlags {
  double quantile = 0.5;
  int max_depth = 3;
  std::size_t min_samples_leaf = 0;
  std::size_t min_samples_split = 0;
  std::size_t thresholds = 32;
  CLI::Option* leaf_opt = nullptr;
  CLI::Option* split_opt = nullptr;
};

void add_config(CLI::App& sub, std::string& path) {
  sub.add_option("--config", path, "key=value file mirroring the long flags; flags win");
}

void add_out_dir(CLI::App& sub, std::string& out_dir) {
  sub.add_option("--out-dir", out_dir, "Directory receiving every output file")
      ->capture_default_str();
}

void add_tree_flags(CLI::App& sub, TreeFlags& f) {
  sub.add_option("--quantile", f.quantile, "Quantile level r, 0<r<1")->capture_default_str();
  sub.add_option("--max-depth", f.max_depth, "Maximum tree depth")->capture_default_str();
  f.leaf_opt = sub.add_option("--min-samples-leaf", f.min_samples_leaf,
                              "Minimum rows per child (default d+2)");
  f.split_opt = sub.add_option("--min-samples-split", f.min_samples_split,
                               "Minimum rows for a node to split (default 2(d+2))");
  sub.add_option("--thresholds", f.thresholds, "Candidate thresholds per feature")
      ->capture_default_str();
}

FitConfig resolve_tree_flags(const TreeFlags& f, std::uint64_t seed) {
  return staged(kExitUsage, [&] {
    FitConfig cfg;
    cfg.quantile = QuantileLevel(f.quantile);
    cfg.max_depth = f.max_depth;
    if (f.leaf_opt->count() > 0) cfg.min_samples_leaf = f.min_samples_leaf;
    if (f.split_opt->count() > 0) cfg.min_samples_split = f.min_samples_split;
    cfg.max_thresholds_per_feature = f.thresholds;
    cfg.seed = seed;
    cfg.validate();
    return cfg;
  });
}

fs::path output_path(const std::string& out_dir, const std::string& name) {
  const fs::path p(name);
  return p.is_absolute() ? p : fs::path(out_dir) / p;
}

void check_fraction(double f) {
  if (!(f > 0.0 && f < 1.0)) {
    throw Failure(kExitUsage, "--test-fraction must satisfy 0<f<1, got " + shortest(f));
  }
}

struct TrainArgs {
  std::string out_dir = ".";
  std::uint64_t seed = 42;
  TreeFlags tree;
  std::string data;
  std::string target;
  std::size_t synthetic = 0;
  std::string out = "model.json";
  CLI::Option* data_opt = nullptr;
  CLI::Option* synthetic_opt = nullptr;
};

int cmd_train(const TrainArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  const auto start = Clock::now();
  const FitConfig cfg = resolve_tree_flags(a.tree, a.seed);
  const bool from_csv = a.data_opt->count() > 0;
  if (from_csv == (a.synthetic_opt->count() > 0)) {
    throw Failure(kExitUsage, "train: give exactly one of --data or --synthetic");
  }
  if (from_csv && a.target.empty()) throw Failure(kExitUsage, "train: --data needs --target");
  if (!from_csv && a.synthetic == 0) throw Failure(kExitUsage, "train: --synthetic must be >= 1");

  RunManifest manifest;
  manifest.set("command", join_command_line(argv));
  manifest.set("version", kVersion);
  const Dataset ds = staged(kExitData, [&] {
    if (from_csv) {
      auto loaded = load_csv(a.data, a.target, true);
      manifest.set("dataset.source", a.data);
      manifest.set("dataset.rows_read", std::to_string(loaded.rows_read));
      return std::move(loaded.dataset);
    }
    manifest.set("dataset.source", "synthetic");
    manifest.set("seed.data", std::to_string(a.seed));
    return generate_synthetic(a.synthetic, a.seed);
  });
  manifest.set_dataset("dataset", ds);
  manifest.set_config(cfg.resolved(ds.cols()));

  const auto tree = staged(kExitFit, [&] {
    return fit_tree(ds.features(), ds.target(), cfg, ds.feature_names());
  });
  const std::string json = export_tree(tree, ExportFormat::json);

  const fs::path model_path = output_path(a.out_dir, a.out);
  fs::path manifest_path = model_path;
  manifest_path.replace_extension(".manifest.txt");
  manifest.set_output(model_path.filename().string(), json);
  manifest.set_duration(seconds_since(start));
  staged(kExitData, [&] {
    write_atomic(model_path, json);
    write_atomic(manifest_path, manifest.render());
  });
  out << "wrote " << model_path.string() << " (" << tree.nodes().size() << " nodes, depth "
      << tree.depth() << ", train loss " << format_significant(tree.train_loss(), 6) << ")\n";
  return kExitOk;
}

QuantileRegressionTree load_model(const std::string& path) {
  return staged(kExitData, [&] { return import_tree(read_text_file(path)); });
}

struct PredictArgs {
  std::string out_dir = ".";
  std::string model;
  std::string input;
  std::string out = "predictions.csv";
};

std::string join_names(const std::vector<std::string>& names) {
  std::string s;
  for (const auto& n : names) s += (s.empty() ? "" : ",") + n;
  return s;
}

int cmd_predict(const PredictArgs& a, std::ostream& out) {
  const auto tree = load_model(a.model);
  const auto table = staged(kExitData, [&] { return load_feature_csv(a.input); });
  if (table.columns != tree.feature_names()) {
    throw Failure(kExitData, "input columns [" + join_names(table.columns) +
                                 "] do not match model features [" +
                                 join_names(tree.feature_names()) + "]");
  }
  const Vector pred = staged(kExitData, [&] { return predict_tree(tree, table.values); });

  std::string csv = table.header_line + ",prediction\n";
  char buf[32];
  for (std::size_t i = 0; i < table.lines.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", pred[static_cast<Eigen::Index>(i)]);
    csv += table.lines[i] + "," + buf + "\n";
  }
  const fs::path path = output_path(a.out_dir, a.out);
  staged(kExitData, [&] { write_atomic(path, csv); });
  out << "wrote " << path.string() << " (" << table.lines.size() << " rows)\n";
  return kExitOk;
}

struct ExportArgs {
  std::string out_dir = ".";
  std::string model;
  std::string format = "dot";
  std::string out;
};

int cmd_export(const ExportArgs& a, std::ostream& out) {
  const ExportFormat format =
      staged(kExitUsage, [&] { return parse_export_format(a.format); });
  const auto tree = load_model(a.model);
  const std::string rendered = export_tree(tree, format);
  if (a.out.empty()) {
    out << rendered;
    return kExitOk;
  }
  const fs::path path = output_path(a.out_dir, a.out);
  staged(kExitData, [&] { write_atomic(path, rendered); });
  return kExitOk;
}

void write_experiment(ExperimentResult& res, const std::string& out_dir,
                      const std::vector<std::string>& argv, Clock::time_point start,
                      std::ostream& out) {
  res.manifest.set("command", join_command_line(argv));
  res.manifest.set("version", kVersion);
  res.manifest.set_duration(seconds_since(start));
  staged(kExitData, [&] {
    for (const auto& f : res.files) write_atomic(output_path(out_dir, f.name), f.contents);
    write_atomic(output_path(out_dir, "manifest.txt"), res.manifest.render());
  });
  for (const auto& f : res.files) out << "wrote " << output_path(out_dir, f.name).string() << "\n";
  out << "wrote " << output_path(out_dir, "manifest.txt").string() << "\n";
}

struct ExperimentArgs {
  std::string out_dir = ".";
  std::uint64_t seed = 42;
  TreeFlags tree;
  double test_fraction = 0.3;
  std::size_t n = 1000;
  std::string data;
  std::string target = "medv";
};

int cmd_experiment_synthetic(const ExperimentArgs& a, const std::vector<std::string>& argv,
                             std::ostream& out) {
  const auto start = Clock::now();
  SyntheticExperiment spec;
  spec.fit = resolve_tree_flags(a.tree, a.seed);
  check_fraction(a.test_fraction);
  if (a.n < 2) throw Failure(kExitUsage, "--n must be at least 2");
  spec.n = a.n;
  spec.seed = a.seed;
  spec.test_fraction = a.test_fraction;
  auto res = run_synthetic_experiment(spec);
  write_experiment(res, a.out_dir, argv, start, out);
  return kExitOk;
}

int cmd_experiment_boston(const ExperimentArgs& a, const std::vector<std::string>& argv,
                          std::ostream& out) {
  const auto start = Clock::now();
  BostonExperiment spec;
  spec.fit = resolve_tree_flags(a.tree, a.seed);
  check_fraction(a.test_fraction);
  spec.data_path = a.data;
  spec.target = a.target;
  spec.seed = a.seed;
  spec.test_fraction = a.test_fraction;
  auto res = run_boston_experiment(spec);
  out << "rows: " << res.rows_read << " read, " << res.rows_kept << " kept\n";
  write_experiment(res, a.out_dir, argv, start, out);
  return kExitOk;
}

struct CommandLine {
  CLI::App app{"Quantile regression trees: fit, predict, export and reproduce experiments.",
               "qrt"};
  std::string config_path;
  TrainArgs train;
  PredictArgs predict;
  ExportArgs exp;
  ExperimentArgs synth;
  ExperimentArgs boston;
  CLI::App* train_cmd = nullptr;
  CLI::App* predict_cmd = nullptr;
  CLI::App* export_cmd = nullptr;
  CLI::App* synth_cmd = nullptr;
  CLI::App* boston_cmd = nullptr;

  CommandLine() {
    app.require_subcommand(1, 1);
    app.set_version_flag("--version", std::string(kVersion));
    // Repeated options keep the last value so flags override config entries.
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

    train_cmd = app.add_subcommand("train", "Fit a quantile regression tree");
    add_out_dir(*train_cmd, train.out_dir);
    train_cmd->add_option("--seed", train.seed, "Seed for synthetic data")->capture_default_str();
    add_tree_flags(*train_cmd, train.tree);
    train.data_opt = train_cmd->add_option("--data", train.data, "Training CSV");
    train_cmd->add_option("--target", train.target, "Target column of --data");
    train.synthetic_opt =
        train_cmd->add_option("--synthetic", train.synthetic, "Generate n synthetic rows");
    train_cmd->add_option("--out", train.out, "Model JSON file")->capture_default_str();
    add_config(*train_cmd, config_path);

    predict_cmd = app.add_subcommand("predict", "Append tree predictions to a CSV");
    add_out_dir(*predict_cmd, predict.out_dir);
    predict_cmd->add_option("--model", predict.model, "Model JSON file")->required();
    predict_cmd->add_option("--input", predict.input, "CSV holding exactly the model features")
        ->required();
    predict_cmd->add_option("--out", predict.out, "Output CSV")->capture_default_str();
    add_config(*predict_cmd, config_path);

    export_cmd = app.add_subcommand("export", "Render a model as dot, text or json");
    add_out_dir(*export_cmd, exp.out_dir);
    export_cmd->add_option("--model", exp.model, "Model JSON file")->required();
    export_cmd->add_option("--format", exp.format, "dot, text or json")->capture_default_str();
    export_cmd->add_option("--out", exp.out, "Output file (default: standard output)");
    add_config(*export_cmd, config_path);

    synth_cmd = app.add_subcommand("experiment-synthetic",
                                   "Model comparison and sweep on (3X+e)^2 data");
    add_out_dir(*synth_cmd, synth.out_dir);
    synth_cmd->add_option("--seed", synth.seed, "Seed for data and split")->capture_default_str();
    add_tree_flags(*synth_cmd, synth.tree);
    synth_cmd->add_option("--n", synth.n, "Rows generated")->capture_default_str();
    synth_cmd->add_option("--test-fraction", synth.test_fraction, "Held-out fraction")
        ->capture_default_str();
    add_config(*synth_cmd, config_path);

    boston.tree.max_depth = 2;
    boston_cmd = app.add_subcommand("experiment-boston",
                                    "Model comparison and sweep on Boston housing");
    add_out_dir(*boston_cmd, boston.out_dir);
    boston_cmd->add_option("--seed", boston.seed, "Seed for the split")->capture_default_str();
    add_tree_flags(*boston_cmd, boston.tree);
    boston_cmd->add_option("--data", boston.data, "Boston housing CSV")->required();
    boston_cmd->add_option("--target", boston.target, "Target column")->capture_default_str();
    boston_cmd->add_option("--test-fraction", boston.test_fraction, "Held-out fraction")
        ->capture_default_str();
    add_config(*boston_cmd, config_path);
  }

  CLI::App* active() const {
    for (auto* sub : {train_cmd, predict_cmd, export_cmd, synth_cmd, boston_cmd}) {
      if (sub->parsed()) return sub;
    }
    return nullptr;
  }

  void parse(std::vector<std::string> args) {
    if (args.empty()) args.emplace_back("qrt");
    std::vector<char*> argv;
    for (auto& s : args) argv.push_back(s.data());
    app.parse(static_cast<int>(argv.size()), argv.data());
  }
};

// Config entries become `--key value` pairs placed right after the verb.
std::vector<std::string> with_config(const std::vector<std::string>& args, const std::string& verb,
                                     const std::string& path) {
  if (!std::filesystem::exists(path)) throw Failure(kExitUsage, "cannot open config '" + path + "'");
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigINI().from_file(path);
  } catch (const CLI::Error& e) {
    throw Failure(kExitUsage, "config '" + path + "': " + e.what());
  }
  std::vector<std::string> pairs;
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;  // section markers
    if (!item.parents.empty() && !(item.parents.size() == 1 && item.parents[0] == verb)) {
      continue;
    }
    std::string key = item.name;
    std::replace(key.begin(), key.end(), '_', '-');
    if (key == "config") continue;
    pairs.push_back("--" + key);
    pairs.push_back(item.inputs.empty() ? std::string() : item.inputs.back());
  }
  std::vector<std::string> out;
  bool inserted = false;
  for (const auto& a : args) {
    out.push_back(a);
    if (!inserted && a == verb && out.size() > 1) {
      out.insert(out.end(), pairs.begin(), pairs.end());
      inserted = true;
    }
  }
  return out;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  auto cli = std::make_unique<CommandLine>();
  try {
    try {
      cli->parse(args);
      if (!cli->config_path.empty()) {
        const std::string verb = cli->active()->get_name();
        const auto expanded = with_config(args, verb, cli->config_path);
        cli = std::make_unique<CommandLine>();
        cli->parse(expanded);
      }
    } catch (const CLI::ParseError& e) {
      const int rc = cli->app.exit(e, out, err);
      return rc == 0 ? kExitOk : kExitUsage;
    }

    const std::string verb = cli->active()->get_name();
    if (verb == "train") return cmd_train(cli->train, args, out);
    if (verb == "predict") return cmd_predict(cli->predict, out);
    if (verb == "export") return cmd_export(cli->exp, out);
    if (verb == "experiment-synthetic") return cmd_experiment_synthetic(cli->synth, args, out);
    return cmd_experiment_boston(cli->boston, args, out);
  } catch (const Failure& e) {
    err << "qrt: error: " << e.what() << "\n";
    return e.code();
  } catch (const std::exception& e) {
    err << "qrt: error: " << e.what() << "\n";
    return kExitFit;
  }
}

}  // namespace qrt::cli
