#include "qrt/cli/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "qrt/baselines.hpp"
#include "qrt/cli/status.hpp"
#include "qrt/data.hpp"
#include "qrt/error.hpp"

namespace qrt::cli {

const OutputFile* ExperimentResult::find(const std::string& name) const {
  for (const auto& f : files) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

namespace {

constexpr int kDigits = 10;

std::string num(double v) { return format_significant(v, kDigits); }

// Index into kShowcaseQuantiles, if r is one of them.
std::optional<std::size_t> showcase_index(QuantileLevel r) {
  for (std::size_t k = 0; k < kShowcaseQuantiles.size(); ++k) {
    if (std::abs(r.value() - kShowcaseQuantiles[k]) < 1e-12) return k;
  }
  return std::nullopt;
}

std::string showcase_label(std::size_t k) { return shortest(kShowcaseQuantiles[k]); }

void record_common(RunManifest& m, const FitConfig& cfg, const Dataset& full,
                   std::uint64_t seed, double test_fraction, const Dataset& train,
                   const Dataset& test) {
  m.set_dataset("dataset", full);
  m.set("split.seed", std::to_string(seed));
  m.set("split.test_fraction", shortest(test_fraction));
  m.set("split.train_rows", std::to_string(train.rows()));
  m.set("split.test_rows", std::to_string(test.rows()));
  m.set_config(cfg.resolved(full.cols()));
}

void finish(ExperimentResult& res) {
  for (const auto& f : res.files) res.manifest.set_output(f.name, f.contents);
}

}  // namespace

std::vector<EvalReport> compare_models(const Dataset& train, const Dataset& test,
                                       const FitConfig& cfg) {
  const Matrix& x = train.features();
  const Vector& y = train.target();
  const Matrix& xt = test.features();
  const Vector& yt = test.target();
  const QuantileLevel r = cfg.quantile;

  std::vector<EvalReport> out;
  const auto tree = fit_tree(x, y, cfg, train.feature_names());
  out.push_back(evaluate(kQuantileTreeName, yt, predict_tree(tree, xt), r));
  const auto global = fit_global_quantile(x, y, r, cfg.solver);
  out.push_back(evaluate(kQuantileRegressionName, yt, predict_linear(global, xt), r));
  const auto ols = fit_ols(x, y);
  out.push_back(evaluate(kLinearRegressionName, yt, predict_linear(ols, xt), std::nullopt));
  const auto mean_tree = fit_mean_tree(x, y, cfg, train.feature_names());
  out.push_back(evaluate(kDecisionTreeName, yt, predict_mean_tree(mean_tree, xt), std::nullopt));
  return out;
}

std::string parity_csv(const QuantileSweep& sweep) {
  const ModelSeries* tree = nullptr;
  const ModelSeries* global = nullptr;
  for (const auto& s : sweep.models) {
    if (s.model_name == kQuantileTreeName) tree = &s;
    if (s.model_name == kQuantileRegressionName) global = &s;
  }
  if (!tree || !global) throw InvalidInput("parity_csv: sweep lacks the two quantile models");
  std::string out = "quantile,mae_quantile_tree,mae_quantile_regression,relative_difference\n";
  for (std::size_t k = 0; k < sweep.quantiles.size(); ++k) {
    const double a = tree->reports[k].mae;
    const double b = global->reports[k].mae;
    out += shortest(sweep.quantiles[k].value()) + "," + num(a) + "," + num(b) + "," +
           num(std::abs(a - b) / b) + "\n";
  }
  return out;
}

ExperimentResult run_synthetic_experiment(const SyntheticExperiment& spec) {
  ExperimentResult res;
  const Dataset ds = staged(kExitData, [&] { return generate_synthetic(spec.n, spec.seed); });
  const auto [train, test] = staged(kExitData, [&] {
    return train_test_split(ds, SplitSpec{spec.test_fraction, spec.seed});
  });
  res.rows_read = res.rows_kept = ds.rows();

  res.manifest.set("experiment", "synthetic");
  res.manifest.set("dataset.source", "synthetic");
  res.manifest.set("seed.data", std::to_string(spec.seed));
  record_common(res.manifest, spec.fit, ds, spec.seed, spec.test_fraction, train, test);

  // Test rows ordered by x for plotting; ties keep split order.
  std::vector<std::size_t> order(test.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return test.features()(static_cast<Eigen::Index>(a), 0) <
           test.features()(static_cast<Eigen::Index>(b), 0);
  });
  std::vector<std::string> prediction_blocks(kShowcaseQuantiles.size());

  staged(kExitFit, [&] {
    res.comparison = compare_models(train, test, spec.fit);
    res.sweep = quantile_sweep(
        train, test, default_quantile_grid(), spec.fit,
        [&](QuantileLevel r, const QuantileRegressionTree& tree,
            const LinearQuantileModel& global) {
          const auto k = showcase_index(r);
          if (!k) return;
          const Vector pt = predict_tree(tree, test.features());
          const Vector pg = predict_linear(global, test.features());
          std::string& block = prediction_blocks[*k];
          for (std::size_t i : order) {
            const auto row = static_cast<Eigen::Index>(i);
            block += showcase_label(*k) + "," + shortest(test.features()(row, 0)) + "," +
                     shortest(test.target()[row]) + "," + shortest(pt[row]) + "," +
                     shortest(pg[row]) + "\n";
          }
        });
  });

  std::string table = "model,mae,mse\n";
  for (const auto& rep : res.comparison) {
    table += rep.model_name + "," + num(rep.mae) + "," + num(rep.mse) + "\n";
  }
  std::string predictions = "quantile," + ds.feature_names()[0] + "," + ds.target_name() + "," +
                            kQuantileTreeName + "," + kQuantileRegressionName + "\n";
  for (const auto& block : prediction_blocks) predictions += block;

  res.files.push_back({"table1.csv", std::move(table)});
  res.files.push_back({"sweep.csv", reports_to_csv(res.sweep.flatten())});
  res.files.push_back({"sweep_parity.csv", parity_csv(res.sweep)});
  res.files.push_back({"predictions.csv", std::move(predictions)});
  finish(res);
  return res;
}

ExperimentResult run_boston_experiment(const BostonExperiment& spec) {
  ExperimentResult res;
  const LoadResult loaded =
      staged(kExitData, [&] { return load_csv(spec.data_path, spec.target, true); });
  res.rows_read = loaded.rows_read;
  res.rows_kept = loaded.rows_kept;
  // The reference file has 506 rows of which 5 carry missing values.
  if (loaded.rows_read == 506 && loaded.rows_kept != 501) {
    throw Failure(kExitData, "expected 501 complete rows out of 506, found " +
                                 std::to_string(loaded.rows_kept));
  }
  const Dataset& ds = loaded.dataset;
  const auto [train, test] = staged(kExitData, [&] {
    return train_test_split(ds, SplitSpec{spec.test_fraction, spec.seed});
  });

  res.manifest.set("experiment", "boston");
  res.manifest.set("dataset.source", spec.data_path);
  res.manifest.set("dataset.rows_read", std::to_string(loaded.rows_read));
  record_common(res.manifest, spec.fit, ds, spec.seed, spec.test_fraction, train, test);

  std::vector<std::string> dots(kShowcaseQuantiles.size());
  staged(kExitFit, [&] {
    res.comparison = compare_models(train, test, spec.fit);
    res.sweep = quantile_sweep(train, test, default_quantile_grid(), spec.fit,
                               [&](QuantileLevel r, const QuantileRegressionTree& tree,
                                   const LinearQuantileModel&) {
                                 if (const auto k = showcase_index(r)) {
                                   dots[*k] = export_tree(tree, ExportFormat::dot);
                                 }
                               });
  });
  res.files.push_back({"sweep.csv", reports_to_csv(res.sweep.flatten())});
  res.files.push_back({"sweep_parity.csv", parity_csv(res.sweep)});
  res.files.push_back({"model_comparison.csv", reports_to_csv(res.comparison)});
  for (std::size_t k = 0; k < dots.size(); ++k) {
    res.files.push_back({"tree_q" + showcase_label(k) + ".dot", std::move(dots[k])});
  }
  finish(res);
  return res;
}

}  // namespace qrt::cli
