#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "qrt/cli/manifest.hpp"
#include "qrt/metrics.hpp"
#include "qrt/tree.hpp"

namespace qrt::cli {

struct OutputFile {
  std::string name;
  std::string contents;
};

/// Everything an experiment produces, before anything touches the disk.
struct ExperimentResult {
  std::vector<OutputFile> files;
  /// Test-set reports for the four models at the configured quantile, in
  /// the order quantile tree, global quantile regression, OLS, mean tree.
  std::vector<EvalReport> comparison;
  QuantileSweep sweep;
  RunManifest manifest;
  std::size_t rows_read = 0;
  std::size_t rows_kept = 0;

  const OutputFile* find(const std::string& name) const;
};

struct SyntheticExperiment {
  std::size_t n = 1000;
  double test_fraction = 0.3;
  std::uint64_t seed = 42;
  FitConfig fit = [] {
    FitConfig c;
    c.max_depth = 3;
    return c;
  }();
};

struct BostonExperiment {
  std::string data_path;
  std::string target = "medv";
  double test_fraction = 0.3;
  std::uint64_t seed = 42;
  FitConfig fit = [] {
    FitConfig c;
    c.max_depth = 2;
    return c;
  }();
};

/// Quantile levels whose fitted trees and predictions are exported.
inline const std::vector<double> kShowcaseQuantiles{0.05, 0.5, 0.95};

/// Emits table1.csv, sweep.csv, sweep_parity.csv and predictions.csv.
/// Throws Failure classified by exit code.
ExperimentResult run_synthetic_experiment(const SyntheticExperiment& spec);

/// Emits sweep.csv, sweep_parity.csv, model_comparison.csv and one
/// tree_q<r>.dot per showcase quantile.
ExperimentResult run_boston_experiment(const BostonExperiment& spec);

/// Fits the four models on `train` and evaluates them on `test`.
std::vector<EvalReport> compare_models(const Dataset& train, const Dataset& test,
                                       const FitConfig& cfg);

/// One row per quantile: both sweep MAEs and |tree - global| / global.
std::string parity_csv(const QuantileSweep& sweep);

}  // namespace qrt::cli
