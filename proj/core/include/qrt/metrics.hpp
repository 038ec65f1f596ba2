#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "qrt/data.hpp"
#include "qrt/solver.hpp"
#include "qrt/tree.hpp"
#include "qrt/types.hpp"

namespace qrt {

double mae(const Vector& y_true, const Vector& y_pred);
double mse(const Vector& y_true, const Vector& y_pred);

struct EvalReport {
  std::string model_name;
  std::optional<QuantileLevel> quantile;
  double mae = 0.0;
  double mse = 0.0;
  std::optional<double> pinball;
  std::size_t n_test = 0;
};

/// MAE and MSE of the predictions; pinball too when a quantile is given.
EvalReport evaluate(std::string model_name, const Vector& y_true, const Vector& y_pred,
                    std::optional<QuantileLevel> quantile);

struct ModelSeries {
  std::string model_name;
  std::vector<EvalReport> reports;  // aligned with QuantileSweep::quantiles
};

struct QuantileSweep {
  std::vector<QuantileLevel> quantiles;
  std::vector<ModelSeries> models;

  /// Reports of every model, grouped by quantile then model order.
  std::vector<EvalReport> flatten() const;
};

inline constexpr const char* kQuantileTreeName = "quantile_tree";
inline constexpr const char* kQuantileRegressionName = "quantile_regression";
inline constexpr const char* kLinearRegressionName = "linear_regression";
inline constexpr const char* kDecisionTreeName = "decision_tree";

/// 0.05, 0.10, ..., 0.95 (k / 20).
std::vector<QuantileLevel> default_quantile_grid();

/// Called once per quantile with the models fitted on the training set.
using SweepObserver =
    std::function<void(QuantileLevel, const QuantileRegressionTree&, const LinearQuantileModel&)>;

/// For each quantile, fits the quantile tree (cfg with its quantile replaced)
/// and a global quantile regression on `train`, then evaluates both on
/// `test`. Errors are re-raised with the offending quantile in the message.
QuantileSweep quantile_sweep(const Dataset& train, const Dataset& test,
                             const std::vector<QuantileLevel>& quantiles, const FitConfig& cfg,
                             const SweepObserver& observer = {});

/// CSV with header model,quantile,mae,mse,pinball,n_test and 10 significant
/// digits. Missing optional values are empty cells.
std::string reports_to_csv(const std::vector<EvalReport>& reports);

}  // namespace qrt
