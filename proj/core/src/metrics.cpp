#include "qrt/metrics.hpp"

#include <cmath>
#include <sstream>

#include "qrt/baselines.hpp"
#include "qrt/error.hpp"

namespace qrt {

namespace {

void check_pair(const Vector& a, const Vector& b, const char* who) {
  if (a.size() != b.size()) throw InvalidInput(std::string(who) + ": length mismatch");
  if (a.size() == 0) throw InvalidInput(std::string(who) + ": empty input");
  if (!a.allFinite() || !b.allFinite()) throw InvalidInput(std::string(who) + ": non-finite input");
}

[[noreturn]] void rethrow_annotated(const std::string& prefix) {
  try {
    throw;
  } catch (const ParseError& e) {
    throw ParseError(prefix + e.what(), e.line(), e.column());
  } catch (const InvalidInput& e) {
    throw InvalidInput(prefix + e.what());
  } catch (const EmptyData& e) {
    throw EmptyData(prefix + e.what());
  } catch (const SchemaError& e) {
    throw SchemaError(prefix + e.what());
  } catch (const Error& e) {
    throw Error(prefix + e.what());
  }
}

}  // namespace

double mae(const Vector& y_true, const Vector& y_pred) {
  check_pair(y_true, y_pred, "mae");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < y_true.size(); ++i) sum += std::abs(y_true[i] - y_pred[i]);
  return sum / static_cast<double>(y_true.size());
}

double mse(const Vector& y_true, const Vector& y_pred) {
  check_pair(y_true, y_pred, "mse");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < y_true.size(); ++i) {
    const double e = y_true[i] - y_pred[i];
    sum += e * e;
  }
  return sum / static_cast<double>(y_true.size());
}

EvalReport evaluate(std::string model_name, const Vector& y_true, const Vector& y_pred,
                    std::optional<QuantileLevel> quantile) {
  EvalReport report;
  report.model_name = std::move(model_name);
  report.quantile = quantile;
  report.mae = mae(y_true, y_pred);
  report.mse = mse(y_true, y_pred);
  if (quantile) report.pinball = mean_pinball_loss(y_true, y_pred, *quantile);
  report.n_test = static_cast<std::size_t>(y_true.size());
  return report;
}

std::vector<EvalReport> QuantileSweep::flatten() const {
  std::vector<EvalReport> out;
  for (std::size_t q = 0; q < quantiles.size(); ++q) {
    for (const auto& series : models) out.push_back(series.reports.at(q));
  }
  return out;
}

std::vector<QuantileLevel> default_quantile_grid() {
  std::vector<QuantileLevel> grid;
  for (int k = 1; k <= 19; ++k) grid.emplace_back(static_cast<double>(k) / 20.0);
  return grid;
}

QuantileSweep quantile_sweep(const Dataset& train, const Dataset& test,
                             const std::vector<QuantileLevel>& quantiles, const FitConfig& cfg,
                             const SweepObserver& observer) {
  if (quantiles.empty()) throw InvalidInput("quantile_sweep: no quantiles given");
  for (std::size_t i = 1; i < quantiles.size(); ++i) {
    if (!(quantiles[i - 1].value() < quantiles[i].value())) {
      throw InvalidInput("quantile_sweep: quantiles must be strictly increasing");
    }
  }
  if (train.cols() != test.cols()) {
    throw InvalidInput("quantile_sweep: train and test feature counts differ");
  }

  QuantileSweep sweep;
  sweep.quantiles = quantiles;
  sweep.models = {{kQuantileTreeName, {}}, {kQuantileRegressionName, {}}};
  for (const QuantileLevel r : quantiles) {
    try {
      FitConfig tree_cfg = cfg;
      tree_cfg.quantile = r;
      const auto tree =
          fit_tree(train.features(), train.target(), tree_cfg, train.feature_names());
      const auto global =
          fit_global_quantile(train.features(), train.target(), r, cfg.solver);
      sweep.models[0].reports.push_back(evaluate(
          kQuantileTreeName, test.target(), predict_tree(tree, test.features()), r));
      sweep.models[1].reports.push_back(evaluate(
          kQuantileRegressionName, test.target(), predict_linear(global, test.features()), r));
      if (observer) observer(r, tree, global);
    } catch (const Error&) {
      rethrow_annotated("quantile " + format_significant(r.value(), 10) + ": ");
    }
  }
  return sweep;
}

std::string reports_to_csv(const std::vector<EvalReport>& reports) {
  std::ostringstream out;
  out << "model,quantile,mae,mse,pinball,n_test\n";
  for (const auto& r : reports) {
    out << r.model_name << ',';
    if (r.quantile) out << format_significant(r.quantile->value(), 10);
    out << ',' << format_significant(r.mae, 10) << ',' << format_significant(r.mse, 10) << ',';
    if (r.pinball) out << format_significant(*r.pinball, 10);
    out << ',' << r.n_test << '\n';
  }
  return out.str();
}

}  // namespace qrt
