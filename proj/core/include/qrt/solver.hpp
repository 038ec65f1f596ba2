#pragma once

#include <cstddef>

#include "qrt/types.hpp"

namespace qrt {

/// Quantile level r of a conditional quantile estimate, strictly inside (0, 1).
class QuantileLevel {
 public:
  /// Throws InvalidInput unless 0 < r < 1.
  explicit QuantileLevel(double r);

  double value() const noexcept { return r_; }

  friend bool operator==(QuantileLevel, QuantileLevel) = default;

 private:
  double r_;
};

struct SolverConfig {
  /// Stop the smoothed iterations once the loss decreases by less than this.
  double tolerance = 1e-8;
  int max_iterations = 200;
  /// Initial smoothing half-width, in units of the standardized target.
  double smoothing_start = 1.0;

  /// Throws InvalidInput when a field is out of range.
  void validate() const;
};

/// Linear predictor intercept + coefficients . x, fitted at a quantile level.
///
/// `train_loss` is the mean pinball loss on the fitting data for quantile
/// fits and the mean squared error for least-squares fits.
struct LinearQuantileModel {
  double intercept = 0.0;
  Vector coefficients;
  QuantileLevel quantile{0.5};
  double train_loss = 0.0;

  std::ptrdiff_t dimension() const noexcept { return coefficients.size(); }
};

/// Check (pinball) loss: r * u for u >= 0, (1 - r) * |u| otherwise.
double pinball_loss(double residual, QuantileLevel r);

/// Mean pinball loss of y_true - y_pred.
double mean_pinball_loss(const Vector& y_true, const Vector& y_pred,
                         QuantileLevel r);

/// Linear quantile regression by smoothed-pinball IRLS followed by an exact
/// vertex-descent polish. Constant or collinear feature directions receive
/// zero coefficients.
LinearQuantileModel fit_quantile_regression(const Matrix& X, const Vector& y,
                                            QuantileLevel r,
                                            const SolverConfig& cfg = {});

/// Ordinary least squares. The quantile field is 0.5 and train_loss holds the
/// training MSE. Singular systems fall back to a small ridge jitter.
LinearQuantileModel fit_ols(const Matrix& X, const Vector& y);

Vector predict_linear(const LinearQuantileModel& model, const Matrix& X);

/// intercept + sum_k coefficients[k] * x[k], summed left to right. Every
/// prediction path goes through this so equal models give equal bits.
template <class Row>
double predict_row(const LinearQuantileModel& model, const Row& x) {
  double acc = model.intercept;
  for (Eigen::Index k = 0; k < model.coefficients.size(); ++k) {
    acc += model.coefficients[k] * x[k];
  }
  return acc;
}

}  // namespace qrt
