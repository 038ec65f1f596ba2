#include "qrt/solver.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "qrt/error.hpp"

namespace qrt {

QuantileLevel::QuantileLevel(double r) : r_(r) {
  if (!(r > 0.0 && r < 1.0)) {
    throw InvalidInput("quantile must satisfy 0<r<1, got " + std::to_string(r));
  }
}

void SolverConfig::validate() const {
  if (!(tolerance > 0.0) || !std::isfinite(tolerance)) {
    throw InvalidInput("solver tolerance must be > 0");
  }
  if (max_iterations < 1) {
    throw InvalidInput("solver max_iterations must be >= 1");
  }
  if (!(smoothing_start > 0.0) || !std::isfinite(smoothing_start)) {
    throw InvalidInput("solver smoothing_start must be > 0");
  }
}

double pinball_loss(double residual, QuantileLevel r) {
  if (!std::isfinite(residual)) {
    throw InvalidInput("pinball_loss: residual is not finite");
  }
  return residual >= 0.0 ? r.value() * residual
                         : (1.0 - r.value()) * -residual;
}

double mean_pinball_loss(const Vector& y_true, const Vector& y_pred,
                         QuantileLevel r) {
  if (y_true.size() != y_pred.size()) {
    throw InvalidInput("mean_pinball_loss: length mismatch");
  }
  if (y_true.size() == 0) {
    throw InvalidInput("mean_pinball_loss: empty input");
  }
  double sum = 0.0;
  for (Eigen::Index i = 0; i < y_true.size(); ++i) {
    sum += pinball_loss(y_true[i] - y_pred[i], r);
  }
  return sum / static_cast<double>(y_true.size());
}

namespace {

constexpr double kPivotThreshold = 1e-10;
// Residuals below this (standardized units) count as interpolated points.
constexpr double kZeroResidual = 1e-12;
constexpr double kSmoothingShrink = 0.5;

void check_inputs(const Matrix& X, const Vector& y, const char* who) {
  if (y.size() == 0 || X.rows() == 0) {
    throw EmptyData(std::string(who) + ": no observations");
  }
  if (X.rows() != y.size()) {
    throw InvalidInput(std::string(who) + ": X has " +
                       std::to_string(X.rows()) + " rows but y has " +
                       std::to_string(y.size()) + " entries");
  }
  if (!X.allFinite() || !y.allFinite()) {
    throw InvalidInput(std::string(who) + ": non-finite input");
  }
}

// Design matrix [1, standardized active features] plus the affine maps
// needed to return coefficients in the caller's units.
struct Design {
  Matrix z;
  Vector y;
  std::vector<Eigen::Index> active;
  Vector x_mean;
  Vector x_scale;
  double y_center = 0.0;
  double y_scale = 1.0;

  Eigen::Index params() const { return z.cols(); }
};

Design standardize(const Matrix& X, const Vector& y) {
  const Eigen::Index n = X.rows();
  const double nd = static_cast<double>(n);

  Design out;
  out.y_center = y.mean();
  const double y_sd = std::sqrt((y.array() - out.y_center).square().sum() / nd);
  out.y_scale = y_sd > 0.0 ? y_sd : 1.0;
  out.y = (y.array() - out.y_center) / out.y_scale;

  // Greedy column selection by Gram-Schmidt against the accepted columns.
  // A column whose residual norm falls below the pivot threshold is a
  // degenerate direction and keeps a zero coefficient.
  std::vector<Vector> basis;
  basis.push_back(Vector::Constant(n, 1.0 / std::sqrt(nd)));
  std::vector<Vector> columns;
  std::vector<double> means;
  std::vector<double> scales;
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    if (static_cast<Eigen::Index>(basis.size()) >= n) break;
    const double mean = X.col(j).mean();
    const double sd =
        std::sqrt((X.col(j).array() - mean).square().sum() / nd);
    if (!(sd > 0.0)) continue;
    Vector col = (X.col(j).array() - mean) / sd;
    Vector v = col;
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& q : basis) v -= q.dot(v) * q;
    }
    const double norm = v.norm();
    if (norm <= kPivotThreshold * col.norm()) continue;
    basis.push_back(v / norm);
    out.active.push_back(j);
    columns.push_back(std::move(col));
    means.push_back(mean);
    scales.push_back(sd);
  }

  const auto p = static_cast<Eigen::Index>(columns.size()) + 1;
  out.z.resize(n, p);
  out.z.col(0).setOnes();
  out.x_mean.resize(p - 1);
  out.x_scale.resize(p - 1);
  for (Eigen::Index k = 1; k < p; ++k) {
    out.z.col(k) = columns[static_cast<std::size_t>(k - 1)];
    out.x_mean[k - 1] = means[static_cast<std::size_t>(k - 1)];
    out.x_scale[k - 1] = scales[static_cast<std::size_t>(k - 1)];
  }
  return out;
}

double design_loss(const Design& d, const Vector& beta, double r) {
  const Vector u = d.y - d.z * beta;
  double sum = 0.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    sum += u[i] >= 0.0 ? r * u[i] : (r - 1.0) * u[i];
  }
  return sum / static_cast<double>(u.size());
}

// Smoothed check loss: quadratic inside |u| < eps, linear outside. Each pass
// solves the weighted normal equations with weights psi(u)/u.
Vector smoothed_irls(const Design& d, double r, const SolverConfig& cfg) {
  const Eigen::Index p = d.params();
  const Matrix gram = d.z.transpose() * d.z;
  Eigen::LDLT<Matrix> ols(gram);
  Vector beta = ols.solve(d.z.transpose() * d.y);
  if (ols.info() != Eigen::Success || !beta.allFinite()) {
    beta = Vector::Zero(p);
  }

  Vector best = beta;
  double best_loss = design_loss(d, beta, r);
  double previous = best_loss;
  double eps = cfg.smoothing_start;
  const double eps_converged = std::sqrt(cfg.tolerance);

  Vector w(d.y.size());
  Matrix weighted(d.z.rows(), p);
  Matrix h(p, p);
  for (int it = 0; it < cfg.max_iterations; ++it) {
    const Vector u = d.y - d.z * beta;
    for (Eigen::Index i = 0; i < u.size(); ++i) {
      const double slope = u[i] > 0.0 ? r : 1.0 - r;
      w[i] = slope / std::max(std::abs(u[i]), eps);
    }
    weighted = w.cwiseSqrt().asDiagonal() * d.z;
    h.setZero();
    h.selfadjointView<Eigen::Lower>().rankUpdate(weighted.transpose());
    Eigen::LDLT<Matrix> solve(h.selfadjointView<Eigen::Lower>());
    Vector next = solve.solve(d.z.transpose() * (w.asDiagonal() * d.y));
    if (solve.info() != Eigen::Success || !next.allFinite()) break;
    beta = std::move(next);

    const double loss = design_loss(d, beta, r);
    if (loss < best_loss) {
      best_loss = loss;
      best = beta;
    }
    if (eps <= eps_converged && previous - loss < cfg.tolerance) break;
    previous = loss;
    eps = std::max(eps * kSmoothingShrink, 1e-14);
  }
  return best;
}

// Chooses p rows with the smallest |residual| that form a nonsingular square
// system. Returns fewer than p rows if no such set is found.
std::vector<Eigen::Index> initial_basis(const Design& d, const Vector& beta) {
  const Eigen::Index n = d.z.rows();
  const Eigen::Index p = d.params();
  const Vector u = d.y - d.z * beta;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return std::abs(u[a]) < std::abs(u[b]);
  });

  std::vector<Eigen::Index> rows;
  std::vector<Vector> q;
  for (Eigen::Index i : order) {
    if (static_cast<Eigen::Index>(rows.size()) == p) break;
    const Vector row = d.z.row(i).transpose();
    Vector v = row;
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& b : q) v -= b.dot(v) * b;
    }
    const double norm = v.norm();
    if (norm <= 1e-8 * row.norm()) continue;
    q.push_back(v / norm);
    rows.push_back(i);
  }
  return rows;
}

struct Vertex {
  Vector beta;
  std::vector<Eigen::Index> rows;
};

// Exact descent over vertices of the check-loss polyhedron. At a vertex the
// basis rows are interpolated; moving one basis residual off zero while the
// others stay pinned gives 2p edge directions. The best strictly descending
// edge is followed to its line minimum (a weighted median of breakpoints),
// where a new row enters the basis. With a nondegenerate vertex the loss is
// separable in the edge coordinates, so no descending edge means optimal.
bool vertex_descent(const Design& d, double r, Vertex& v) {
  const Eigen::Index n = d.z.rows();
  const Eigen::Index p = d.params();
  const double nd = static_cast<double>(n);

  auto solve_basis = [&](const std::vector<Eigen::Index>& rows, Matrix& inv) {
    Matrix zb(p, p);
    Vector yb(p);
    for (Eigen::Index k = 0; k < p; ++k) {
      zb.row(k) = d.z.row(rows[static_cast<std::size_t>(k)]);
      yb[k] = d.y[rows[static_cast<std::size_t>(k)]];
    }
    Eigen::FullPivLU<Matrix> lu(zb);
    if (!lu.isInvertible()) return false;
    inv = lu.inverse();
    v.beta = inv * yb;
    return v.beta.allFinite();
  };

  Matrix inv;
  if (!solve_basis(v.rows, inv)) return false;
  double loss = design_loss(d, v.beta, r);

  std::vector<char> in_basis(static_cast<std::size_t>(n), 0);
  std::vector<std::pair<double, Eigen::Index>> breaks;
  const int max_steps = static_cast<int>(10 * n + 50);
  for (int step = 0; step < max_steps; ++step) {
    std::fill(in_basis.begin(), in_basis.end(), 0);
    for (Eigen::Index b : v.rows) in_basis[static_cast<std::size_t>(b)] = 1;

    Vector u = d.y - d.z * v.beta;
    const Matrix a = d.z * inv;

    // Directional derivative of n * loss along +/- each edge.
    double best_slope = -1e-12 * nd;
    Eigen::Index best_k = -1;
    double best_sign = 0.0;
    for (Eigen::Index k = 0; k < p; ++k) {
      for (const double sign : {1.0, -1.0}) {
        // Basis residual k moves to -sign * t.
        double slope = sign > 0.0 ? 1.0 - r : r;
        for (Eigen::Index i = 0; i < n; ++i) {
          if (in_basis[static_cast<std::size_t>(i)]) continue;
          const double ai = sign * a(i, k);
          if (u[i] > kZeroResidual) {
            slope -= r * ai;
          } else if (u[i] < -kZeroResidual) {
            slope += (1.0 - r) * ai;
          } else {
            slope += std::max(-r * ai, (1.0 - r) * ai);
          }
        }
        if (slope < best_slope) {
          best_slope = slope;
          best_k = k;
          best_sign = sign;
        }
      }
    }
    if (best_k < 0) return true;

    // Line minimum: the slope grows by |a_i| as each residual changes sign.
    breaks.clear();
    for (Eigen::Index i = 0; i < n; ++i) {
      if (in_basis[static_cast<std::size_t>(i)]) continue;
      if (std::abs(u[i]) <= kZeroResidual) continue;
      const double ai = best_sign * a(i, best_k);
      if (std::abs(ai) < 1e-13) continue;
      const double t = u[i] / ai;
      if (t > 0.0) breaks.emplace_back(t, i);
    }
    std::sort(breaks.begin(), breaks.end());
    double slope = best_slope;
    Eigen::Index entering = -1;
    for (const auto& [t, i] : breaks) {
      slope += std::abs(a(i, best_k));
      if (slope >= 0.0) {
        entering = i;
        break;
      }
    }
    if (entering < 0) return false;

    Vertex next = v;
    next.rows[static_cast<std::size_t>(best_k)] = entering;
    Matrix next_inv;
    std::swap(v, next);
    if (!solve_basis(v.rows, next_inv)) {
      std::swap(v, next);
      return false;
    }
    const double next_loss = design_loss(d, v.beta, r);
    if (next_loss > loss + 1e-13) {
      std::swap(v, next);
      return false;
    }
    inv = std::move(next_inv);
    loss = next_loss;
  }
  return false;
}

double original_loss(const Matrix& X, const Vector& y, double intercept,
                     const Vector& coef, QuantileLevel r) {
  const Vector pred = (X * coef).array() + intercept;
  return mean_pinball_loss(y, pred, r);
}

}  // namespace

LinearQuantileModel fit_quantile_regression(const Matrix& X, const Vector& y,
                                            QuantileLevel r,
                                            const SolverConfig& cfg) {
  cfg.validate();
  check_inputs(X, y, "fit_quantile_regression");

  const Design d = standardize(X, y);
  const Eigen::Index p = d.params();
  const double rv = r.value();

  // Map standardized parameters back to caller units.
  auto unstandardize = [&](const Vector& beta, double& intercept, Vector& coef) {
    coef = Vector::Zero(X.cols());
    intercept = d.y_center + d.y_scale * beta[0];
    for (Eigen::Index k = 1; k < p; ++k) {
      const double c = d.y_scale * beta[k] / d.x_scale[k - 1];
      coef[d.active[static_cast<std::size_t>(k - 1)]] = c;
      intercept -= c * d.x_mean[k - 1];
    }
  };

  LinearQuantileModel model;
  model.quantile = r;
  Vector beta = smoothed_irls(d, rv, cfg);
  unstandardize(beta, model.intercept, model.coefficients);
  model.train_loss = original_loss(X, y, model.intercept, model.coefficients, r);

  Vertex vertex{beta, initial_basis(d, beta)};
  if (static_cast<Eigen::Index>(vertex.rows.size()) != p) return model;
  vertex_descent(d, rv, vertex);

  // Two candidate reconstructions of the polished fit: the affine map from
  // standardized units, and a direct interpolation of the basis rows in the
  // original units. Keep whichever has the lower loss.
  double intercept = 0.0;
  Vector coef;
  unstandardize(vertex.beta, intercept, coef);
  double loss = original_loss(X, y, intercept, coef, r);

  Matrix xb(p, p);
  Vector yb(p);
  for (Eigen::Index k = 0; k < p; ++k) {
    const Eigen::Index row = vertex.rows[static_cast<std::size_t>(k)];
    xb(k, 0) = 1.0;
    for (Eigen::Index c = 1; c < p; ++c) {
      xb(k, c) = X(row, d.active[static_cast<std::size_t>(c - 1)]);
    }
    yb[k] = y[row];
  }
  Eigen::FullPivLU<Matrix> lu(xb);
  if (lu.isInvertible()) {
    const Vector direct = lu.solve(yb);
    if (direct.allFinite()) {
      Vector direct_coef = Vector::Zero(X.cols());
      for (Eigen::Index c = 1; c < p; ++c) {
        direct_coef[d.active[static_cast<std::size_t>(c - 1)]] = direct[c];
      }
      const double direct_loss =
          original_loss(X, y, direct[0], direct_coef, r);
      if (direct_loss <= loss) {
        intercept = direct[0];
        coef = std::move(direct_coef);
        loss = direct_loss;
      }
    }
  }

  if (loss <= model.train_loss) {
    model.intercept = intercept;
    model.coefficients = std::move(coef);
    model.train_loss = loss;
  }
  return model;
}

LinearQuantileModel fit_ols(const Matrix& X, const Vector& y) {
  check_inputs(X, y, "fit_ols");
  const Eigen::Index d = X.cols();

  const double y_mean = y.mean();
  const Vector x_mean = X.colwise().mean().transpose();
  const Matrix xc = X.rowwise() - x_mean.transpose();
  const Vector yc = y.array() - y_mean;

  Vector beta = Vector::Zero(d);
  if (d > 0) {
    Matrix gram = xc.transpose() * xc;
    const Vector rhs = xc.transpose() * yc;
    Eigen::LDLT<Matrix> ldlt(gram);
    const Vector diag = ldlt.vectorD();
    const double max_pivot = diag.cwiseAbs().maxCoeff();
    const bool singular = ldlt.info() != Eigen::Success || !(max_pivot > 0.0) ||
                          diag.minCoeff() <= kPivotThreshold * max_pivot;
    if (singular) {
      const double jitter =
          kPivotThreshold * std::max(gram.trace() / static_cast<double>(d), 1.0);
      gram.diagonal().array() += jitter;
      ldlt.compute(gram);
    }
    beta = ldlt.solve(rhs);
    if (!beta.allFinite()) {
      throw InvalidInput("fit_ols: least-squares solve failed");
    }
  }

  LinearQuantileModel model;
  model.coefficients = beta;
  model.intercept = y_mean - x_mean.dot(beta);
  model.quantile = QuantileLevel(0.5);
  const Vector resid = y - ((X * beta).array() + model.intercept).matrix();
  model.train_loss = resid.squaredNorm() / static_cast<double>(y.size());
  return model;
}

Vector predict_linear(const LinearQuantileModel& model, const Matrix& X) {
  if (X.cols() != model.dimension()) {
    throw InvalidInput("predict_linear: model expects " +
                       std::to_string(model.dimension()) + " features, got " +
                       std::to_string(X.cols()));
  }
  Vector out(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) out[i] = predict_row(model, X.row(i));
  return out;
}

}  // namespace qrt
