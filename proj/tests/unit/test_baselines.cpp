#include <limits>
#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "qrt/baselines.hpp"
#include "qrt/data.hpp"
#include "qrt/error.hpp"
#include "qrt/metrics.hpp"

using namespace qrt;
namespace qt = qrt::testing;

namespace {

FitConfig depth(int d) {
  FitConfig cfg;
  cfg.max_depth = d;
  return cfg;
}

// Exhaustive variance-reduction scan over every midpoint of one feature.
double best_sse_threshold(const Matrix& x, const Vector& y, std::size_t min_leaf) {
  std::set<double> distinct(x.col(0).data(), x.col(0).data() + x.rows());
  const std::vector<double> v(distinct.begin(), distinct.end());
  double best_t = 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < v.size(); ++k) {
    const double t = 0.5 * (v[k - 1] + v[k]);
    double sl = 0, sr = 0, ql = 0, qr = 0;
    std::size_t nl = 0, nr = 0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      if (x(i, 0) <= t) {
        sl += y[i];
        ql += y[i] * y[i];
        ++nl;
      } else {
        sr += y[i];
        qr += y[i] * y[i];
        ++nr;
      }
    }
    if (nl < min_leaf || nr < min_leaf) continue;
    const double sse = (ql - sl * sl / nl) + (qr - sr * sr / nr);
    if (sse < best) {
      best = sse;
      best_t = t;
    }
  }
  return best_t;
}

}  // namespace

TEST_CASE("global quantile baseline equals the depth-0 quantile tree") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto prob = qt::random_problem(30 + seed, 2, seed);
    FitConfig cfg = depth(0);
    cfg.quantile = QuantileLevel(0.2 * static_cast<double>(seed) - 0.1);
    const auto tree = fit_tree(prob.x, prob.y, cfg);
    const auto global = fit_global_quantile(prob.x, prob.y, cfg.quantile);
    CHECK(predict_tree(tree, prob.x) == predict_linear(global, prob.x));
  }
  const auto median = fit_global_quantile(Matrix::Zero(5, 1),
                                          (Vector(5) << 5, 1, 4, 2, 3).finished(),
                                          QuantileLevel(0.5));
  CHECK(median.intercept == doctest::Approx(3.0));
}

TEST_CASE("global quantile baseline matches the pair-enumeration oracle") {
  RandomStream rng(31, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const auto n = static_cast<std::size_t>(3 + rng.below(10));
    std::vector<double> xs(n);
    std::vector<double> ys(n);
    Matrix x(static_cast<Eigen::Index>(n), 1);
    Vector y(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      xs[i] = x(static_cast<Eigen::Index>(i), 0) = rng.normal();
      ys[i] = y[static_cast<Eigen::Index>(i)] = rng.normal() - xs[i];
    }
    const auto m = fit_global_quantile(x, y, QuantileLevel(0.25));
    CHECK(m.train_loss <= qt::pair_enumeration_min_loss(xs, ys, 0.25) + 1e-6);
  }
}

TEST_CASE("mean tree on constant targets is a single leaf") {
  const Matrix x = Matrix::Random(30, 2);
  const auto tree = fit_mean_tree(x, Vector::Constant(30, 4.25), depth(3));
  REQUIRE(tree.nodes().size() == 1);
  CHECK(std::get<MeanLeafNode>(tree.nodes()[0]).mean == 4.25);
  CHECK((predict_mean_tree(tree, Matrix::Random(4, 2)).array() == 4.25).all());
}

TEST_CASE("depth-0 mean tree predicts the global mean") {
  const auto prob = qt::random_problem(40, 3, 8);
  const auto tree = fit_mean_tree(prob.x, prob.y, depth(0));
  const Vector p = predict_mean_tree(tree, prob.x);
  CHECK(p.cwiseEqual(p[0]).all());
  CHECK(p[0] == doctest::Approx(prob.y.mean()).epsilon(1e-12));
}

TEST_CASE("mean tree splits the step dataset in the same gap as the quantile tree") {
  const auto step = qt::step_problem();
  const auto tree = fit_mean_tree(step.x, step.y, depth(1));
  REQUIRE(tree.nodes().size() == 3);
  const auto& root = std::get<MeanInternalNode>(tree.nodes()[0]);
  CHECK(root.threshold > -0.1);
  CHECK(root.threshold < 0.1);
  CHECK(root.threshold == best_sse_threshold(step.x, step.y, 5));
  const Matrix probe{{-0.5}, {0.5}};
  const Vector p = predict_mean_tree(tree, probe);
  CHECK(p[0] == doctest::Approx(0.0));
  CHECK(p[1] == doctest::Approx(10.0));

  const auto qrt_tree = fit_tree(step.x, step.y, depth(1));
  const auto& qroot = std::get<InternalNode>(qrt_tree.root());
  CHECK(qroot.threshold > -0.1);
  CHECK(qroot.threshold < 0.1);
}

TEST_CASE("mean tree training MSE is non-increasing in depth") {
  const auto ds = generate_synthetic(400, 3);
  double previous = std::numeric_limits<double>::infinity();
  for (int d = 0; d <= 4; ++d) {
    const auto tree = fit_mean_tree(ds.features(), ds.target(), depth(d));
    const double err = mse(ds.target(), predict_mean_tree(tree, ds.features()));
    CHECK(err <= previous + 1e-9);
    previous = err;
    CHECK(tree.depth() <= d);
  }
}

TEST_CASE("mean tree leaves hold the mean of their rows") {
  const auto prob = qt::random_problem(120, 2, 44);
  const auto tree = fit_mean_tree(prob.x, prob.y, depth(3));
  std::vector<double> sums(tree.nodes().size(), 0.0);
  std::vector<std::size_t> counts(tree.nodes().size(), 0);
  std::vector<double> row(2);
  for (Eigen::Index i = 0; i < prob.x.rows(); ++i) {
    row = {prob.x(i, 0), prob.x(i, 1)};
    // Independent routing through the stored thresholds.
    std::size_t idx = 0;
    while (const auto* in = std::get_if<MeanInternalNode>(&tree.nodes()[idx])) {
      idx = row[in->feature] <= in->threshold ? in->left : in->right;
    }
    CHECK(idx == tree.route(row));
    sums[idx] += prob.y[i];
    ++counts[idx];
  }
  for (std::size_t k = 0; k < tree.nodes().size(); ++k) {
    if (const auto* leaf = std::get_if<MeanLeafNode>(&tree.nodes()[k])) {
      CHECK(leaf->sample_count == counts[k]);
      CHECK(leaf->sample_count >= 5);
      CHECK(leaf->mean == doctest::Approx(sums[k] / static_cast<double>(counts[k])));
    }
  }
}

TEST_CASE("mean tree errors and exports") {
  CHECK_THROWS_AS(fit_mean_tree(Matrix(0, 1), Vector(0), depth(1)), EmptyData);
  const auto step = qt::step_problem();
  const auto tree = fit_mean_tree(step.x, step.y, depth(1), {"x"});
  CHECK_THROWS_AS(predict_mean_tree(tree, Matrix::Zero(1, 2)), InvalidInput);
  const auto dot = export_mean_tree(tree, ExportFormat::dot);
  CHECK(dot.find("mean=10") != std::string::npos);
  CHECK(dot.find("x ≤ ") != std::string::npos);
  const auto text = export_mean_tree(tree, ExportFormat::text);
  CHECK(text.rfind("split: x", 0) == 0);
  CHECK(export_mean_tree(tree, ExportFormat::json).find("\"kind\": \"mean_tree\"") != std::string::npos);
}
