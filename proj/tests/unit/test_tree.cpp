#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "doctest.h"
#include "oracles.hpp"
#include "qrt/baselines.hpp"
#include "qrt/data.hpp"
#include "qrt/error.hpp"
#include "qrt/tree.hpp"
#include "tree_checks.hpp"

using namespace qrt;
namespace qt = qrt::testing;

namespace {

std::size_t count_lines_matching(const std::string& text, bool (*pred)(const std::string&)) {
  std::istringstream in(text);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) n += pred(line);
  return n;
}

bool is_dot_node(const std::string& line) {
  return line.rfind("  n", 0) == 0 && line.find("->") == std::string::npos &&
         line.find("[label=") != std::string::npos;
}

bool is_dot_edge(const std::string& line) { return line.find("->") != std::string::npos; }

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

FitConfig config(double r, int depth) {
  FitConfig cfg;
  cfg.quantile = QuantileLevel(r);
  cfg.max_depth = depth;
  return cfg;
}

}  // namespace

TEST_CASE("candidate thresholds") {
  const std::vector<double> constant{1, 1, 1};
  CHECK(candidate_thresholds(constant, 4).empty());

  const std::vector<double> three{4, 1, 2};
  CHECK(candidate_thresholds(three, 2) == std::vector<double>{1.5, 3.0});
  CHECK(candidate_thresholds(three, 10) == std::vector<double>{1.5, 3.0});

  RandomStream rng(8, 0);
  std::vector<double> values(100);
  for (auto& v : values) v = rng.uniform();
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  std::set<double> all_mids;
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    all_mids.insert(sorted[i - 1] + 0.5 * (sorted[i] - sorted[i - 1]));
  }
  const auto picked = candidate_thresholds(values, 8);
  CHECK(picked.size() == 8);
  CHECK(std::is_sorted(picked.begin(), picked.end()));
  for (double t : picked) CHECK(all_mids.count(t) == 1);
  CHECK(std::set<double>(picked.begin(), picked.end()).size() == 8);

  CHECK(candidate_thresholds(values, 1000).size() == 99);
  CHECK_THROWS_AS(candidate_thresholds(std::vector<double>{}, 3), InvalidInput);
}

TEST_CASE("best_split finds no split when one line already fits") {
  Matrix x(20, 1);
  Vector y(20);
  for (int i = 0; i < 20; ++i) {
    x(i, 0) = i / 19.0;
    y[i] = x(i, 0);
  }
  CHECK_FALSE(best_split(x, y, QuantileLevel(0.5), FitConfig{}).has_value());
}

TEST_CASE("best_split separates the step dataset") {
  const auto step = qt::step_problem();
  FitConfig cfg;
  cfg.max_thresholds_per_feature = 1000;
  const auto split = best_split(step.x, step.y, QuantileLevel(0.5), cfg);
  REQUIRE(split);
  CHECK(split->feature_index == 0);
  CHECK(split->threshold > -0.1);
  CHECK(split->threshold < 0.1);
  CHECK(split->total_loss == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(split->left_count == 10);
  CHECK(split->right_count == 10);

  // Oracle: exhaustive scan with brute-force child fits.
  const auto ref = qt::reference_best_split(step.x, step.y, 0.5, 3, 6);
  REQUIRE(ref);
  CHECK(split->total_loss == doctest::Approx(ref->loss).epsilon(1e-9));
}

TEST_CASE("best_split returns nothing on constant features and rejects NaN") {
  Matrix x = Matrix::Constant(12, 2, 3.0);
  Vector y(12);
  for (int i = 0; i < 12; ++i) y[i] = i * i;
  CHECK_FALSE(best_split(x, y, QuantileLevel(0.5), FitConfig{}).has_value());
  x(3, 1) = std::nan("");
  CHECK_THROWS_AS(best_split(x, y, QuantileLevel(0.5), FitConfig{}), InvalidInput);
}

TEST_CASE("best_split agrees with the naive reference scan") {
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    const auto d = static_cast<std::size_t>(1 + seed % 2);
    const auto n = static_cast<std::size_t>(12 + seed % 9);
    const auto prob = qt::random_problem(n, d, seed + 100);
    const double r = std::vector<double>{0.2, 0.5, 0.8}[seed % 3];
    FitConfig cfg;
    cfg.max_thresholds_per_feature = 1000;
    const auto got = best_split(prob.x, prob.y, QuantileLevel(r), cfg);
    const auto ref = qt::reference_best_split(prob.x, prob.y, r, d + 2, 2 * (d + 2));
    REQUIRE(got.has_value() == ref.has_value());
    if (got) CHECK(std::abs(got->total_loss - ref->loss) <= 1e-9);
  }
}

TEST_CASE("depth-0 tree equals the global quantile regression") {
  const auto prob = qt::random_problem(40, 2, 3);
  const auto tree = fit_tree(prob.x, prob.y, config(0.3, 0));
  REQUIRE(tree.nodes().size() == 1);
  const auto global = fit_global_quantile(prob.x, prob.y, QuantileLevel(0.3));
  const auto& leaf = std::get<LeafNode>(tree.root());
  CHECK(leaf.model.intercept == global.intercept);
  CHECK(leaf.model.coefficients == global.coefficients);
  const Matrix probe = Matrix::Random(15, 2) * 3.0;
  CHECK(predict_tree(tree, probe) == predict_linear(global, probe));
}

TEST_CASE("fit_tree on the step dataset") {
  const auto step = qt::step_problem();
  const auto tree = fit_tree(step.x, step.y, config(0.5, 1));
  CHECK(tree.nodes().size() == 3);
  CHECK(tree.leaf_count() == 2);
  CHECK(tree.train_loss() == doctest::Approx(0.0).epsilon(1e-9));
  const Matrix probe{{-0.5}, {0.5}};
  const Vector p = predict_tree(tree, probe);
  CHECK(p[0] == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(p[1] == doctest::Approx(10.0).epsilon(1e-9));

  const auto dot = export_tree(tree, ExportFormat::dot);
  CHECK(count_lines_matching(dot, is_dot_node) == 3);
  CHECK(count_lines_matching(dot, is_dot_edge) == 2);
}

TEST_CASE("deeper synthetic trees do not increase training loss") {
  const auto ds = generate_synthetic(500, 42);
  double previous = 1e300;
  for (int depth = 0; depth <= 3; ++depth) {
    const auto tree = fit_tree(ds.features(), ds.target(), config(0.5, depth));
    CHECK(tree.train_loss() <= previous + 1e-8);
    CHECK(qt::worst_split_gain(tree) <= 1e-9);
    previous = tree.train_loss();
  }
}

TEST_CASE("tree structural invariants") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto prob = qt::random_problem(150, 2, seed * 17);
    FitConfig cfg = config(0.25 + 0.1 * static_cast<double>(seed), 3);
    const auto tree = fit_tree(prob.x, prob.y, cfg);
    CHECK(tree.depth() <= 3);

    // Partition soundness: every row reaches exactly one leaf, counts add up.
    const auto rows = qt::rows_per_node(tree, prob.x);
    std::size_t total = 0;
    for (std::size_t k = 0; k < tree.nodes().size(); ++k) {
      CHECK(rows[k].size() == qt::node_count(tree.nodes()[k]));
      if (const auto* leaf = std::get_if<LeafNode>(&tree.nodes()[k])) {
        total += leaf->sample_count;
        CHECK(leaf->sample_count >= *tree.config().min_samples_leaf);
      }
    }
    CHECK(total == 150);

    CHECK(qt::worst_split_gain(tree) <= 1e-9);
    const auto coverage = qt::check_node_coverage(tree, prob.x, prob.y);
    CHECK(coverage.checked > 0);
    CHECK(coverage.violations == 0);

    // Manual routing agrees with predict_tree.
    const Vector pred = predict_tree(tree, prob.x);
    for (std::size_t k = 0; k < tree.nodes().size(); ++k) {
      const auto* leaf = std::get_if<LeafNode>(&tree.nodes()[k]);
      if (!leaf) continue;
      for (Eigen::Index i : rows[k]) CHECK(pred[i] == predict_row(leaf->model, prob.x.row(i)));
    }

    // Determinism.
    const auto again = fit_tree(prob.x, prob.y, cfg);
    CHECK(export_tree(again, ExportFormat::json) == export_tree(tree, ExportFormat::json));
  }
}

TEST_CASE("fit_tree and predict_tree validate input") {
  CHECK_THROWS_AS(fit_tree(Matrix(0, 1), Vector(0), FitConfig{}), EmptyData);
  FitConfig bad;
  bad.max_depth = -1;
  CHECK_THROWS_AS(fit_tree(Matrix::Zero(3, 1), Vector::Zero(3), bad), InvalidInput);
  bad = FitConfig{};
  bad.min_samples_split = 1;
  CHECK_THROWS_AS(fit_tree(Matrix::Zero(3, 1), Vector::Zero(3), bad), InvalidInput);
  const auto tree = fit_tree(Matrix::Random(10, 2), Vector::Random(10), FitConfig{});
  CHECK_THROWS_AS(predict_tree(tree, Matrix::Zero(2, 3)), InvalidInput);
}

TEST_CASE("small nodes fall back to intercept-only leaves") {
  const auto prob = qt::random_problem(3, 2, 4);
  const auto tree = fit_tree(prob.x, prob.y, config(0.5, 2));
  const auto& leaf = std::get<LeafNode>(tree.root());
  CHECK(leaf.model.coefficients.isZero());
}

TEST_CASE("text and dot exports") {
  const auto prob = qt::random_problem(30, 1, 2);
  const auto single = fit_tree(prob.x, prob.y, config(0.5, 0), {"speed"});
  const auto text = export_tree(single, ExportFormat::text);
  CHECK(std::count(text.begin(), text.end(), '\n') == 1);
  CHECK(text.rfind("leaf:", 0) == 0);
  CHECK(text.find("speed") != std::string::npos);

  const auto step = qt::step_problem();
  const auto tree = fit_tree(step.x, step.y, config(0.5, 1), {"x"});
  const auto dot = export_tree(tree, ExportFormat::dot);
  CHECK(dot.find("x ≤ ") != std::string::npos);
  CHECK(dot.find("n=10") != std::string::npos);
  CHECK(export_tree(tree, ExportFormat::text).rfind("split: x ≤ ", 0) == 0);
  CHECK(parse_export_format("dot") == ExportFormat::dot);
  CHECK_THROWS_AS(parse_export_format("png"), InvalidInput);
}

TEST_CASE("json export round-trips") {
  const auto prob = qt::random_problem(80, 2, 21);
  const auto tree = fit_tree(prob.x, prob.y, config(0.7, 2), {"a", "b"});
  const auto json = export_tree(tree, ExportFormat::json);
  const auto back = import_tree(json);
  CHECK(export_tree(back, ExportFormat::json) == json);
  const Matrix probe = Matrix::Random(40, 2) * 2.0;
  const Vector p0 = predict_tree(tree, probe);
  const Vector p1 = predict_tree(back, probe);
  CHECK(p0 == p1);
  CHECK(back.config().quantile == tree.config().quantile);
  CHECK(back.feature_names() == tree.feature_names());
}

TEST_CASE("golden tree file round-trips byte for byte") {
  const auto golden = read_file(QRT_TEST_DATA_DIR "/golden_tree.json");
  CHECK(export_tree(import_tree(golden), ExportFormat::json) == golden);
}

TEST_CASE("import_tree error reporting") {
  const auto step = qt::step_problem();
  const auto json = export_tree(fit_tree(step.x, step.y, config(0.5, 1)), ExportFormat::json);

  const auto truncated = json.substr(0, json.size() / 2);
  CHECK_THROWS_AS(import_tree(truncated), ParseError);
  try {
    import_tree("{\n  \"schema_version\": 1,\n  oops\n}");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }

  std::string v2 = json;
  v2.replace(v2.find("\"schema_version\": 1"), 19, "\"schema_version\": 2");
  CHECK_THROWS_AS(import_tree(v2), UnsupportedVersion);

  std::string missing = json;
  missing.replace(missing.find("\"threshold\""), 11, "\"thresholdX\"");
  CHECK_THROWS_AS(import_tree(missing), SchemaError);

  CHECK_THROWS_AS(import_tree("[]"), SchemaError);
}
