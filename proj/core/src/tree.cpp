#include "qrt/tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>

#include "qrt/error.hpp"

namespace qrt {

namespace {

// Minimum gain for a split to be accepted over the node's own model.
constexpr double kSplitMargin = 1e-12;

}  // namespace

void FitConfig::validate() const {
  if (max_depth < 0) throw InvalidInput("max_depth must be >= 0");
  if (min_samples_split && *min_samples_split < 2) {
    throw InvalidInput("min_samples_split must be >= 2");
  }
  if (min_samples_leaf && *min_samples_leaf < 1) {
    throw InvalidInput("min_samples_leaf must be >= 1");
  }
  if (max_thresholds_per_feature < 1) {
    throw InvalidInput("max_thresholds_per_feature must be >= 1");
  }
  solver.validate();
}

FitConfig FitConfig::resolved(std::size_t d) const {
  FitConfig out = *this;
  if (!out.min_samples_leaf) out.min_samples_leaf = d + 2;
  if (!out.min_samples_split) out.min_samples_split = 2 * (d + 2);
  return out;
}

QuantileRegressionTree::QuantileRegressionTree(std::vector<TreeNode> nodes,
                                               FitConfig config,
                                               std::vector<std::string> feature_names,
                                               double train_loss)
    : nodes_(std::move(nodes)),
      config_(std::move(config)),
      feature_names_(std::move(feature_names)),
      train_loss_(train_loss) {
  if (nodes_.empty()) throw InvalidInput("tree has no nodes");
  for (const auto& node : nodes_) {
    const auto& model = std::visit([](const auto& n) -> const LinearQuantileModel& {
      return n.model;
    }, node);
    if (model.coefficients.size() != static_cast<Eigen::Index>(feature_names_.size())) {
      throw InvalidInput("tree node model dimension does not match feature names");
    }
    if (const auto* in = std::get_if<InternalNode>(&node)) {
      if (in->left >= nodes_.size() || in->right >= nodes_.size() ||
          in->feature >= feature_names_.size()) {
        throw InvalidInput("tree internal node references are out of range");
      }
    }
  }
}

int QuantileRegressionTree::depth() const {
  std::vector<std::pair<std::size_t, int>> stack{{0, 0}};
  int deepest = 0;
  while (!stack.empty()) {
    const auto [idx, level] = stack.back();
    stack.pop_back();
    deepest = std::max(deepest, level);
    if (const auto* in = std::get_if<InternalNode>(&nodes_[idx])) {
      stack.emplace_back(in->left, level + 1);
      stack.emplace_back(in->right, level + 1);
    }
  }
  return deepest;
}

std::size_t QuantileRegressionTree::leaf_count() const {
  return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) {
    return std::holds_alternative<LeafNode>(n);
  }));
}

std::size_t QuantileRegressionTree::route(std::span<const double> row) const {
  if (row.size() != dimension()) {
    throw InvalidInput("route: expected " + std::to_string(dimension()) +
                       " features, got " + std::to_string(row.size()));
  }
  std::size_t idx = 0;
  while (const auto* in = std::get_if<InternalNode>(&nodes_[idx])) {
    idx = row[in->feature] <= in->threshold ? in->left : in->right;
  }
  return idx;
}

std::vector<double> candidate_thresholds(std::span<const double> values,
                                         std::size_t budget) {
  if (values.empty()) throw InvalidInput("candidate_thresholds: empty input");
  if (budget == 0) throw InvalidInput("candidate_thresholds: budget must be >= 1");
  std::vector<double> sorted(values.begin(), values.end());
  for (double v : sorted) {
    if (!std::isfinite(v)) throw InvalidInput("candidate_thresholds: non-finite value");
  }
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

  std::vector<double> mids;
  mids.reserve(sorted.size());
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    mids.push_back(sorted[i - 1] + 0.5 * (sorted[i] - sorted[i - 1]));
  }
  if (mids.size() <= budget) return mids;

  std::vector<double> out;
  out.reserve(budget);
  if (budget == 1) {
    out.push_back(mids[(mids.size() - 1) / 2]);
    return out;
  }
  const double step = static_cast<double>(mids.size() - 1) / static_cast<double>(budget - 1);
  for (std::size_t k = 0; k < budget; ++k) {
    const auto idx = static_cast<std::size_t>(std::llround(step * static_cast<double>(k)));
    out.push_back(mids[std::min(idx, mids.size() - 1)]);
  }
  return out;
}

LinearQuantileModel fit_node_model(const Matrix& X, const Vector& y,
                                   QuantileLevel r, const SolverConfig& cfg) {
  if (y.size() < X.cols() + 2) {
    return fit_quantile_regression(Matrix::Zero(X.rows(), X.cols()), y, r, cfg);
  }
  return fit_quantile_regression(X, y, r, cfg);
}

namespace {

void check_finite(const Matrix& X, const Vector& y, const char* who) {
  if (X.rows() != y.size()) {
    throw InvalidInput(std::string(who) + ": X rows and y length differ");
  }
  if (!X.allFinite() || !y.allFinite()) {
    throw InvalidInput(std::string(who) + ": non-finite input");
  }
}

// Split search for one node whose own model (and its loss) is known.
std::optional<SplitCandidate> search_split(const Matrix& X, const Vector& y,
                                           QuantileLevel r, const FitConfig& cfg,
                                           double parent_loss) {
  const auto n = static_cast<std::size_t>(y.size());
  const std::size_t min_leaf = *cfg.min_samples_leaf;
  if (n < *cfg.min_samples_split || n < 2 * min_leaf) return std::nullopt;

  std::optional<SplitCandidate> best;
  std::vector<Eigen::Index> left_rows;
  std::vector<Eigen::Index> right_rows;
  left_rows.reserve(n);
  right_rows.reserve(n);
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const auto column = X.col(j);
    const std::span<const double> values(column.data(), n);
    for (const double threshold : candidate_thresholds(values, cfg.max_thresholds_per_feature)) {
      left_rows.clear();
      right_rows.clear();
      for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) {
        (column[i] <= threshold ? left_rows : right_rows).push_back(i);
      }
      if (left_rows.size() < min_leaf || right_rows.size() < min_leaf) continue;

      const Matrix xl = X(left_rows, Eigen::all);
      const Matrix xr = X(right_rows, Eigen::all);
      const Vector yl = y(left_rows);
      const Vector yr = y(right_rows);
      LinearQuantileModel lm = fit_node_model(xl, yl, r, cfg.solver);
      LinearQuantileModel rm = fit_node_model(xr, yr, r, cfg.solver);
      const double total =
          (static_cast<double>(left_rows.size()) * lm.train_loss +
           static_cast<double>(right_rows.size()) * rm.train_loss) /
          static_cast<double>(n);
      // Candidates arrive in (feature, threshold) order, so a strict
      // comparison implements the tie-break.
      if (!best || total < best->total_loss) {
        best = SplitCandidate{static_cast<std::size_t>(j), threshold, std::move(lm),
                              std::move(rm),  left_rows.size(), right_rows.size(),
                              total};
      }
    }
  }
  if (best && best->total_loss < parent_loss - kSplitMargin) return best;
  return std::nullopt;
}

class Grower {
 public:
  Grower(const Matrix& X, const Vector& y, const FitConfig& cfg)
      : x_(X), y_(y), cfg_(cfg) {}

  std::vector<TreeNode> grow() {
    std::vector<Eigen::Index> all(static_cast<std::size_t>(y_.size()));
    std::iota(all.begin(), all.end(), Eigen::Index{0});
    const Matrix xs = x_;
    const Vector ys = y_;
    LinearQuantileModel root = fit_node_model(xs, ys, cfg_.quantile, cfg_.solver);
    build(all, std::move(root), 0);
    return std::move(nodes_);
  }

 private:
  std::size_t build(const std::vector<Eigen::Index>& rows, LinearQuantileModel model,
                    int depth) {
    const std::size_t idx = nodes_.size();
    nodes_.emplace_back(LeafNode{model, rows.size()});
    if (depth >= cfg_.max_depth) return idx;

    const Matrix xs = x_(rows, Eigen::all);
    const Vector ys = y_(rows);
    auto split = search_split(xs, ys, cfg_.quantile, cfg_, model.train_loss);
    if (!split) return idx;

    std::vector<Eigen::Index> left;
    std::vector<Eigen::Index> right;
    for (Eigen::Index row : rows) {
      (x_(row, static_cast<Eigen::Index>(split->feature_index)) <= split->threshold ? left : right)
          .push_back(row);
    }
    const std::size_t l = build(left, std::move(split->left_model), depth + 1);
    const std::size_t r = build(right, std::move(split->right_model), depth + 1);
    nodes_[idx] = InternalNode{split->feature_index, split->threshold, l, r, std::move(model),
                               rows.size()};
    return idx;
  }

  const Matrix& x_;
  const Vector& y_;
  const FitConfig& cfg_;
  std::vector<TreeNode> nodes_;
};

}  // namespace

std::optional<SplitCandidate> best_split(const Matrix& X, const Vector& y,
                                         QuantileLevel r, const FitConfig& cfg) {
  cfg.validate();
  check_finite(X, y, "best_split");
  if (y.size() == 0) return std::nullopt;
  const FitConfig resolved = cfg.resolved(static_cast<std::size_t>(X.cols()));
  const LinearQuantileModel parent = fit_node_model(X, y, r, resolved.solver);
  return search_split(X, y, r, resolved, parent.train_loss);
}

QuantileRegressionTree fit_tree(const Matrix& X, const Vector& y,
                                const FitConfig& cfg,
                                std::vector<std::string> feature_names) {
  cfg.validate();
  if (y.size() == 0 || X.rows() == 0) throw EmptyData("fit_tree: no observations");
  check_finite(X, y, "fit_tree");
  if (feature_names.empty()) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      feature_names.push_back("x" + std::to_string(j));
    }
  }
  if (static_cast<Eigen::Index>(feature_names.size()) != X.cols()) {
    throw InvalidInput("fit_tree: feature name count does not match columns");
  }

  const FitConfig resolved = cfg.resolved(static_cast<std::size_t>(X.cols()));
  std::vector<TreeNode> nodes = Grower(X, y, resolved).grow();

  QuantileRegressionTree tree(std::move(nodes), resolved, std::move(feature_names), 0.0);
  const double train_loss = mean_pinball_loss(y, predict_tree(tree, X), resolved.quantile);
  return QuantileRegressionTree(tree.nodes(), resolved, tree.feature_names(), train_loss);
}

Vector predict_tree(const QuantileRegressionTree& tree, const Matrix& X) {
  if (static_cast<std::size_t>(X.cols()) != tree.dimension()) {
    throw InvalidInput("predict_tree: model expects " + std::to_string(tree.dimension()) +
                       " features, got " + std::to_string(X.cols()));
  }
  Vector out(X.rows());
  std::vector<double> row(static_cast<std::size_t>(X.cols()));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) row[static_cast<std::size_t>(j)] = X(i, j);
    const auto& leaf = std::get<LeafNode>(tree.nodes()[tree.route(row)]);
    out[i] = predict_row(leaf.model, X.row(i));
  }
  return out;
}

}  // namespace qrt
