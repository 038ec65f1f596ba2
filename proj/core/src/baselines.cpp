#include "qrt/baselines.hpp"

#include <algorithm>
#include <numeric>
#include <optional>
#include <sstream>

#include "json.hpp"
#include "qrt/error.hpp"

namespace qrt {

LinearQuantileModel fit_global_quantile(const Matrix& X, const Vector& y, QuantileLevel r,
                                        const SolverConfig& cfg) {
  return fit_quantile_regression(X, y, r, cfg);
}

MeanTree::MeanTree(std::vector<MeanTreeNode> nodes, std::vector<std::string> feature_names)
    : nodes_(std::move(nodes)), feature_names_(std::move(feature_names)) {
  if (nodes_.empty()) throw InvalidInput("mean tree has no nodes");
}

int MeanTree::depth() const {
  std::vector<std::pair<std::size_t, int>> stack{{0, 0}};
  int deepest = 0;
  while (!stack.empty()) {
    const auto [idx, level] = stack.back();
    stack.pop_back();
    deepest = std::max(deepest, level);
    if (const auto* in = std::get_if<MeanInternalNode>(&nodes_[idx])) {
      stack.emplace_back(in->left, level + 1);
      stack.emplace_back(in->right, level + 1);
    }
  }
  return deepest;
}

std::size_t MeanTree::route(std::span<const double> row) const {
  if (row.size() != dimension()) {
    throw InvalidInput("route: expected " + std::to_string(dimension()) + " features, got " +
                       std::to_string(row.size()));
  }
  std::size_t idx = 0;
  while (const auto* in = std::get_if<MeanInternalNode>(&nodes_[idx])) {
    idx = row[in->feature] <= in->threshold ? in->left : in->right;
  }
  return idx;
}

FitConfig resolve_mean_tree_config(const FitConfig& cfg) {
  FitConfig out = cfg;
  if (!out.min_samples_leaf) out.min_samples_leaf = 5;
  if (!out.min_samples_split) out.min_samples_split = 2 * *out.min_samples_leaf;
  return out;
}

namespace {

constexpr double kSplitMargin = 1e-12;

struct Moments {
  double mean = 0.0;
  double sse = 0.0;
};

Moments moments(const Vector& y, const std::vector<Eigen::Index>& rows) {
  Moments m;
  for (Eigen::Index i : rows) m.mean += y[i];
  m.mean /= static_cast<double>(rows.size());
  for (Eigen::Index i : rows) m.sse += (y[i] - m.mean) * (y[i] - m.mean);
  return m;
}

class MeanGrower {
 public:
  MeanGrower(const Matrix& X, const Vector& y, const FitConfig& cfg)
      : x_(X), y_(y), cfg_(cfg) {}

  std::vector<MeanTreeNode> grow() {
    std::vector<Eigen::Index> all(static_cast<std::size_t>(y_.size()));
    std::iota(all.begin(), all.end(), Eigen::Index{0});
    build(all, 0);
    return std::move(nodes_);
  }

 private:
  struct Split {
    std::size_t feature;
    double threshold;
    double sse;
  };

  std::optional<Split> search(const std::vector<Eigen::Index>& rows, double parent_sse) const {
    const std::size_t n = rows.size();
    const std::size_t min_leaf = *cfg_.min_samples_leaf;
    if (n < *cfg_.min_samples_split || n < 2 * min_leaf) return std::nullopt;
    std::optional<Split> best;
    std::vector<double> values(n);
    std::vector<Eigen::Index> left;
    std::vector<Eigen::Index> right;
    for (Eigen::Index j = 0; j < x_.cols(); ++j) {
      for (std::size_t i = 0; i < n; ++i) values[i] = x_(rows[i], j);
      for (const double t : candidate_thresholds(values, cfg_.max_thresholds_per_feature)) {
        left.clear();
        right.clear();
        for (Eigen::Index row : rows) (x_(row, j) <= t ? left : right).push_back(row);
        if (left.size() < min_leaf || right.size() < min_leaf) continue;
        const double sse = moments(y_, left).sse + moments(y_, right).sse;
        if (!best || sse < best->sse) best = Split{static_cast<std::size_t>(j), t, sse};
      }
    }
    const double nd = static_cast<double>(n);
    if (best && best->sse / nd < parent_sse / nd - kSplitMargin) return best;
    return std::nullopt;
  }

  std::size_t build(const std::vector<Eigen::Index>& rows, int depth) {
    const Moments m = moments(y_, rows);
    const std::size_t idx = nodes_.size();
    nodes_.emplace_back(MeanLeafNode{m.mean, rows.size()});
    if (depth >= cfg_.max_depth) return idx;
    const auto split = search(rows, m.sse);
    if (!split) return idx;
    std::vector<Eigen::Index> left;
    std::vector<Eigen::Index> right;
    for (Eigen::Index row : rows) {
      (x_(row, static_cast<Eigen::Index>(split->feature)) <= split->threshold ? left : right)
          .push_back(row);
    }
    const std::size_t l = build(left, depth + 1);
    const std::size_t r = build(right, depth + 1);
    nodes_[idx] = MeanInternalNode{split->feature, split->threshold, l, r, m.mean, rows.size()};
    return idx;
  }

  const Matrix& x_;
  const Vector& y_;
  const FitConfig& cfg_;
  std::vector<MeanTreeNode> nodes_;
};

}  // namespace

MeanTree fit_mean_tree(const Matrix& X, const Vector& y, const FitConfig& cfg,
                       std::vector<std::string> feature_names) {
  cfg.validate();
  if (y.size() == 0 || X.rows() == 0) throw EmptyData("fit_mean_tree: no observations");
  if (X.rows() != y.size()) throw InvalidInput("fit_mean_tree: X rows and y length differ");
  if (!X.allFinite() || !y.allFinite()) throw InvalidInput("fit_mean_tree: non-finite input");
  if (feature_names.empty()) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) feature_names.push_back("x" + std::to_string(j));
  }
  if (static_cast<Eigen::Index>(feature_names.size()) != X.cols()) {
    throw InvalidInput("fit_mean_tree: feature name count does not match columns");
  }
  const FitConfig resolved = resolve_mean_tree_config(cfg);
  return MeanTree(MeanGrower(X, y, resolved).grow(), std::move(feature_names));
}

Vector predict_mean_tree(const MeanTree& tree, const Matrix& X) {
  if (static_cast<std::size_t>(X.cols()) != tree.dimension()) {
    throw InvalidInput("predict_mean_tree: model expects " + std::to_string(tree.dimension()) +
                       " features, got " + std::to_string(X.cols()));
  }
  Vector out(X.rows());
  std::vector<double> row(static_cast<std::size_t>(X.cols()));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) row[static_cast<std::size_t>(j)] = X(i, j);
    out[i] = std::get<MeanLeafNode>(tree.nodes()[tree.route(row)]).mean;
  }
  return out;
}

namespace {

std::string mean_label(const MeanLeafNode& leaf, const char* sep) {
  return "mean=" + format_significant(leaf.mean, 6) + sep + "n=" +
         std::to_string(leaf.sample_count);
}

std::string mean_split_label(const MeanTree& tree, const MeanInternalNode& in) {
  return tree.feature_names()[in.feature] + " ≤ " + format_significant(in.threshold, 6);
}

void mean_text(const MeanTree& tree, std::size_t idx, int indent, std::ostringstream& out) {
  out << std::string(static_cast<std::size_t>(2 * indent), ' ');
  if (const auto* in = std::get_if<MeanInternalNode>(&tree.nodes()[idx])) {
    out << "split: " << mean_split_label(tree, *in) << " (n=" << in->sample_count << ")\n";
    mean_text(tree, in->left, indent + 1, out);
    mean_text(tree, in->right, indent + 1, out);
  } else {
    out << "leaf: " << mean_label(std::get<MeanLeafNode>(tree.nodes()[idx]), ", ") << '\n';
  }
}

nlohmann::ordered_json mean_json(const MeanTree& tree, std::size_t idx) {
  if (const auto* in = std::get_if<MeanInternalNode>(&tree.nodes()[idx])) {
    return {{"type", "internal"},          {"feature", in->feature},
            {"threshold", in->threshold},  {"sample_count", in->sample_count},
            {"mean", in->mean},            {"left", mean_json(tree, in->left)},
            {"right", mean_json(tree, in->right)}};
  }
  const auto& leaf = std::get<MeanLeafNode>(tree.nodes()[idx]);
  return {{"type", "leaf"}, {"sample_count", leaf.sample_count}, {"mean", leaf.mean}};
}

}  // namespace

std::string export_mean_tree(const MeanTree& tree, ExportFormat format) {
  std::ostringstream out;
  const auto& nodes = tree.nodes();
  switch (format) {
    case ExportFormat::dot:
      out << "digraph MeanTree {\n  node [shape=box, fontname=\"Helvetica\"];\n";
      for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (const auto* in = std::get_if<MeanInternalNode>(&nodes[i])) {
          out << "  n" << i << " [label=\"" << mean_split_label(tree, *in) << "\"];\n";
        } else {
          out << "  n" << i << " [label=\"" << mean_label(std::get<MeanLeafNode>(nodes[i]), "\\n")
              << "\"];\n";
        }
      }
      for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (const auto* in = std::get_if<MeanInternalNode>(&nodes[i])) {
          out << "  n" << i << " -> n" << in->left << " [label=\"yes\"];\n";
          out << "  n" << i << " -> n" << in->right << " [label=\"no\"];\n";
        }
      }
      out << "}\n";
      break;
    case ExportFormat::text:
      mean_text(tree, 0, 0, out);
      break;
    case ExportFormat::json: {
      nlohmann::ordered_json doc{{"schema_version", 1},
                                 {"kind", "mean_tree"},
                                 {"feature_names", tree.feature_names()},
                                 {"root", mean_json(tree, 0)}};
      out << doc.dump(2) << '\n';
      break;
    }
  }
  return out.str();
}

}  // namespace qrt
