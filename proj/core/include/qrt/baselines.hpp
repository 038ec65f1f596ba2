#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "qrt/solver.hpp"
#include "qrt/tree.hpp"
#include "qrt/types.hpp"

namespace qrt {

/// One quantile regression on the whole dataset.
LinearQuantileModel fit_global_quantile(const Matrix& X, const Vector& y, QuantileLevel r,
                                        const SolverConfig& cfg = {});

struct MeanInternalNode {
  std::size_t feature = 0;
  double threshold = 0.0;
  std::size_t left = 0;
  std::size_t right = 0;
  double mean = 0.0;
  std::size_t sample_count = 0;
};

struct MeanLeafNode {
  double mean = 0.0;
  std::size_t sample_count = 0;
};

using MeanTreeNode = std::variant<MeanInternalNode, MeanLeafNode>;

/// CART regression tree with constant (mean) leaves.
class MeanTree {
 public:
  MeanTree(std::vector<MeanTreeNode> nodes, std::vector<std::string> feature_names);

  const std::vector<MeanTreeNode>& nodes() const noexcept { return nodes_; }
  const std::vector<std::string>& feature_names() const noexcept { return feature_names_; }
  std::size_t dimension() const noexcept { return feature_names_.size(); }
  int depth() const;
  std::size_t route(std::span<const double> row) const;

 private:
  std::vector<MeanTreeNode> nodes_;
  std::vector<std::string> feature_names_;
};

/// Mean-tree defaults for unset sample limits: leaf 5, split 10.
FitConfig resolve_mean_tree_config(const FitConfig& cfg);

/// Greedy growth minimizing the summed within-child squared error. Uses the
/// same candidate thresholds, depth limit, and tie-break as fit_tree; the
/// quantile and solver settings are ignored.
MeanTree fit_mean_tree(const Matrix& X, const Vector& y, const FitConfig& cfg,
                       std::vector<std::string> feature_names = {});

Vector predict_mean_tree(const MeanTree& tree, const Matrix& X);

/// Same layouts as export_tree; leaves are labelled "mean=value". The JSON
/// form has kind "mean_tree" and is export-only.
std::string export_mean_tree(const MeanTree& tree, ExportFormat format);

}  // namespace qrt
