#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "qrt/solver.hpp"
#include "qrt/types.hpp"

namespace qrt {

/// Growth parameters shared by the quantile tree and the mean tree.
///
/// The sample-count limits are optional; unset values resolve against the
/// feature dimension d at fit time (see resolved()).
struct FitConfig {
  QuantileLevel quantile{0.5};
  int max_depth = 3;
  /// A node is split only when it holds at least this many samples.
  std::optional<std::size_t> min_samples_split;
  std::optional<std::size_t> min_samples_leaf;
  std::size_t max_thresholds_per_feature = 32;
  SolverConfig solver;
  /// Reserved for subsampling; growth is currently fully deterministic.
  std::uint64_t seed = 0;

  void validate() const;

  /// Copy with defaults filled for d features: split 2(d+2), leaf d+2.
  FitConfig resolved(std::size_t d) const;
};

struct SplitCandidate {
  std::size_t feature_index = 0;
  double threshold = 0.0;
  LinearQuantileModel left_model;
  LinearQuantileModel right_model;
  std::size_t left_count = 0;
  std::size_t right_count = 0;
  /// (n_left * loss_left + n_right * loss_right) / n
  double total_loss = 0.0;
};

/// Rows with x[feature] <= threshold go left.
struct InternalNode {
  std::size_t feature = 0;
  double threshold = 0.0;
  std::size_t left = 0;
  std::size_t right = 0;
  /// Single quantile regression on this node's samples; the split was
  /// accepted because the children beat it.
  LinearQuantileModel model;
  std::size_t sample_count = 0;
};

struct LeafNode {
  LinearQuantileModel model;
  std::size_t sample_count = 0;
};

using TreeNode = std::variant<InternalNode, LeafNode>;

class QuantileRegressionTree {
 public:
  /// `nodes` is in preorder with the root at index 0.
  QuantileRegressionTree(std::vector<TreeNode> nodes, FitConfig config,
                         std::vector<std::string> feature_names,
                         double train_loss);

  const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
  const TreeNode& root() const noexcept { return nodes_.front(); }
  const FitConfig& config() const noexcept { return config_; }
  const std::vector<std::string>& feature_names() const noexcept {
    return feature_names_;
  }
  double train_loss() const noexcept { return train_loss_; }
  std::size_t dimension() const noexcept { return feature_names_.size(); }

  /// Longest root-to-leaf edge count.
  int depth() const;
  std::size_t leaf_count() const;

  /// Index into nodes() of the leaf that `row` falls into.
  std::size_t route(std::span<const double> row) const;

 private:
  std::vector<TreeNode> nodes_;
  FitConfig config_;
  std::vector<std::string> feature_names_;
  double train_loss_;
};

/// Midpoints between consecutive distinct sorted values, thinned to an
/// evenly rank-spaced subset of `budget` when there are more.
std::vector<double> candidate_thresholds(std::span<const double> values,
                                         std::size_t budget);

/// Best (feature, threshold) split of one node, or nothing when no legal
/// candidate beats the node's own single-model loss. Ties resolve to the
/// lower feature index, then the lower threshold.
std::optional<SplitCandidate> best_split(const Matrix& X, const Vector& y,
                                         QuantileLevel r, const FitConfig& cfg);

/// Greedy recursive growth. Feature names default to x0, x1, ...
QuantileRegressionTree fit_tree(const Matrix& X, const Vector& y,
                                const FitConfig& cfg,
                                std::vector<std::string> feature_names = {});

Vector predict_tree(const QuantileRegressionTree& tree, const Matrix& X);

/// Quantile fit used for every tree node: intercept-only below d+2 samples.
LinearQuantileModel fit_node_model(const Matrix& X, const Vector& y,
                                   QuantileLevel r, const SolverConfig& cfg);

enum class ExportFormat { dot, text, json };

/// Parses "dot", "text" or "json"; throws InvalidInput otherwise.
ExportFormat parse_export_format(const std::string& name);

std::string export_tree(const QuantileRegressionTree& tree, ExportFormat format);

/// Inverse of export_tree(json). Throws ParseError on malformed documents,
/// UnsupportedVersion on a schema_version other than 1, and SchemaError on
/// missing or ill-typed fields.
QuantileRegressionTree import_tree(const std::string& serialized);

/// "b0 + b1*name1 - b2*name2" with 6 significant digits.
std::string format_linear_model(const LinearQuantileModel& model,
                                const std::vector<std::string>& names);

/// Shortest %g rendering that round-trips, used by every exporter.
std::string format_significant(double value, int digits);

}  // namespace qrt
