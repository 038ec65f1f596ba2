#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "qrt/types.hpp"

namespace qrt {

/// Feature matrix plus target with column names. Construction validates:
/// n >= 1, d >= 1, all entries finite, feature names unique and sized d.
class Dataset {
 public:
  Dataset(Matrix features, Vector target, std::vector<std::string> feature_names,
          std::string target_name);

  const Matrix& features() const noexcept { return features_; }
  const Vector& target() const noexcept { return target_; }
  const std::vector<std::string>& feature_names() const noexcept {
    return feature_names_;
  }
  const std::string& target_name() const noexcept { return target_name_; }

  std::size_t rows() const noexcept { return static_cast<std::size_t>(target_.size()); }
  std::size_t cols() const noexcept { return static_cast<std::size_t>(features_.cols()); }

  /// Subset of rows in the given order.
  Dataset select_rows(const std::vector<std::size_t>& rows) const;

 private:
  Matrix features_;
  Vector target_;
  std::vector<std::string> feature_names_;
  std::string target_name_;
};

struct SplitSpec {
  double test_fraction = 0.3;
  std::uint64_t seed = 42;

  void validate() const;
};

struct LoadResult {
  Dataset dataset;
  std::size_t rows_read = 0;
  std::size_t rows_kept = 0;
};

/// X ~ N(0,1), e ~ N(0,1), y = (3X + e)^2. X and e come from separate
/// streams (0 and 1) of `seed`.
Dataset generate_synthetic(std::size_t n, std::uint64_t seed);

/// Reads a comma-separated file with a header row. Empty cells and the
/// tokens NA / NaN (any case) are missing. With drop_missing, rows holding a
/// missing or non-numeric cell are skipped; otherwise they raise ParseError.
LoadResult load_csv(const std::string& path, const std::string& target_column,
                    bool drop_missing);

/// Numeric table without a designated target, as read by prediction. The
/// raw header and data lines are kept so callers can echo them unchanged.
struct FeatureTable {
  std::vector<std::string> columns;
  Matrix values;
  std::string header_line;
  std::vector<std::string> lines;
};

/// Every cell must be numeric; missing tokens raise ParseError.
FeatureTable load_feature_csv(const std::string& path);

/// Writes features then target, full double precision.
void write_csv(const Dataset& ds, const std::string& path);

/// Seeded shuffle; the first ceil((1 - f) n) shuffled rows train.
std::pair<Dataset, Dataset> train_test_split(const Dataset& ds,
                                             const SplitSpec& spec);

/// Parses one CSV record. Double quotes may wrap a field; "" inside a quoted
/// field is a literal quote.
std::vector<std::string> split_csv_line(const std::string& line);

/// True for the recognised missing-value tokens.
bool is_missing_token(const std::string& cell);

}  // namespace qrt
