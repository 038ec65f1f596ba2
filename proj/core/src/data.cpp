#include "qrt/data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>

#include "qrt/error.hpp"
#include "qrt/random.hpp"

namespace qrt {

Dataset::Dataset(Matrix features, Vector target,
                 std::vector<std::string> feature_names, std::string target_name)
    : features_(std::move(features)),
      target_(std::move(target)),
      feature_names_(std::move(feature_names)),
      target_name_(std::move(target_name)) {
  if (target_.size() == 0 || features_.rows() == 0) {
    throw EmptyData("dataset has no rows");
  }
  if (features_.cols() == 0) {
    throw InvalidInput("dataset has no feature columns");
  }
  if (features_.rows() != target_.size()) {
    throw InvalidInput("dataset: feature rows and target length differ");
  }
  if (static_cast<Eigen::Index>(feature_names_.size()) != features_.cols()) {
    throw InvalidInput("dataset: feature name count does not match columns");
  }
  std::set<std::string> seen(feature_names_.begin(), feature_names_.end());
  if (seen.size() != feature_names_.size()) {
    throw InvalidInput("dataset: duplicate feature names");
  }
  if (!features_.allFinite() || !target_.allFinite()) {
    throw InvalidInput("dataset: non-finite values");
  }
}

Dataset Dataset::select_rows(const std::vector<std::size_t>& rows) const {
  Matrix x(static_cast<Eigen::Index>(rows.size()), features_.cols());
  Vector y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = static_cast<Eigen::Index>(rows[i]);
    if (src >= target_.size()) throw InvalidInput("select_rows: index out of range");
    x.row(static_cast<Eigen::Index>(i)) = features_.row(src);
    y[static_cast<Eigen::Index>(i)] = target_[src];
  }
  return Dataset(std::move(x), std::move(y), feature_names_, target_name_);
}

void SplitSpec::validate() const {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw InvalidInput("test_fraction must satisfy 0<f<1");
  }
}

Dataset generate_synthetic(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw InvalidInput("generate_synthetic: n must be >= 1");
  RandomStream x_stream(seed, 0);
  RandomStream e_stream(seed, 1);
  Matrix x(static_cast<Eigen::Index>(n), 1);
  Vector y(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) {
    const double xi = x_stream.normal();
    const double ei = e_stream.normal();
    const double v = 3.0 * xi + ei;
    x(i, 0) = xi;
    y[i] = v * v;
  }
  return Dataset(std::move(x), std::move(y), {"x"}, "y");
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cell.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cell.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cell));
      cell.clear();
    } else if (c != '\r') {
      cell.push_back(c);
    }
  }
  out.push_back(std::move(cell));
  return out;
}

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::optional<double> parse_number(const std::string& cell) {
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  if (begin != end && *begin == '+') ++begin;
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) return std::nullopt;
  return value;
}

}  // namespace

bool is_missing_token(const std::string& cell) {
  const std::string t = lower(trim(cell));
  return t.empty() || t == "na" || t == "nan";
}

LoadResult load_csv(const std::string& path, const std::string& target_column,
                    bool drop_missing) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");

  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      header = split_csv_line(line);
      break;
    }
  }
  if (header.empty()) throw SchemaError("'" + path + "' has no header row");
  for (auto& h : header) h = trim(h);

  const auto target_it = std::find(header.begin(), header.end(), target_column);
  if (target_it == header.end()) {
    throw SchemaError("'" + path + "' has no column named '" + target_column + "'");
  }
  const auto target_idx = static_cast<std::size_t>(target_it - header.begin());
  const std::size_t width = header.size();

  std::vector<std::string> names;
  for (std::size_t c = 0; c < width; ++c) {
    if (c != target_idx) names.push_back(header[c]);
  }

  std::vector<double> values;
  std::size_t read = 0;
  std::size_t kept = 0;
  std::vector<double> row(width);
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    ++read;
    const auto cells = split_csv_line(line);
    if (cells.size() != width) {
      throw ParseError("'" + path + "' line " + std::to_string(line_no) +
                           ": expected " + std::to_string(width) +
                           " cells, found " + std::to_string(cells.size()),
                       line_no, 0);
    }
    bool complete = true;
    for (std::size_t c = 0; c < width; ++c) {
      std::optional<double> v;
      if (!is_missing_token(cells[c])) v = parse_number(trim(cells[c]));
      if (!v) {
        if (drop_missing) {
          complete = false;
          break;
        }
        throw ParseError("'" + path + "' line " + std::to_string(line_no) +
                             " column " + std::to_string(c + 1) + " ('" +
                             header[c] + "'): missing or non-numeric value '" +
                             cells[c] + "'",
                         line_no, c + 1);
      }
      row[c] = *v;
    }
    if (!complete) continue;
    ++kept;
    for (std::size_t c = 0; c < width; ++c) {
      if (c != target_idx) values.push_back(row[c]);
    }
    values.push_back(row[target_idx]);
  }

  if (kept == 0) throw EmptyData("'" + path + "' has no complete data rows");
  const auto d = static_cast<Eigen::Index>(width - 1);
  Matrix x(static_cast<Eigen::Index>(kept), d);
  Vector y(static_cast<Eigen::Index>(kept));
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(kept); ++i) {
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = values[k++];
    y[i] = values[k++];
  }
  return LoadResult{Dataset(std::move(x), std::move(y), std::move(names), target_column),
                    read, kept};
}

FeatureTable load_feature_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");

  FeatureTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) break;
  }
  if (trim(line).empty()) throw SchemaError("'" + path + "' has no header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  table.header_line = line;
  table.columns = split_csv_line(line);
  for (auto& c : table.columns) c = trim(c);
  const std::size_t width = table.columns.size();

  std::vector<double> values;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    if (line.back() == '\r') line.pop_back();
    const auto cells = split_csv_line(line);
    if (cells.size() != width) {
      throw ParseError("'" + path + "' line " + std::to_string(line_no) + ": expected " +
                           std::to_string(width) + " cells, found " +
                           std::to_string(cells.size()),
                       line_no, 0);
    }
    for (std::size_t c = 0; c < width; ++c) {
      std::optional<double> v;
      if (!is_missing_token(cells[c])) v = parse_number(trim(cells[c]));
      if (!v) {
        throw ParseError("'" + path + "' line " + std::to_string(line_no) + " column " +
                             std::to_string(c + 1) + ": missing or non-numeric value '" +
                             cells[c] + "'",
                         line_no, c + 1);
      }
      values.push_back(*v);
    }
    table.lines.push_back(line);
  }
  if (table.lines.empty()) throw EmptyData("'" + path + "' has no data rows");

  const auto n = static_cast<Eigen::Index>(table.lines.size());
  const auto d = static_cast<Eigen::Index>(width);
  table.values.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) table.values(i, j) = values[static_cast<std::size_t>(i * d + j)];
  }
  return table;
}

void write_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  for (const auto& name : ds.feature_names()) out << name << ',';
  out << ds.target_name() << '\n';
  char buf[32];
  const Matrix& x = ds.features();
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", x(i, j));
      out << buf << ',';
    }
    std::snprintf(buf, sizeof buf, "%.17g", ds.target()[i]);
    out << buf << '\n';
  }
  if (!out) throw IoError("error writing '" + path + "'");
}

std::pair<Dataset, Dataset> train_test_split(const Dataset& ds,
                                             const SplitSpec& spec) {
  spec.validate();
  const std::size_t n = ds.rows();
  if (n < 2) throw InvalidInput("train_test_split: need at least 2 rows");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  RandomStream rng(spec.seed, 2);
  for (std::size_t i = n - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i + 1));
    std::swap(order[i], order[j]);
  }

  // The 1e-9 guard keeps products like 0.7 * 10 from rounding up a row.
  auto n_train = static_cast<std::size_t>(
      std::ceil((1.0 - spec.test_fraction) * static_cast<double>(n) - 1e-9));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);

  std::vector<std::size_t> train(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  return {ds.select_rows(train), ds.select_rows(test)};
}

}  // namespace qrt
