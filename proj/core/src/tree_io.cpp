#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>

#include "json.hpp"
#include "qrt/error.hpp"
#include "qrt/tree.hpp"

namespace qrt {

namespace {

using Json = nlohmann::ordered_json;

constexpr int kSchemaVersion = 1;
constexpr int kLabelDigits = 6;

}  // namespace

std::string format_significant(double value, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, value);
  return buf;
}

std::string format_linear_model(const LinearQuantileModel& model,
                                const std::vector<std::string>& names) {
  std::string out = format_significant(model.intercept, kLabelDigits);
  for (Eigen::Index k = 0; k < model.coefficients.size(); ++k) {
    const double c = model.coefficients[k];
    if (c == 0.0) continue;
    out += c < 0.0 ? " - " : " + ";
    out += format_significant(std::abs(c), kLabelDigits);
    out += '*';
    out += names.at(static_cast<std::size_t>(k));
  }
  return out;
}

ExportFormat parse_export_format(const std::string& name) {
  if (name == "dot") return ExportFormat::dot;
  if (name == "text") return ExportFormat::text;
  if (name == "json") return ExportFormat::json;
  throw InvalidInput("unknown export format '" + name + "' (expected dot, text or json)");
}

namespace {

std::string split_label(const QuantileRegressionTree& tree, const InternalNode& node) {
  return tree.feature_names()[node.feature] + " ≤ " +
         format_significant(node.threshold, kLabelDigits);
}

std::string escape_dot(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out;
}

std::string leaf_stats(const LeafNode& leaf) {
  return "n=" + std::to_string(leaf.sample_count) +
         ", loss=" + format_significant(leaf.model.train_loss, kLabelDigits);
}

void write_dot(const QuantileRegressionTree& tree, std::ostringstream& out) {
  out << "digraph QuantileRegressionTree {\n";
  out << "  node [shape=box, fontname=\"Helvetica\"];\n";
  const auto& nodes = tree.nodes();
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (const auto* in = std::get_if<InternalNode>(&nodes[i])) {
      out << "  n" << i << " [label=\"" << escape_dot(split_label(tree, *in)) << "\"];\n";
    } else {
      const auto& leaf = std::get<LeafNode>(nodes[i]);
      out << "  n" << i << " [label=\""
          << escape_dot(format_linear_model(leaf.model, tree.feature_names())) << "\\n"
          << escape_dot(leaf_stats(leaf)) << "\"];\n";
    }
  }
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (const auto* in = std::get_if<InternalNode>(&nodes[i])) {
      out << "  n" << i << " -> n" << in->left << " [label=\"yes\"];\n";
      out << "  n" << i << " -> n" << in->right << " [label=\"no\"];\n";
    }
  }
  out << "}\n";
}

void write_text(const QuantileRegressionTree& tree, std::size_t idx, int indent,
                std::ostringstream& out) {
  out << std::string(static_cast<std::size_t>(2 * indent), ' ');
  const auto& node = tree.nodes()[idx];
  if (const auto* in = std::get_if<InternalNode>(&node)) {
    out << "split: " << split_label(tree, *in) << " (n=" << in->sample_count << ")\n";
    write_text(tree, in->left, indent + 1, out);
    write_text(tree, in->right, indent + 1, out);
  } else {
    const auto& leaf = std::get<LeafNode>(node);
    out << "leaf: " << format_linear_model(leaf.model, tree.feature_names()) << ", "
        << leaf_stats(leaf) << '\n';
  }
}

Json model_to_json(const LinearQuantileModel& m) {
  Json coef = Json::array();
  for (Eigen::Index k = 0; k < m.coefficients.size(); ++k) coef.push_back(m.coefficients[k]);
  return Json{{"intercept", m.intercept},
              {"coefficients", std::move(coef)},
              {"quantile", m.quantile.value()},
              {"train_loss", m.train_loss}};
}

Json node_to_json(const QuantileRegressionTree& tree, std::size_t idx) {
  const auto& node = tree.nodes()[idx];
  if (const auto* in = std::get_if<InternalNode>(&node)) {
    return Json{{"type", "internal"},
                {"feature", in->feature},
                {"threshold", in->threshold},
                {"sample_count", in->sample_count},
                {"model", model_to_json(in->model)},
                {"left", node_to_json(tree, in->left)},
                {"right", node_to_json(tree, in->right)}};
  }
  const auto& leaf = std::get<LeafNode>(node);
  return Json{{"type", "leaf"},
              {"sample_count", leaf.sample_count},
              {"model", model_to_json(leaf.model)}};
}

Json config_to_json(const FitConfig& cfg) {
  return Json{{"quantile", cfg.quantile.value()},
              {"max_depth", cfg.max_depth},
              {"min_samples_split", cfg.min_samples_split.value_or(0)},
              {"min_samples_leaf", cfg.min_samples_leaf.value_or(0)},
              {"max_thresholds_per_feature", cfg.max_thresholds_per_feature},
              {"seed", cfg.seed},
              {"solver",
               {{"tolerance", cfg.solver.tolerance},
                {"max_iterations", cfg.solver.max_iterations},
                {"smoothing_start", cfg.solver.smoothing_start}}}};
}

// --- import -----------------------------------------------------------------

const Json& field(const Json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) throw SchemaError(where + ": expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(where + ": missing field '" + key + "'");
  return *it;
}

double number(const Json& obj, const char* key, const std::string& where) {
  const Json& v = field(obj, key, where);
  if (!v.is_number()) throw SchemaError(where + "." + key + ": expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw SchemaError(where + "." + key + ": not finite");
  return d;
}

std::size_t count(const Json& obj, const char* key, const std::string& where) {
  const Json& v = field(obj, key, where);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
    throw SchemaError(where + "." + key + ": expected a non-negative integer");
  }
  return v.get<std::size_t>();
}

LinearQuantileModel model_from_json(const Json& j, std::size_t d, const std::string& where) {
  LinearQuantileModel m;
  m.intercept = number(j, "intercept", where);
  const Json& coef = field(j, "coefficients", where);
  if (!coef.is_array() || coef.size() != d) {
    throw SchemaError(where + ".coefficients: expected an array of " + std::to_string(d) +
                      " numbers");
  }
  m.coefficients.resize(static_cast<Eigen::Index>(d));
  for (std::size_t k = 0; k < d; ++k) {
    if (!coef[k].is_number()) throw SchemaError(where + ".coefficients: expected numbers");
    m.coefficients[static_cast<Eigen::Index>(k)] = coef[k].get<double>();
  }
  try {
    m.quantile = QuantileLevel(number(j, "quantile", where));
  } catch (const InvalidInput& e) {
    throw SchemaError(where + ".quantile: " + e.what());
  }
  m.train_loss = number(j, "train_loss", where);
  return m;
}

void node_from_json(const Json& j, std::size_t d, const std::string& where,
                    std::vector<TreeNode>& out) {
  const Json& type = field(j, "type", where);
  const std::size_t idx = out.size();
  const std::size_t n = count(j, "sample_count", where);
  LinearQuantileModel model = model_from_json(field(j, "model", where), d, where + ".model");
  if (type == "leaf") {
    out.emplace_back(LeafNode{std::move(model), n});
    return;
  }
  if (type != "internal") throw SchemaError(where + ".type: expected 'leaf' or 'internal'");
  InternalNode in;
  in.feature = count(j, "feature", where);
  if (in.feature >= d) throw SchemaError(where + ".feature: index out of range");
  in.threshold = number(j, "threshold", where);
  in.sample_count = n;
  in.model = std::move(model);
  out.emplace_back(LeafNode{});
  in.left = out.size();
  node_from_json(field(j, "left", where), d, where + ".left", out);
  in.right = out.size();
  node_from_json(field(j, "right", where), d, where + ".right", out);
  out[idx] = std::move(in);
}

FitConfig config_from_json(const Json& j) {
  const std::string where = "config";
  FitConfig cfg;
  try {
    cfg.quantile = QuantileLevel(number(j, "quantile", where));
  } catch (const InvalidInput& e) {
    throw SchemaError(std::string("config.quantile: ") + e.what());
  }
  const Json& depth = field(j, "max_depth", where);
  if (!depth.is_number_integer()) throw SchemaError("config.max_depth: expected an integer");
  cfg.max_depth = depth.get<int>();
  cfg.min_samples_split = count(j, "min_samples_split", where);
  cfg.min_samples_leaf = count(j, "min_samples_leaf", where);
  cfg.max_thresholds_per_feature = count(j, "max_thresholds_per_feature", where);
  const Json& seed = field(j, "seed", where);
  if (!seed.is_number_unsigned() && !seed.is_number_integer()) {
    throw SchemaError("config.seed: expected an integer");
  }
  cfg.seed = seed.get<std::uint64_t>();
  const Json& solver = field(j, "solver", where);
  cfg.solver.tolerance = number(solver, "tolerance", "config.solver");
  const Json& iters = field(solver, "max_iterations", "config.solver");
  if (!iters.is_number_integer()) {
    throw SchemaError("config.solver.max_iterations: expected an integer");
  }
  cfg.solver.max_iterations = iters.get<int>();
  cfg.solver.smoothing_start = number(solver, "smoothing_start", "config.solver");
  try {
    cfg.validate();
  } catch (const InvalidInput& e) {
    throw SchemaError(std::string("config: ") + e.what());
  }
  return cfg;
}

std::pair<std::size_t, std::size_t> line_and_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t column = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return {line, column};
}

}  // namespace

std::string export_tree(const QuantileRegressionTree& tree, ExportFormat format) {
  std::ostringstream out;
  switch (format) {
    case ExportFormat::dot:
      write_dot(tree, out);
      break;
    case ExportFormat::text:
      write_text(tree, 0, 0, out);
      break;
    case ExportFormat::json: {
      Json doc{{"schema_version", kSchemaVersion},
               {"kind", "quantile_regression_tree"},
               {"feature_names", tree.feature_names()},
               {"config", config_to_json(tree.config())},
               {"train_loss", tree.train_loss()},
               {"root", node_to_json(tree, 0)}};
      out << doc.dump(2) << '\n';
      break;
    }
  }
  return out.str();
}

QuantileRegressionTree import_tree(const std::string& serialized) {
  Json doc;
  try {
    doc = Json::parse(serialized);
  } catch (const Json::parse_error& e) {
    const auto [line, column] = line_and_column(serialized, e.byte == 0 ? 0 : e.byte - 1);
    throw ParseError("tree JSON is malformed at line " + std::to_string(line) +
                         ", column " + std::to_string(column) + ": " + e.what(),
                     line, column);
  }
  const Json& version = field(doc, "schema_version", "document");
  if (!version.is_number_integer() || version.get<long long>() != kSchemaVersion) {
    throw UnsupportedVersion("unsupported tree schema_version " + version.dump() +
                             " (this build reads version " +
                             std::to_string(kSchemaVersion) + ")");
  }
  const Json& kind = field(doc, "kind", "document");
  if (kind != "quantile_regression_tree") {
    throw SchemaError("document.kind: expected 'quantile_regression_tree'");
  }
  const Json& names_json = field(doc, "feature_names", "document");
  if (!names_json.is_array()) throw SchemaError("document.feature_names: expected an array");
  std::vector<std::string> names;
  for (const auto& n : names_json) {
    if (!n.is_string()) throw SchemaError("document.feature_names: expected strings");
    names.push_back(n.get<std::string>());
  }
  FitConfig cfg = config_from_json(field(doc, "config", "document"));
  const double train_loss = number(doc, "train_loss", "document");
  std::vector<TreeNode> nodes;
  node_from_json(field(doc, "root", "document"), names.size(), "root", nodes);
  try {
    return QuantileRegressionTree(std::move(nodes), std::move(cfg), std::move(names),
                                  train_loss);
  } catch (const InvalidInput& e) {
    throw SchemaError(e.what());
  }
}

}  // namespace qrt
