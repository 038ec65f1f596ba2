#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "qrt/cli/app.hpp"
#include "qrt/cli/manifest.hpp"
#include "qrt/cli/status.hpp"
#include "qrt/error.hpp"
#include "qrt/tree.hpp"

namespace fs = std::filesystem;
using qrt::cli::read_text_file;

namespace {

const fs::path kData = QRT_TEST_DATA_DIR;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome qrt_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "qrt");
  std::ostringstream out;
  std::ostringstream err;
  const int code = qrt::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("qrt_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::set<std::string> listing(const fs::path& dir) {
  std::set<std::string> names;
  for (const auto& e : fs::directory_iterator(dir)) names.insert(e.path().filename().string());
  return names;
}

void write_file(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

}  // namespace

TEST_CASE("train writes a schema-valid model deterministically") {
  const auto dir = scratch("train");
  const std::vector<std::string> cmd{"train",   "--synthetic", "500",   "--seed",
                                     "42",      "--quantile",  "0.5",   "--max-depth",
                                     "2",       "--out-dir",   dir.string(), "--out",
                                     "model.json"};
  const auto first = qrt_cli(cmd);
  REQUIRE(first.code == 0);
  const std::string json = read_text_file(dir / "model.json");
  const auto tree = qrt::import_tree(json);
  CHECK(tree.depth() <= 2);
  CHECK(tree.config().quantile.value() == 0.5);
  CHECK(json.find("\"schema_version\": 1") != std::string::npos);

  const std::string manifest = read_text_file(dir / "model.manifest.txt");
  CHECK(manifest.find("dataset.rows=500\n") != std::string::npos);
  CHECK(manifest.find("seed.data=42\n") != std::string::npos);
  CHECK(manifest.find("output.model.json.sha256=" + qrt::cli::sha256_hex(json)) !=
        std::string::npos);

  REQUIRE(qrt_cli(cmd).code == 0);
  CHECK(read_text_file(dir / "model.json") == json);
  CHECK(listing(dir) == std::set<std::string>{"model.json", "model.manifest.txt"});
}

TEST_CASE("argument errors exit 2") {
  const auto bad_q = qrt_cli({"train", "--synthetic", "50", "--quantile", "1.5"});
  CHECK(bad_q.code == 2);
  CHECK(bad_q.err.find("0<r<1") != std::string::npos);

  CHECK(qrt_cli({}).code == 2);
  CHECK(qrt_cli({"fly"}).code == 2);
  CHECK(qrt_cli({"train", "--synthetic", "50", "--bogus", "1"}).code == 2);
  CHECK(qrt_cli({"train"}).code == 2);
  CHECK(qrt_cli({"train", "--synthetic", "5", "--data", "x.csv", "--target", "y"}).code == 2);
  CHECK(qrt_cli({"train", "--synthetic", "50", "--max-depth", "-1"}).code == 2);
  CHECK(qrt_cli({"train", "--synthetic", "50", "--thresholds", "0"}).code == 2);
  CHECK(qrt_cli({"predict", "--input", "x.csv"}).code == 2);
  CHECK(qrt_cli({"export", "--model", (kData / "golden_tree.json").string(), "--format", "svg"})
            .code == 2);
  CHECK(qrt_cli({"experiment-synthetic", "--test-fraction", "1.0"}).code == 2);
  CHECK(qrt_cli({"--help"}).code == 0);
  CHECK(qrt_cli({"--version"}).code == 0);
}

TEST_CASE("data errors exit 3") {
  const auto dir = scratch("data_errors");
  const auto out_dir = dir.string();
  CHECK(qrt_cli({"train", "--data", (dir / "absent.csv").string(), "--target", "y", "--out-dir",
                 out_dir})
            .code == 3);
  CHECK(qrt_cli({"train", "--data", (kData / "missing3.csv").string(), "--target", "nope",
                 "--out-dir", out_dir})
            .code == 3);

  const auto model = (kData / "golden_tree.json").string();
  write_file(dir / "two.csv", "x,z\n1,2\n");
  CHECK(qrt_cli({"predict", "--model", model, "--input", (dir / "two.csv").string(),
                 "--out-dir", out_dir})
            .code == 3);
  write_file(dir / "renamed.csv", "z\n1\n");
  CHECK(qrt_cli({"predict", "--model", model, "--input", (dir / "renamed.csv").string(),
                 "--out-dir", out_dir})
            .code == 3);
  write_file(dir / "corrupt.json", "{\"schema_version\": 1,");
  CHECK(qrt_cli({"export", "--model", (dir / "corrupt.json").string()}).code == 3);

  std::string v2 = read_text_file(model);
  v2.replace(v2.find("\"schema_version\": 1"), 19, "\"schema_version\": 2");
  write_file(dir / "v2.json", v2);
  const auto future = qrt_cli({"export", "--model", (dir / "v2.json").string()});
  CHECK(future.code == 3);
  CHECK_FALSE(future.err.empty());
}

TEST_CASE("failures are classified by stage") {
  using qrt::cli::Failure;
  using qrt::cli::staged;
  try {
    staged(qrt::cli::kExitFit, []() -> int { throw qrt::InvalidInput("solver broke"); });
    FAIL("expected a failure");
  } catch (const Failure& f) {
    CHECK(f.code() == qrt::cli::kExitFit);
    CHECK(std::string(f.what()) == "solver broke");
  }
  // An already classified failure keeps its code.
  try {
    staged(qrt::cli::kExitFit,
           []() -> int { throw Failure(qrt::cli::kExitData, "bad rows"); });
  } catch (const Failure& f) {
    CHECK(f.code() == qrt::cli::kExitData);
  }
}

TEST_CASE("predict on a depth-0 model reproduces the fitted line") {
  const auto dir = scratch("predict_line");
  std::string csv = "x,y\n";
  for (int i = 0; i < 10; ++i) csv += std::to_string(i) + "," + std::to_string(2 + 3 * i) + "\n";
  write_file(dir / "line.csv", csv);
  REQUIRE(qrt_cli({"train", "--data", (dir / "line.csv").string(), "--target", "y",
                   "--max-depth", "0", "--out-dir", dir.string()})
              .code == 0);
  write_file(dir / "new.csv", "x\n-1\n0.5\n20\n");
  REQUIRE(qrt_cli({"predict", "--model", (dir / "model.json").string(), "--input",
                   (dir / "new.csv").string(), "--out-dir", dir.string()})
              .code == 0);

  std::istringstream lines(read_text_file(dir / "predictions.csv"));
  std::string line;
  std::getline(lines, line);
  CHECK(line == "x,prediction");
  for (const double x : {-1.0, 0.5, 20.0}) {
    REQUIRE(std::getline(lines, line));
    const double pred = std::stod(line.substr(line.find(',') + 1));
    CHECK(pred == doctest::Approx(2.0 + 3.0 * x).epsilon(1e-9));
  }
}

TEST_CASE("golden files") {
  const auto dir = scratch("golden");
  const auto model = (kData / "golden_tree.json").string();
  REQUIRE(qrt_cli({"predict", "--model", model, "--input", (kData / "predict_input.csv").string(),
                   "--out-dir", dir.string(), "--out", "pred.csv"})
              .code == 0);
  CHECK(read_text_file(dir / "pred.csv") == read_text_file(kData / "predict_expected.csv"));

  const auto dot = qrt_cli({"export", "--model", model, "--format", "dot"});
  REQUIRE(dot.code == 0);
  CHECK(dot.out == read_text_file(kData / "golden_tree.dot"));

  const auto json = qrt_cli({"export", "--model", model, "--format", "json"});
  CHECK(json.out == read_text_file(model));

  REQUIRE(qrt_cli({"export", "--model", model, "--format", "text", "--out-dir", dir.string(),
                   "--out", "tree.txt"})
              .code == 0);
  CHECK(read_text_file(dir / "tree.txt").rfind("split: x ≤ 0 (n=20)\n", 0) == 0);
}

TEST_CASE("text export of a single leaf is one line") {
  const auto dir = scratch("single_leaf");
  REQUIRE(qrt_cli({"train", "--synthetic", "40", "--max-depth", "0", "--out-dir", dir.string()})
              .code == 0);
  const auto text = qrt_cli({"export", "--model", (dir / "model.json").string(), "--format",
                             "text"});
  REQUIRE(text.code == 0);
  CHECK(text.out.rfind("leaf:", 0) == 0);
  CHECK(std::count(text.out.begin(), text.out.end(), '\n') == 1);
}

TEST_CASE("config files supply defaults that flags override") {
  const auto dir = scratch("config");
  write_file(dir / "run.ini", "# shared settings\nmax-depth = 0\nquantile=0.25\nsynthetic=60\n");
  REQUIRE(qrt_cli({"train", "--config", (dir / "run.ini").string(), "--out-dir", dir.string()})
              .code == 0);
  auto tree = qrt::import_tree(read_text_file(dir / "model.json"));
  CHECK(tree.depth() == 0);
  CHECK(tree.config().quantile.value() == 0.25);

  REQUIRE(qrt_cli({"train", "--config", (dir / "run.ini").string(), "--quantile", "0.75",
                   "--out-dir", dir.string()})
              .code == 0);
  tree = qrt::import_tree(read_text_file(dir / "model.json"));
  CHECK(tree.config().quantile.value() == 0.75);

  write_file(dir / "sections.ini", "[train]\nmax_depth=1\nsynthetic=60\n");
  REQUIRE(qrt_cli({"train", "--config", (dir / "sections.ini").string(), "--out-dir",
                   dir.string()})
              .code == 0);
  CHECK(qrt::import_tree(read_text_file(dir / "model.json")).depth() <= 1);

  write_file(dir / "bad.ini", "no-such-flag=3\n");
  CHECK(qrt_cli({"train", "--synthetic", "20", "--config", (dir / "bad.ini").string()}).code ==
        2);
  CHECK(qrt_cli({"train", "--synthetic", "20", "--config", (dir / "nope.ini").string()}).code ==
        2);
}

TEST_CASE("experiment-synthetic emits its files reproducibly") {
  const auto a = scratch("synth_a");
  const auto b = scratch("synth_b");
  const std::vector<std::string> base{"experiment-synthetic", "--n", "200", "--seed", "7",
                                      "--max-depth", "2"};
  auto cmd_a = base;
  cmd_a.insert(cmd_a.end(), {"--out-dir", a.string()});
  auto cmd_b = base;
  cmd_b.insert(cmd_b.end(), {"--out-dir", b.string()});
  REQUIRE(qrt_cli(cmd_a).code == 0);
  REQUIRE(qrt_cli(cmd_b).code == 0);

  const std::set<std::string> expected{"table1.csv", "sweep.csv", "sweep_parity.csv",
                                       "predictions.csv", "manifest.txt"};
  CHECK(listing(a) == expected);
  for (const auto& name : expected) {
    if (name == "manifest.txt") continue;
    CHECK(read_text_file(a / name) == read_text_file(b / name));
  }
  const auto table = read_text_file(a / "table1.csv");
  CHECK(table.rfind("model,mae,mse\nquantile_tree,", 0) == 0);
  CHECK(std::count(table.begin(), table.end(), '\n') == 5);
  const auto sweep = read_text_file(a / "sweep.csv");
  CHECK(std::count(sweep.begin(), sweep.end(), '\n') == 1 + 2 * 19);
  const auto preds = read_text_file(a / "predictions.csv");
  CHECK(std::count(preds.begin(), preds.end(), '\n') == 1 + 3 * 60);
}

TEST_CASE("experiment-boston row checks") {
  const auto dir = scratch("boston");
  const auto sample = qrt_cli({"experiment-boston", "--data",
                               (kData / "boston_sample.csv").string(), "--out-dir",
                               dir.string()});
  REQUIRE(sample.code == 0);
  CHECK(sample.out.find("rows: 20 read, 19 kept") != std::string::npos);
  CHECK(listing(dir) == std::set<std::string>{"sweep.csv", "sweep_parity.csv",
                                              "model_comparison.csv", "tree_q0.05.dot",
                                              "tree_q0.5.dot", "tree_q0.95.dot",
                                              "manifest.txt"});

  // A 506-row file must lose exactly 5 incomplete rows.
  std::istringstream full(read_text_file(kData / "boston_housing.csv"));
  std::string line;
  std::string complete;
  while (std::getline(full, line)) {
    std::size_t pos = 0;
    while ((pos = line.find("NA", pos)) != std::string::npos) line.replace(pos, 2, "6.5");
    complete += line + "\n";
  }
  write_file(dir / "complete.csv", complete);
  const auto wrong = qrt_cli({"experiment-boston", "--data", (dir / "complete.csv").string(),
                              "--out-dir", (dir / "out").string()});
  CHECK(wrong.code == 3);
  CHECK(wrong.err.find("501") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "out"));
}
