#include "qrt/cli/manifest.hpp"

#include <openssl/evp.h>

#include <array>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <system_error>

#include "qrt/error.hpp"

namespace qrt::cli {

namespace fs = std::filesystem;

void RunManifest::set(std::string key, std::string value) {
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  entries_.emplace_back(std::move(key), std::move(value));
}

void RunManifest::set_config(const FitConfig& cfg) {
  set("config.quantile", shortest(cfg.quantile.value()));
  set("config.max_depth", std::to_string(cfg.max_depth));
  set("config.min_samples_split", std::to_string(cfg.min_samples_split.value_or(0)));
  set("config.min_samples_leaf", std::to_string(cfg.min_samples_leaf.value_or(0)));
  set("config.max_thresholds_per_feature", std::to_string(cfg.max_thresholds_per_feature));
  set("config.solver.tolerance", shortest(cfg.solver.tolerance));
  set("config.solver.max_iterations", std::to_string(cfg.solver.max_iterations));
  set("config.solver.smoothing_start", shortest(cfg.solver.smoothing_start));
  set("seed.fit", std::to_string(cfg.seed));
}

void RunManifest::set_dataset(const std::string& prefix, const Dataset& ds) {
  set(prefix + ".rows", std::to_string(ds.rows()));
  set(prefix + ".cols", std::to_string(ds.cols()));
  set(prefix + ".target", ds.target_name());
  set(prefix + ".sha256", dataset_fingerprint(ds));
}

void RunManifest::set_output(const std::string& name, std::string_view contents) {
  set("output." + name + ".sha256", sha256_hex(contents));
}

void RunManifest::set_duration(double seconds) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", seconds);
  set("duration_seconds", buf);
}

std::string RunManifest::render() const {
  std::string out;
  for (const auto& [k, v] : entries_) out += k + "=" + v + "\n";
  return out;
}

namespace {

struct DigestDeleter {
  void operator()(EVP_MD_CTX* ctx) const { EVP_MD_CTX_free(ctx); }
};

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) {
      throw Error("sha256: digest initialisation failed");
    }
  }
  void update(const void* data, std::size_t size) {
    if (EVP_DigestUpdate(ctx_.get(), data, size) != 1) throw Error("sha256: update failed");
  }
  void update(std::string_view s) { update(s.data(), s.size()); }
  std::string hex() {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx_.get(), md.data(), &len) != 1) throw Error("sha256: final failed");
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
      out += kHex[md[i] >> 4];
      out += kHex[md[i] & 0xF];
    }
    return out;
  }

 private:
  std::unique_ptr<EVP_MD_CTX, DigestDeleter> ctx_;
};

void update_u64(Sha256& h, std::uint64_t v) {
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(v >> (8 * i));
  h.update(bytes, sizeof bytes);
}

void update_double(Sha256& h, double v) {
  std::uint64_t bits = 0;
  std::memcpy(&bits, &v, sizeof bits);
  update_u64(h, bits);
}

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  Sha256 h;
  h.update(bytes);
  return h.hex();
}

std::string dataset_fingerprint(const Dataset& ds) {
  Sha256 h;
  update_u64(h, ds.rows());
  update_u64(h, ds.cols());
  for (const auto& name : ds.feature_names()) {
    h.update(name);
    h.update("\n", 1);
  }
  h.update(ds.target_name());
  h.update("\n", 1);
  const Matrix& x = ds.features();
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) update_double(h, x(i, j));
    update_double(h, ds.target()[i]);
  }
  return h.hex();
}

std::string shortest(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return ec == std::errc() ? std::string(buf, ptr) : std::string("nan");
}

std::string join_command_line(const std::vector<std::string>& args) {
  std::string out;
  for (const auto& a : args) {
    if (!out.empty()) out += ' ';
    if (a.empty() || a.find_first_of(" \t\"'") != std::string::npos) {
      out += '\'';
      for (char c : a) {
        if (c == '\'') out += "'\\''";
        else out += c;
      }
      out += '\'';
    } else {
      out += a;
    }
  }
  return out;
}

void write_atomic(const fs::path& path, std::string_view contents) {
  std::error_code ec;
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path(), ec);
    if (ec) {
      throw IoError("cannot create directory '" + path.parent_path().string() + "': " +
                    ec.message());
    }
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + tmp.string() + "'");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw IoError("error writing '" + tmp.string() + "'");
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot move output into place at '" + path.string() + "'");
  }
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error reading '" + path.string() + "'");
  return ss.str();
}

}  // namespace qrt::cli
