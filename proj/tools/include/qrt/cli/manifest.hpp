#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qrt/data.hpp"
#include "qrt/tree.hpp"

namespace qrt::cli {

/// Ordered key=value record written next to every training or experiment
/// output. Everything except `duration_seconds` is a function of the inputs.
class RunManifest {
 public:
  void set(std::string key, std::string value);
  void set_config(const FitConfig& resolved);
  void set_dataset(const std::string& prefix, const Dataset& ds);
  void set_output(const std::string& name, std::string_view contents);
  void set_duration(double seconds);

  const std::vector<std::pair<std::string, std::string>>& entries() const noexcept {
    return entries_;
  }
  std::string render() const;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

std::string sha256_hex(std::string_view bytes);

/// Hash over shape, names and the IEEE-754 bit patterns of every value.
std::string dataset_fingerprint(const Dataset& ds);

/// Shortest decimal text that reads back to the same double.
std::string shortest(double value);

std::string join_command_line(const std::vector<std::string>& args);

/// Writes through a sibling temp file and a rename, creating parent
/// directories as needed. Throws IoError.
void write_atomic(const std::filesystem::path& path, std::string_view contents);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace qrt::cli
