#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace qrt::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 2,
  kExitData = 3,
  kExitFit = 4,
};

/// Error already classified into an exit code.
class Failure : public std::runtime_error {
 public:
  Failure(ExitCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

/// Runs `step`, reclassifying any unclassified exception as `code`.
template <class F>
decltype(auto) staged(ExitCode code, F&& step) {
  try {
    return std::forward<F>(step)();
  } catch (const Failure&) {
    throw;
  } catch (const std::exception& e) {
    throw Failure(code, e.what());
  }
}

}  // namespace qrt::cli
