#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qrt {

// Base of every error raised by the library. Callers that only care about
// "did it work" catch this; the CLI maps the subclasses onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Precondition violations: non-finite values, dimension mismatches, bad
// configuration values.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

class EmptyData : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// The input is well formed but does not have the expected columns/fields.
class SchemaError : public Error {
 public:
  using Error::Error;
};

// Malformed text. `line` and `column` are 1-based; 0 means unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column)
      : Error(what), line_(line), column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

class UnsupportedVersion : public Error {
 public:
  using Error::Error;
};

}  // namespace qrt
