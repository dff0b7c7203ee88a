#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kdrank {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A NaN or infinity appeared in a computed value.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. Carries the 1-based line number when known.
class FormatError : public Error {
 public:
  FormatError(const std::string& path, std::size_t line, const std::string& what)
      : Error(path + ":" + std::to_string(line) + ": " + what), line_(line) {}
  explicit FormatError(const std::string& what) : Error(what) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_ = 0;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace kdrank

#define KDRANK_CHECK(cond, ErrorType, msg) \
  do {                                     \
    if (!(cond)) throw ErrorType(msg);     \
  } while (false)
