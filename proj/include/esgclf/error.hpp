#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace esgclf {

// Base for everything the library throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad user input: malformed files, unknown ids, violated preconditions.
// The CLI maps these to exit code 2.
class InputError : public Error {
 public:
  using Error::Error;
};

// A malformed record inside a line-oriented file.
class ParseError : public InputError {
 public:
  ParseError(const std::string& what, std::size_t line, const std::string& file = {})
      : InputError((file.empty() ? "line " : file + ":") + std::to_string(line) + ": " + what),
        detail_(what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::string detail_;
  std::size_t line_;
};

// Numerical breakdown during training (NaN/Inf loss).
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace esgclf
