#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dmap {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input record or stream. `line` is 1-based, 0 when not tied to a line.
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what, std::size_t line = 0)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Out-of-range numeric parameter (temperature, k, pi, lambda, bin count...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

// The observed token has zero mass under the evaluation distribution.
class ImpossibleToken : public Error {
 public:
  using Error::Error;
};

// Nothing left to analyse after exclusions.
class EmptyInputError : public Error {
 public:
  using Error::Error;
};

}  // namespace dmap
