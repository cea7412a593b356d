#pragma once

#include <stdexcept>
#include <string>

namespace hvscale {

// Base for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Batch or core count outside a profile's limits.
class OutOfRange : public Error {
 public:
  using Error::Error;
};

// Profiling samples do not determine all four latency coefficients.
class DegenerateSamples : public Error {
 public:
  using Error::Error;
};

class GridTooLarge : public Error {
 public:
  using Error::Error;
};

class NonMonotonicTime : public Error {
 public:
  using Error::Error;
};

class NoHistory : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line == 0 ? what : what + " (line " + std::to_string(line) + ")"), line_(line) {}
  explicit ParseError(const std::string& what) : ParseError(what, 0) {}

  // 1-based line of the offending input, 0 when not line-oriented.
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// A trace skips one or more seconds.
class GapError : public Error {
 public:
  explicit GapError(long missing_second)
      : Error("trace is missing second " + std::to_string(missing_second)),
        missing_second_(missing_second) {}

  long missing_second() const noexcept { return missing_second_; }

 private:
  long missing_second_;
};

}  // namespace hvscale
