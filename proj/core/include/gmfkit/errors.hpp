#pragma once

#include <stdexcept>
#include <string>

namespace gmfkit {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mean/support domain of a family or link.
class DomainError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration or over-parameterized request.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A linear system (design cross-product, IRLS normal equations) could not
/// be factorized.
class SingularSystemError : public Error {
 public:
  using Error::Error;
};

/// A metric whose baseline denominator vanishes.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. Carries 1-based line and column when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, long line = 0, long column = 0)
      : Error(what), line_(line), column_(column) {}
  long line() const { return line_; }
  long column() const { return column_; }

 private:
  long line_;
  long column_;
};

}  // namespace gmfkit
