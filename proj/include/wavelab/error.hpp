#pragma once

#include <stdexcept>
#include <string>

namespace wavelab {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class OutOfRange : public Error {
public:
  using Error::Error;
};

class PreconditionError : public Error {
public:
  using Error::Error;
};

/// h_p fell below the stagnation guard (u < c violated or nearly so).
class StagnationError : public Error {
public:
  using Error::Error;
};

class NoRealSlopeError : public Error {
public:
  using Error::Error;
};

class NoBifurcationError : public Error {
public:
  using Error::Error;
};

class DegenerateCurveError : public Error {
public:
  using Error::Error;
};

class SchemaError : public Error {
public:
  using Error::Error;
};

/// Configuration problem; carries the 1-based line number when known (0 otherwise).
class ConfigError : public Error {
public:
  ConfigError(const std::string& what, int line = 0)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  int line() const noexcept { return line_; }

private:
  int line_;
};

} // namespace wavelab
