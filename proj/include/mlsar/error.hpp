#pragma once

#include <stdexcept>
#include <string>

namespace mlsar {

/// Failure category; the CLI maps each category onto a process exit code.
enum class ErrorKind { validation, numerical, io };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// A parameter or input lies outside its admissible set.
class ConstraintError : public Error {
 public:
  explicit ConstraintError(const std::string& what)
      : Error(ErrorKind::validation, what) {}
};

/// Inconsistent or invalid configuration.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what)
      : Error(ErrorKind::validation, what) {}
};

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what)
      : Error(ErrorKind::validation, what) {}
};

/// A relational matrix A_t is singular; carries the offending period.
class SingularityError : public Error {
 public:
  SingularityError(const std::string& what, int period)
      : Error(ErrorKind::numerical, what), period_(period) {}
  int period() const noexcept { return period_; }

 private:
  int period_;
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what)
      : Error(ErrorKind::numerical, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

}  // namespace mlsar
