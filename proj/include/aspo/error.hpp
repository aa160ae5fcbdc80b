#pragma once

#include <stdexcept>
#include <string>

namespace aspo {

enum class ErrorKind {
  InvalidConfiguration,
  DimensionMismatch,
  Parse,
  UnknownParameter,
  TypeMismatch,
  Domain,
  NumericalFailure,
  NoFeasibleCandidate,
  InfeasibleSpace,
  EmptyDatabase,
  InsufficientRecords,
  UnknownBenchmark,
  Protocol,
  Tool,
  UndefinedMetric,
  HashMismatch,
  Io,
  InvalidArgument,
};

const char* toString(ErrorKind kind);

/// Base exception for every failure raised by the library. The kind is what
/// callers branch on; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Parse failure with a 1-based source location. Line 0 means the location is
/// a JSON pointer path carried in the message instead.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column)
      : Error(ErrorKind::Parse, what), line_(line), column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

}  // namespace aspo
