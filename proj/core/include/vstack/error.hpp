#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace vstack {

enum class ErrorKind {
  InvalidProbability,
  Normalization,
  Range,
  Shape,
  EmptyInput,
  Numeric,
  DegenerateSplit,
  Config,
  IncompleteTable,
  Mode,
  EmptyMeta,
  Stratification,
  DuplicateRow,
  Parse,
  Schema,
  Io,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Every failure raised by the library. `kind()` lets callers (the CLI in
/// particular) map failures onto exit codes without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Raised when a probability vector does not sum to one. Carries the sum.
class NormalizationError : public Error {
 public:
  NormalizationError(double observed_sum, const std::string& what)
      : Error(ErrorKind::Normalization, what), observed_sum_(observed_sum) {}

  double observed_sum() const noexcept { return observed_sum_; }

 private:
  double observed_sum_;
};

/// Parse/schema failure with a 1-based line locus (0 when not line-bound).
class ParseError : public Error {
 public:
  ParseError(ErrorKind kind, std::size_t line, const std::string& what)
      : Error(kind, what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

}  // namespace vstack
