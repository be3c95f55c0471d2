#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ivsmm {

// Base class for every error raised by the library.
struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Linear solve on a singular or numerically singular matrix.
struct SingularMatrixError : Error {
  double condition;
  SingularMatrixError(const std::string& what, double cond)
      : Error(what), condition(cond) {}
};

// A residual-moment weight matrix is singular (e.g. a moment identically zero).
struct SingularWeightError : Error {
  int moment_index;
  SingularWeightError(const std::string& what, int index)
      : Error(what), moment_index(index) {}
};

// Logistic MLE diverged: a coefficient ran past the expit saturation range.
struct SeparationError : Error {
  using Error::Error;
};

struct RankDeficientError : Error {
  using Error::Error;
};

struct NonFiniteError : Error {
  using Error::Error;
};

// Exponent magnitude past the double range in a multiplicative residual.
struct OverflowError : Error {
  using Error::Error;
};

struct ColumnNotFoundError : Error {
  using Error::Error;
};

struct CsvParseError : Error {
  std::size_t line;  // 1-based line number in the file
  CsvParseError(const std::string& what, std::size_t line_number)
      : Error(what), line(line_number) {}
};

// Instrument carries no usable variation (single level, or E(X|Z) constant).
struct DegenerateInstrumentError : Error {
  using Error::Error;
};

// Adjacent instrument levels with a zero denominator increment.
struct DegenerateIncrementError : Error {
  int increment;
  DegenerateIncrementError(const std::string& what, int k)
      : Error(what), increment(k) {}
};

struct NotOverIdentifiedError : Error {
  using Error::Error;
};

// An (X, Z) cell required by the saturated association model is empty.
struct SaturationFailureError : Error {
  using Error::Error;
};

struct InvalidDesignError : Error {
  using Error::Error;
};

}  // namespace ivsmm
