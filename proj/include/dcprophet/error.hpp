#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dcprophet {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input row. `line()` is 1-based and counts the header.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class DimensionMismatch : public Error {
 public:
  DimensionMismatch(std::size_t expected, std::size_t actual)
      : Error("dimension mismatch: expected " + std::to_string(expected) +
              ", got " + std::to_string(actual)) {}
};

class ZeroVarianceError : public Error {
 public:
  ZeroVarianceError() : Error("series has zero variance") {}
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

class InfeasibleNuError : public Error {
 public:
  using Error::Error;
};

/// SMO did not reach the requested tolerance.
class ConvergenceError : public Error {
 public:
  ConvergenceError(double violation, std::size_t iterations)
      : Error("solver did not converge after " + std::to_string(iterations) +
              " iterations (KKT violation " + std::to_string(violation) + ")"),
        violation_(violation) {}
  double violation() const noexcept { return violation_; }

 private:
  double violation_;
};

class DegenerateTrainingError : public Error {
 public:
  using Error::Error;
};

class StratificationError : public Error {
 public:
  using Error::Error;
};

class UndefinedAucError : public Error {
 public:
  UndefinedAucError() : Error("AUC undefined: labels contain a single class") {}
};

class GenerationError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace dcprophet
