#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace drmp {

enum class ErrorKind {
  NegativeWeight,
  WeightSumNotOne,
  DuplicateSupportPoint,
  EmptySupport,
  CapTooSmall,
  BudgetExceeded,
  ShapeMismatch,
  SyntaxError,
  UnknownIdentifier,
  FutureNoiseReference,
  NonIntegerExponent,
  UnboundVariable,
  NumericalOverflow,
  DivisionByZero,
  InvalidProblem,
  InadmissiblePolicy,
  FitResidualExceeded,
  InnerSolveFailed,
  FixedPointDiverged,
  InadmissiblePerturbation,
  NodeCountMismatch,
  DocumentError,
};

std::string_view to_string(ErrorKind kind);

// All library failures are reported through this type; `kind()` is the
// machine-readable tag, `what()` carries the human context.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace drmp
