#include "drmp/errors.hpp"

namespace drmp {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NegativeWeight: return "NegativeWeight";
    case ErrorKind::WeightSumNotOne: return "WeightSumNotOne";
    case ErrorKind::DuplicateSupportPoint: return "DuplicateSupportPoint";
    case ErrorKind::EmptySupport: return "EmptySupport";
    case ErrorKind::CapTooSmall: return "CapTooSmall";
    case ErrorKind::BudgetExceeded: return "BudgetExceeded";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::SyntaxError: return "SyntaxError";
    case ErrorKind::UnknownIdentifier: return "UnknownIdentifier";
    case ErrorKind::FutureNoiseReference: return "FutureNoiseReference";
    case ErrorKind::NonIntegerExponent: return "NonIntegerExponent";
    case ErrorKind::UnboundVariable: return "UnboundVariable";
    case ErrorKind::NumericalOverflow: return "NumericalOverflow";
    case ErrorKind::DivisionByZero: return "DivisionByZero";
    case ErrorKind::InvalidProblem: return "InvalidProblem";
    case ErrorKind::InadmissiblePolicy: return "InadmissiblePolicy";
    case ErrorKind::FitResidualExceeded: return "FitResidualExceeded";
    case ErrorKind::InnerSolveFailed: return "InnerSolveFailed";
    case ErrorKind::FixedPointDiverged: return "FixedPointDiverged";
    case ErrorKind::InadmissiblePerturbation: return "InadmissiblePerturbation";
    case ErrorKind::NodeCountMismatch: return "NodeCountMismatch";
    case ErrorKind::DocumentError: return "DocumentError";
  }
  return "Unknown";
}

}  // namespace drmp
