#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace handleword {

enum class ErrorCode {
  OutOfRange,
  PatternMismatch,
  InvalidMarks,
  InvalidLiteral,
  UnboundVariable,
  NegativeCount,
  NonAffine,
  SyntaxError,
  NegativeLiteralExponent,
  DuplicateLoopVar,
  BudgetExceeded,
  LengthMismatch,
  Precondition,
  NotDerivable,
  NoThreshold,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::OutOfRange: return "OUT_OF_RANGE";
    case ErrorCode::PatternMismatch: return "PATTERN_MISMATCH";
    case ErrorCode::InvalidMarks: return "INVALID_MARKS";
    case ErrorCode::InvalidLiteral: return "INVALID_LITERAL";
    case ErrorCode::UnboundVariable: return "UNBOUND_VARIABLE";
    case ErrorCode::NegativeCount: return "NEGATIVE_COUNT";
    case ErrorCode::NonAffine: return "NON_AFFINE";
    case ErrorCode::SyntaxError: return "SYNTAX_ERROR";
    case ErrorCode::NegativeLiteralExponent: return "NEGATIVE_LITERAL_EXPONENT";
    case ErrorCode::DuplicateLoopVar: return "DUPLICATE_LOOP_VAR";
    case ErrorCode::BudgetExceeded: return "BUDGET_EXCEEDED";
    case ErrorCode::LengthMismatch: return "LENGTH_MISMATCH";
    case ErrorCode::Precondition: return "PRECONDITION";
    case ErrorCode::NotDerivable: return "NOT_DERIVABLE";
    case ErrorCode::NoThreshold: return "NO_THRESHOLD";
  }
  return "UNKNOWN";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace handleword
