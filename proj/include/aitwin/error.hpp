#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace aitwin {

enum class Errc {
  NonMonotonicTime,
  SchemaMismatch,
  IndexOutOfRange,
  TimeOutOfRange,
  EmptyStore,
  UnknownComponent,
  UnknownMode,
  NotFitted,
  EmptyWindow,
  NonMonotonicWindow,
  InvalidHorizon,
  IncompleteVector,
  WindowTooShort,
  EmptyHistory,
  NotComputable,
  ZeroCoefficientVector,
  EmptyRegion,
  DanglingReference,
  UnknownConcept,
  UnknownProduct,
  DuplicateId,
  ContradictoryObservation,
  SizeLimitExceeded,
  InputsUnavailable,
  NoPlanFound,
  InvalidScenario,
  ParseError,
  IoError,
  EmptyInput,
};

std::string_view errcName(Errc code) noexcept;

/// Every failure raised by the library carries one of the codes above so
/// callers (and the CLI exit-code mapping) can branch without string matching.
class TwinError : public std::runtime_error {
 public:
  TwinError(Errc code, const std::string& what)
      : std::runtime_error(std::string(errcName(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

/// ParseError that remembers the 1-based source line (0 when unknown).
class ParseError : public TwinError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : TwinError(Errc::ParseError, "line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace aitwin
