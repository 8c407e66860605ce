#include "aitwin/error.hpp"

namespace aitwin {

std::string_view errcName(Errc code) noexcept {
  switch (code) {
    case Errc::NonMonotonicTime: return "NonMonotonicTime";
    case Errc::SchemaMismatch: return "SchemaMismatch";
    case Errc::IndexOutOfRange: return "IndexOutOfRange";
    case Errc::TimeOutOfRange: return "TimeOutOfRange";
    case Errc::EmptyStore: return "EmptyStore";
    case Errc::UnknownComponent: return "UnknownComponent";
    case Errc::UnknownMode: return "UnknownMode";
    case Errc::NotFitted: return "NotFitted";
    case Errc::EmptyWindow: return "EmptyWindow";
    case Errc::NonMonotonicWindow: return "NonMonotonicWindow";
    case Errc::InvalidHorizon: return "InvalidHorizon";
    case Errc::IncompleteVector: return "IncompleteVector";
    case Errc::WindowTooShort: return "WindowTooShort";
    case Errc::EmptyHistory: return "EmptyHistory";
    case Errc::NotComputable: return "NotComputable";
    case Errc::ZeroCoefficientVector: return "ZeroCoefficientVector";
    case Errc::EmptyRegion: return "EmptyRegion";
    case Errc::DanglingReference: return "DanglingReference";
    case Errc::UnknownConcept: return "UnknownConcept";
    case Errc::UnknownProduct: return "UnknownProduct";
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::ContradictoryObservation: return "ContradictoryObservation";
    case Errc::SizeLimitExceeded: return "SizeLimitExceeded";
    case Errc::InputsUnavailable: return "InputsUnavailable";
    case Errc::NoPlanFound: return "NoPlanFound";
    case Errc::InvalidScenario: return "InvalidScenario";
    case Errc::ParseError: return "ParseError";
    case Errc::IoError: return "IoError";
    case Errc::EmptyInput: return "EmptyInput";
  }
  return "Unknown";
}

}  // namespace aitwin
