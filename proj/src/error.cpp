#include "marginsel/error.hpp"

namespace marginsel {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::kInvalidArgument: return "InvalidArgument";
    case Errc::kUnknownLabel: return "UnknownLabel";
    case Errc::kParseError: return "ParseError";
    case Errc::kDuplicateId: return "DuplicateId";
    case Errc::kClassTooSmall: return "ClassTooSmall";
    case Errc::kEmptyDataset: return "EmptyDataset";
    case Errc::kTransport: return "Transport";
    case Errc::kTimeout: return "Timeout";
    case Errc::kAuthMissing: return "AuthMissing";
    case Errc::kMissingSlot: return "MissingSlot";
    case Errc::kNoTag: return "NoTag";
    case Errc::kEmptySet: return "EmptySet";
    case Errc::kAmbiguous: return "Ambiguous";
    case Errc::kDimensionMismatch: return "DimensionMismatch";
    case Errc::kZeroNorm: return "ZeroNorm";
    case Errc::kUnknownId: return "UnknownId";
    case Errc::kMissingFrequency: return "MissingFrequency";
    case Errc::kEmptySelection: return "EmptySelection";
    case Errc::kEmptyInput: return "EmptyInput";
    case Errc::kMissingClass: return "MissingClass";
    case Errc::kEmptyLookup: return "EmptyLookup";
    case Errc::kShapeMismatch: return "ShapeMismatch";
    case Errc::kNotSeparable: return "NotSeparable";
    case Errc::kTooLarge: return "TooLarge";
    case Errc::kIo: return "Io";
    case Errc::kConfig: return "Config";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& message)
    : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

bool is_backend_error(Errc code) noexcept {
  return code == Errc::kTransport || code == Errc::kTimeout || code == Errc::kAuthMissing;
}

}  // namespace marginsel
