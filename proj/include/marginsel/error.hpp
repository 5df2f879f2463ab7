#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace marginsel {

enum class Errc {
  kInvalidArgument,
  kUnknownLabel,
  kParseError,
  kDuplicateId,
  kClassTooSmall,
  kEmptyDataset,
  kTransport,
  kTimeout,
  kAuthMissing,
  kMissingSlot,
  kNoTag,
  kEmptySet,
  kAmbiguous,
  kDimensionMismatch,
  kZeroNorm,
  kUnknownId,
  kMissingFrequency,
  kEmptySelection,
  kEmptyInput,
  kMissingClass,
  kEmptyLookup,
  kShapeMismatch,
  kNotSeparable,
  kTooLarge,
  kIo,
  kConfig,
};

std::string_view errc_name(Errc code) noexcept;

// Every failure surfaced by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message);

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

// True for failures that originate in the model backend (transport, timeout,
// missing credentials).
bool is_backend_error(Errc code) noexcept;

}  // namespace marginsel
