#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace motionseg {

enum class ErrorCode {
  kPrecondition,
  kIo,
  kBadMagic,
  kTruncated,
  kNonFinite,
  kUnsupported,
  kDimensionMismatch,
  kNonPositiveDepth,
  kZeroPrediction,
  kDegenerateFlow,
  kEmptyCorner,
  kInitFailure,
  kConfig,
};

std::string_view to_string(ErrorCode code);

// True for errors caused by numerically degenerate input rather than by
// malformed files or arguments.
bool is_numerical(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool condition, ErrorCode code, const char* message) {
  if (!condition) throw Error(code, message);
}

}  // namespace motionseg
