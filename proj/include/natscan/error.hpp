#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace natscan {

enum class ErrorCode {
  InvalidConfig,
  SpoofUnsupported,
  CapabilityMissing,
  InsufficientData,
  MissingSamples,
  NoResponse,
  NoisySeriesAbort,
  RateBudgetExceeded,
  TraceDivergence,
};

std::string_view to_string(ErrorCode code);

/// The single exception type thrown by scanner operations.
class ScanError : public std::runtime_error {
public:
  ScanError(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

} // namespace natscan
