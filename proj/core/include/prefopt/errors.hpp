#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace prefopt {

enum class ErrorCode {
  kInvalidWeights,
  kEmptyInput,
  kMissingScores,
  kParse,
  kValidation,
  kIndex,
  kInvalidNoise,
  kInvalidPair,
  kInvalidConfig,
  kInvalidInput,
  kDiverged,
  kIo,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries a code so callers (notably the
// CLI) can map it to an exit status without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace prefopt
