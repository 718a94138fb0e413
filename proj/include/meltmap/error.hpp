#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace meltmap {

enum class ErrorCode {
  contract_violation,
  domain_error,
  schema_error,
  parse_error,
  validation_error,
  not_found,
  io_error,
  too_large,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries a machine-readable code so the
// CLI and HTTP frontends can map it to exit codes and status codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, const std::string& message) {
  if (!condition) fail(ErrorCode::contract_violation, message);
}

}  // namespace meltmap
