#include "meltmap/error.hpp"

namespace meltmap {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::contract_violation: return "contract_violation";
    case ErrorCode::domain_error: return "domain_error";
    case ErrorCode::schema_error: return "schema_error";
    case ErrorCode::parse_error: return "parse_error";
    case ErrorCode::validation_error: return "validation_error";
    case ErrorCode::not_found: return "not_found";
    case ErrorCode::io_error: return "io_error";
    case ErrorCode::too_large: return "too_large";
  }
  return "unknown";
}

}  // namespace meltmap
