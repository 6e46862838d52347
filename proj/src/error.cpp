#include "smpnn/error.hpp"

namespace smpnn {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::shape_mismatch: return "shape_mismatch";
    case ErrorCode::parse_error: return "parse_error";
    case ErrorCode::io_error: return "io_error";
    case ErrorCode::numerical_error: return "numerical_error";
    case ErrorCode::resource_limit: return "resource_limit";
  }
  return "unknown";
}

}  // namespace smpnn
