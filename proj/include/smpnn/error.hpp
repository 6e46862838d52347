#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace smpnn {

/// Failure categories. The CLI maps each one to a distinct exit code.
enum class ErrorCode {
  invalid_argument,
  shape_mismatch,
  parse_error,
  io_error,
  numerical_error,
  resource_limit,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) throw Error(code, message);
}

}  // namespace smpnn
