#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace noisyrag {

enum class ErrorKind {
  kInvalidInput,
  kValidation,
  kSchema,
  kTableValidation,
  kConfig,
  kTransport,
  kIo,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Base exception for every error raised by the library. The kind decides
/// how the CLI maps it onto an exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  /// Validation-style failures are the caller's fault (exit code 1); the rest
  /// are runtime failures (exit code 2).
  bool is_validation() const noexcept {
    return kind_ != ErrorKind::kTransport && kind_ != ErrorKind::kIo;
  }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace noisyrag
