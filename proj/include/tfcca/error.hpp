#pragma once

#include <stdexcept>
#include <string>

namespace tfcca {

/// Failure category. The CLI maps these onto process exit codes.
enum class ErrorKind {
  kInvalidInput,  // exit code 2
  kNumerical,     // exit code 3
};

/// Structured error carrying a short machine-parsable reason tag
/// (e.g. "antipode", "grid_mismatch") alongside the human message.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string reason, const std::string& message)
      : std::runtime_error(message), kind_(kind), reason_(std::move(reason)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  ErrorKind kind_;
  std::string reason_;
};

[[noreturn]] inline void throw_invalid(const std::string& reason, const std::string& message) {
  throw Error(ErrorKind::kInvalidInput, reason, message);
}

[[noreturn]] inline void throw_numerical(const std::string& reason, const std::string& message) {
  throw Error(ErrorKind::kNumerical, reason, message);
}

}  // namespace tfcca
