#pragma once

#include <stdexcept>
#include <string>

namespace radpose {

/// Failure categories. The CLI maps these onto process exit codes.
enum class ErrorKind {
  kInvalidArgument,
  kShapeMismatch,
  kBadMagic,
  kUnsupportedVersion,
  kDimOverflow,
  kTruncatedPayload,
  kFileNotFound,
  kIo,
  kConfig,
  kNumerical,
  kUnsupported,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace radpose
