#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pcqa {

/// Failure classes reported by the library. The CLI prints one diagnostic
/// line per class, so every thrown error carries exactly one of these.
enum class Errc {
  IoError,
  MissingColorProperty,
  MalformedHeader,
  TruncatedBody,
  UnsupportedFormat,
  EmptyCloud,
  EmptyResult,
  InvalidArgument,
  ShapeMismatch,
  InvalidAxis,
  NotScalar,
  IndexOutOfRange,
  LengthMismatch,
  TooFewContents,
  NonFiniteLoss,
  DegenerateInput,
  ConfigMismatch,
  InvalidConfig,
};

std::string_view errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace pcqa
