#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace h2mor {

enum class ErrorKind {
  InvalidArgument,
  SingularMatrix,
  NoConvergence,
  UnstableMatrix,
  ImproperTransferFunction,
  EvalAtPole,
  UnstableSystem,
  ShiftAtPole,
  RepeatedShift,
  SingularTm,
  MaxItersExceeded,
  ResolventSingular,
  NullspaceNotFound,
  AmbiguousNullspace,
  NegativeShiftCoordinates,
  GenerationFailed,
  SdpFailure,
  Parse,
  Io,
};

std::string_view to_string(ErrorKind kind);

// Every failure surfaced by the library is an Error carrying a kind, so
// callers can branch on it without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Same kind, message prefixed with the pipeline stage that raised it.
inline Error with_stage(const Error& e, std::string_view stage) {
  std::string msg = e.what();
  const auto prefix = std::string(to_string(e.kind())) + ": ";
  if (msg.rfind(prefix, 0) == 0) msg = msg.substr(prefix.size());
  return Error(e.kind(), "[" + std::string(stage) + "] " + msg);
}

}  // namespace h2mor
