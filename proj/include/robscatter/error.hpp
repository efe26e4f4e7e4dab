#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace robscatter {

enum class ErrorKind {
  InvalidInput,
  SingularMatrix,
  DegenerateScale,
  DegenerateObservation,
  DegenerateSubset,
  ConvergenceFailure,
  Unsupported,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidInput: return "InvalidInput";
    case ErrorKind::SingularMatrix: return "SingularMatrix";
    case ErrorKind::DegenerateScale: return "DegenerateScale";
    case ErrorKind::DegenerateObservation: return "DegenerateObservation";
    case ErrorKind::DegenerateSubset: return "DegenerateSubset";
    case ErrorKind::ConvergenceFailure: return "ConvergenceFailure";
    case ErrorKind::Unsupported: return "Unsupported";
  }
  return "Unknown";
}

/// Base exception for every failure raised by the library.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool condition, const std::string& what) {
  if (!condition) fail(ErrorKind::InvalidInput, what);
}

}  // namespace robscatter
