#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace swapmix {

enum class ErrorKind {
  MalformedInput,
  InvariantViolation,
  DanglingDependency,
  DimensionMismatch,
  BadMagic,
  TruncatedFile,
  VersionUnsupported,
  ImageMismatch,
  UnknownLabel,
  IndexOutOfRange,
  EmptyClass,
  UnsupportedOperation,
  AmbiguousSelection,
  IncompleteLog,
  InvalidArgument,
  IoError,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedInput: return "MalformedInput";
    case ErrorKind::InvariantViolation: return "InvariantViolation";
    case ErrorKind::DanglingDependency: return "DanglingDependency";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::BadMagic: return "BadMagic";
    case ErrorKind::TruncatedFile: return "TruncatedFile";
    case ErrorKind::VersionUnsupported: return "VersionUnsupported";
    case ErrorKind::ImageMismatch: return "ImageMismatch";
    case ErrorKind::UnknownLabel: return "UnknownLabel";
    case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorKind::EmptyClass: return "EmptyClass";
    case ErrorKind::UnsupportedOperation: return "UnsupportedOperation";
    case ErrorKind::AmbiguousSelection: return "AmbiguousSelection";
    case ErrorKind::IncompleteLog: return "IncompleteLog";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

/// All toolkit failures. `details` carries per-item diagnostics (violations,
/// missing log pairs) when a single message is not enough.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message,
        std::vector<std::string> details = {})
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind),
        details_(std::move(details)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::vector<std::string>& details() const noexcept { return details_; }

 private:
  ErrorKind kind_;
  std::vector<std::string> details_;
};

}  // namespace swapmix
