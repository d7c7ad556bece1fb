#pragma once

#include <stdexcept>
#include <string>

namespace arfuse {

enum class ErrorKind {
  io,
  format,
  length,
  data,
  shape,
  argument,
  numeric,
  degenerate,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::io: return "io error";
    case ErrorKind::format: return "format error";
    case ErrorKind::length: return "length error";
    case ErrorKind::data: return "data error";
    case ErrorKind::shape: return "shape error";
    case ErrorKind::argument: return "argument error";
    case ErrorKind::numeric: return "numeric error";
    case ErrorKind::degenerate: return "degenerate fusion";
  }
  return "error";
}

/// Base class of every error raised by the engine. The kind decides the CLI
/// exit status (argument errors exit 2, everything else exits 1).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind), message_(what) {}

  ErrorKind kind() const noexcept { return kind_; }
  /// The message without the kind prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorKind kind_;
  std::string message_;
};

#define ARFUSE_DEFINE_ERROR(Name, Kind)                                 \
  class Name : public Error {                                           \
   public:                                                              \
    explicit Name(const std::string& what) : Error(ErrorKind::Kind, what) {} \
  };

ARFUSE_DEFINE_ERROR(IoError, io)
ARFUSE_DEFINE_ERROR(FormatError, format)
ARFUSE_DEFINE_ERROR(LengthError, length)
ARFUSE_DEFINE_ERROR(DataError, data)
ARFUSE_DEFINE_ERROR(ShapeError, shape)
ARFUSE_DEFINE_ERROR(ArgumentError, argument)
ARFUSE_DEFINE_ERROR(NumericError, numeric)
ARFUSE_DEFINE_ERROR(DegenerateError, degenerate)

#undef ARFUSE_DEFINE_ERROR

}  // namespace arfuse
