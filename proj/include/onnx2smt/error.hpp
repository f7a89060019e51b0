#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace onnx2smt {

enum class ErrorKind {
  MalformedProtobuf,
  UnsupportedOperator,
  UnsupportedDtype,
  UnsupportedOpset,
  UnsupportedAttribute,
  NonFiniteWeight,
  ShapeMismatch,
  CycleDetected,
  InternalNamingCollision,
  LogicMismatch,
  EmptyWindow,
  MissingVariable,
  UnsupportedNorm,
  InvalidSpec,
  SolverNotFound,
  UnparseableModel,
  IncompleteModel,
  DomainViolation,
  GridTooLarge,
  EncodingBug,
  Io,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries a kind so callers (tests, the
/// CLI exit-code mapping) can dispatch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace onnx2smt
