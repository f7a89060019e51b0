#include "onnx2smt/error.hpp"

namespace onnx2smt {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedProtobuf: return "MalformedProtobuf";
    case ErrorKind::UnsupportedOperator: return "UnsupportedOperator";
    case ErrorKind::UnsupportedDtype: return "UnsupportedDtype";
    case ErrorKind::UnsupportedOpset: return "UnsupportedOpset";
    case ErrorKind::UnsupportedAttribute: return "UnsupportedAttribute";
    case ErrorKind::NonFiniteWeight: return "NonFiniteWeight";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::CycleDetected: return "CycleDetected";
    case ErrorKind::InternalNamingCollision: return "InternalNamingCollision";
    case ErrorKind::LogicMismatch: return "LogicMismatch";
    case ErrorKind::EmptyWindow: return "EmptyWindow";
    case ErrorKind::MissingVariable: return "MissingVariable";
    case ErrorKind::UnsupportedNorm: return "UnsupportedNorm";
    case ErrorKind::InvalidSpec: return "InvalidSpec";
    case ErrorKind::SolverNotFound: return "SolverNotFound";
    case ErrorKind::UnparseableModel: return "UnparseableModel";
    case ErrorKind::IncompleteModel: return "IncompleteModel";
    case ErrorKind::DomainViolation: return "DomainViolation";
    case ErrorKind::GridTooLarge: return "GridTooLarge";
    case ErrorKind::EncodingBug: return "EncodingBug";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace onnx2smt
