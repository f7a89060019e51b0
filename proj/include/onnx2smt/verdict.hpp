#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "onnx2smt/nier.hpp"
#include "onnx2smt/rational.hpp"

namespace onnx2smt {

enum class VerdictStatus { Proven, Falsified, Unknown, Timeout, SolverError };

std::string_view to_string(VerdictStatus status);

struct Counterexample {
  std::map<std::string, Rational> assignment;  // solver model (empty for the oracle)
  RationalTensor image;                         // 1x1xHxW
  std::vector<std::pair<std::int64_t, std::int64_t>> obstacles;  // Binary domains only
  bool confirmed = false;
};

struct Verdict {
  VerdictStatus status = VerdictStatus::Unknown;
  std::optional<Counterexample> witness;  // set iff Falsified
  std::string diagnostic;
  std::string solver;                     // who answered ("oracle" for brute force)
  std::uint64_t evaluations = 0;          // brute force only
};

}  // namespace onnx2smt
