#pragma once

// External SMT solver execution, model parsing and counterexample checking.

#include <chrono>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "onnx2smt/camus.hpp"
#include "onnx2smt/nier.hpp"
#include "onnx2smt/verdict.hpp"

namespace onnx2smt {

struct SolverConfig {
  std::string name;                    // label used in reports
  std::string executable;              // bare name (PATH lookup) or path
  std::vector<std::string> arguments;  // "{file}" is replaced by the task path
  std::chrono::milliseconds timeout{std::chrono::seconds(60)};
  bool model_request = true;           // ensure (get-model) follows (check-sat)
};

/// Known solvers: z3, cvc5, cvc4, yices. Anything else is treated as a path
/// to an executable invoked as `<path> <file>`.
SolverConfig solver_config(const std::string& name_or_path);

/// Every known solver that is found on PATH, in the order above.
std::vector<SolverConfig> installed_solvers();

/// Absolute path of an executable, searching PATH for bare names.
std::optional<std::string> find_executable(const std::string& name);

enum class RawStatus { Sat, Unsat, Unknown, Timeout, Error };

std::string_view to_string(RawStatus status);

struct RawOutcome {
  RawStatus status = RawStatus::Error;
  std::string solver;
  std::string model_text;   // stdout after the status line
  std::string stdout_text;
  std::string stderr_text;
  int exit_code = 0;
  double seconds = 0.0;
};

/// Runs one solver on an SMT-LIB file, killing it at the timeout. Throws
/// SolverNotFound; a non-zero exit without a verdict yields RawStatus::Error
/// with stderr preserved.
RawOutcome run_solver(const std::string& file, const SolverConfig& config);

/// Runs every solver concurrently; the first sat/unsat wins and the others
/// are killed. Without a definitive answer, Unknown beats Timeout beats Error.
RawOutcome run_portfolio(const std::string& file, std::span<const SolverConfig> configs);

using Assignment = std::map<std::string, Rational>;

/// Parses a (get-model) response made of `(define-fun name () Real value)`
/// entries. Throws UnparseableModel.
Assignment parse_model(const std::string& text);

struct ReconstructedInput {
  RationalTensor image;  // 1x1xHxW
  std::vector<std::pair<std::int64_t, std::int64_t>> obstacles;  // Binary domains only
};

/// Throws IncompleteModel or DomainViolation.
ReconstructedInput reconstruct_input(const Assignment& assignment, const SimulatorSpec& sim);

/// True iff exact evaluation of the network on `image` violates the property.
bool confirm_counterexample(const NierGraph& graph, const RationalTensor& image, const PropertySpec& prop,
                            const SimulatorSpec& sim);

struct VerifyResult {
  Verdict verdict;
  std::string smt_path;
  double seconds = 0.0;
};

/// Composes the task into `smt_path`, runs the solver(s) and confirms any
/// counterexample exactly. An unconfirmed sat model throws EncodingBug.
VerifyResult verify(const VerificationTask& task, std::span<const SolverConfig> solvers, const std::string& smt_path);

}  // namespace onnx2smt
