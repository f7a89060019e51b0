#pragma once

// Human-readable run reports.

#include <string>
#include <vector>

#include "onnx2smt/camus.hpp"
#include "onnx2smt/verdict.hpp"

namespace onnx2smt {

struct RunReport {
  Verdict verdict;
  std::string solver;
  double wall_seconds = 0.0;
  std::vector<std::string> artifacts;
  std::string grid;  // counterexample rendering, empty unless Falsified
};

/// Text grid of the image, one row per line. Binary pixels print as 0/1,
/// interval pixels as exact values. The danger zone is framed with a dashed
/// border (':' and '-').
std::string render_image(const RationalTensor& image, const SimulatorSpec& sim, const PixelRegion& zone);

/// Exit code contract: 0 Proven, 1 Falsified, 2 Unknown or Timeout, 3 error.
int exit_code(VerdictStatus status);

std::string format_report(const RunReport& report);
std::string format_report_json(const RunReport& report);

}  // namespace onnx2smt
