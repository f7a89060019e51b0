#pragma once

// Exact-rational reference semantics for NierGraphs, and exhaustive property
// checking over small simulator parameter spaces.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "onnx2smt/camus.hpp"
#include "onnx2smt/nier.hpp"
#include "onnx2smt/verdict.hpp"

namespace onnx2smt {

namespace kernels {

RationalTensor add(const RationalTensor& a, const RationalTensor& b);
RationalTensor matmul(const RationalTensor& a, const RationalTensor& b);
RationalTensor gemm(const RationalTensor& a, const RationalTensor& b, const RationalTensor* c, const GemmAttrs& attrs);
RationalTensor relu(const RationalTensor& x);
RationalTensor conv2d(const RationalTensor& x, const RationalTensor& w, const RationalTensor* bias,
                      const Conv2DAttrs& attrs);
RationalTensor maxpool2d(const RationalTensor& x, const MaxPool2DAttrs& attrs);
RationalTensor flatten(const RationalTensor& x, std::int64_t axis);

/// Dispatches on node.op. `inputs` follows node.inputs; null for omitted
/// optional operands.
RationalTensor evaluate(const NierNode& node, std::span<const RationalTensor* const> inputs);

}  // namespace kernels

/// Every tensor of one forward pass: graph inputs, initializers, and every
/// node output.
using ExactActivationTrace = std::map<std::string, RationalTensor>;

struct ExactResult {
  std::vector<RationalTensor> outputs;  // in graph.outputs order
  ExactActivationTrace trace;
};

/// Forward pass with no rounding anywhere. The graph must have exactly one
/// input. Throws ShapeMismatch.
ExactResult eval_exact(const NierGraph& graph, const RationalTensor& input);

struct BruteForceOptions {
  std::uint64_t max_renders = std::uint64_t{1} << 20;
  unsigned threads = 1;
};

/// Enumerates every obstacle set on the grid in row-major lexicographic order
/// (pixel 0 most significant, absent before present) and reports the first
/// violating configuration. Requires a Binary pixel domain. Throws
/// GridTooLarge when 2^(h*w) exceeds options.max_renders.
Verdict brute_force_verify(const NierGraph& graph, const SimulatorSpec& sim, const PropertySpec& prop,
                           const BruteForceOptions& options = {});

}  // namespace onnx2smt
