#pragma once

#include <vector>

#include "onnx2smt/nier.hpp"

namespace onnx2smt {

/// Multidirectional (numpy) broadcast. Throws ShapeMismatch.
TensorShape broadcast_shape(const TensorShape& a, const TensorShape& b, const std::string& node);

/// floor((in + pad_begin + pad_end - kernel) / stride) + 1
std::int64_t window_output_dim(std::int64_t in, std::int64_t pad_begin, std::int64_t pad_end, std::int64_t kernel,
                               std::int64_t stride);

/// Output shape of one node; null entries mark omitted optional inputs.
TensorShape infer_node_shape(const NierNode& node, const std::vector<const TensorShape*>& inputs);

}  // namespace onnx2smt
