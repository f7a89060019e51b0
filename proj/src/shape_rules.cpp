#include "shape_rules.hpp"

#include <algorithm>

#include "onnx2smt/error.hpp"

namespace onnx2smt {

namespace {

Error mismatch(const NierNode& node, const std::string& what) {
  return Error(ErrorKind::ShapeMismatch, "node '" + node.name + "' (" + std::string(to_string(node.op)) + "): " + what);
}

const TensorShape& required(const NierNode& node, const std::vector<const TensorShape*>& inputs, std::size_t i) {
  if (i >= inputs.size() || inputs[i] == nullptr) throw mismatch(node, "missing input #" + std::to_string(i));
  return *inputs[i];
}

void check_window(const NierNode& node, const TensorShape& x, const std::array<std::int64_t, 2>& kernel,
                  const std::array<std::int64_t, 2>& strides, const std::array<std::int64_t, 4>& pads) {
  if (x.rank() != 4) throw mismatch(node, "expected NCHW input, got " + x.str());
  for (int i = 0; i < 2; ++i) {
    if (strides[i] < 1) throw mismatch(node, "stride must be >= 1");
    if (kernel[i] < 1) throw mismatch(node, "kernel must be >= 1");
  }
  if (std::any_of(pads.begin(), pads.end(), [](auto p) { return p < 0; })) throw mismatch(node, "negative pad");
  if (x.dims[2] + pads[0] + pads[2] < kernel[0] || x.dims[3] + pads[1] + pads[3] < kernel[1]) {
    throw mismatch(node, "kernel " + std::to_string(kernel[0]) + "x" + std::to_string(kernel[1]) +
                             " does not fit padded input " + x.str());
  }
}

}  // namespace

TensorShape broadcast_shape(const TensorShape& a, const TensorShape& b, const std::string& node) {
  const std::size_t rank = std::max(a.rank(), b.rank());
  TensorShape out;
  out.dims.resize(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::int64_t da = i < rank - a.rank() ? 1 : a.dims[i - (rank - a.rank())];
    const std::int64_t db = i < rank - b.rank() ? 1 : b.dims[i - (rank - b.rank())];
    if (da != db && da != 1 && db != 1) {
      throw Error(ErrorKind::ShapeMismatch,
                  "node '" + node + "': cannot broadcast " + a.str() + " with " + b.str());
    }
    out.dims[i] = std::max(da, db);
  }
  return out;
}

std::int64_t window_output_dim(std::int64_t in, std::int64_t pad_begin, std::int64_t pad_end, std::int64_t kernel,
                               std::int64_t stride) {
  return (in + pad_begin + pad_end - kernel) / stride + 1;
}

TensorShape infer_node_shape(const NierNode& node, const std::vector<const TensorShape*>& inputs) {
  switch (node.op) {
    case OpKind::Relu:
    case OpKind::Identity:
      return required(node, inputs, 0);

    case OpKind::Constant:
      return std::get<ConstantAttrs>(node.attrs).value.shape;

    case OpKind::Add:
      return broadcast_shape(required(node, inputs, 0), required(node, inputs, 1), node.name);

    case OpKind::MatMul: {
      const auto& a = required(node, inputs, 0);
      const auto& b = required(node, inputs, 1);
      if (a.rank() != 2 || b.rank() != 2) throw mismatch(node, "only 2-D MatMul supported, got " + a.str() + " * " + b.str());
      if (a.dims[1] != b.dims[0]) {
        throw mismatch(node, "inner dimensions differ: " + a.str() + " * " + b.str());
      }
      return TensorShape{{a.dims[0], b.dims[1]}};
    }

    case OpKind::Gemm: {
      const auto& attrs = std::get<GemmAttrs>(node.attrs);
      const auto& a = required(node, inputs, 0);
      const auto& b = required(node, inputs, 1);
      if (a.rank() != 2 || b.rank() != 2) throw mismatch(node, "Gemm operands must be 2-D, got " + a.str() + " and " + b.str());
      const std::int64_t k = attrs.trans_b ? b.dims[1] : b.dims[0];
      const std::int64_t n = attrs.trans_b ? b.dims[0] : b.dims[1];
      if (a.dims[1] != k) {
        throw mismatch(node, "inner dimensions differ: A is " + a.str() + ", B is " + b.str() +
                                 (attrs.trans_b ? " (transposed)" : ""));
      }
      TensorShape out{{a.dims[0], n}};
      if (inputs.size() > 2 && inputs[2] != nullptr) {
        if (broadcast_shape(out, *inputs[2], node.name) != out) {
          throw mismatch(node, "bias " + inputs[2]->str() + " does not broadcast to " + out.str());
        }
      }
      return out;
    }

    case OpKind::Conv2D: {
      const auto& attrs = std::get<Conv2DAttrs>(node.attrs);
      const auto& x = required(node, inputs, 0);
      const auto& w = required(node, inputs, 1);
      check_window(node, x, attrs.kernel, attrs.strides, attrs.pads);
      if (w.rank() != 4) throw mismatch(node, "weight must be 4-D, got " + w.str());
      if (w.dims[1] != x.dims[1]) {
        throw mismatch(node, "weight expects " + std::to_string(w.dims[1]) + " input channels, input has " +
                                 std::to_string(x.dims[1]));
      }
      if (w.dims[2] != attrs.kernel[0] || w.dims[3] != attrs.kernel[1]) {
        throw mismatch(node, "kernel_shape disagrees with weight " + w.str());
      }
      if (inputs.size() > 2 && inputs[2] != nullptr) {
        if (inputs[2]->rank() != 1 || inputs[2]->dims[0] != w.dims[0]) {
          throw mismatch(node, "bias must have shape " + std::to_string(w.dims[0]) + ", got " + inputs[2]->str());
        }
      }
      return TensorShape{{x.dims[0], w.dims[0],
                          window_output_dim(x.dims[2], attrs.pads[0], attrs.pads[2], attrs.kernel[0], attrs.strides[0]),
                          window_output_dim(x.dims[3], attrs.pads[1], attrs.pads[3], attrs.kernel[1], attrs.strides[1])}};
    }

    case OpKind::MaxPool2D: {
      const auto& attrs = std::get<MaxPool2DAttrs>(node.attrs);
      const auto& x = required(node, inputs, 0);
      check_window(node, x, attrs.kernel, attrs.strides, attrs.pads);
      return TensorShape{{x.dims[0], x.dims[1],
                          window_output_dim(x.dims[2], attrs.pads[0], attrs.pads[2], attrs.kernel[0], attrs.strides[0]),
                          window_output_dim(x.dims[3], attrs.pads[1], attrs.pads[3], attrs.kernel[1], attrs.strides[1])}};
    }

    case OpKind::Flatten: {
      const auto& x = required(node, inputs, 0);
      std::int64_t axis = std::get<FlattenAttrs>(node.attrs).axis;
      if (axis < 0) axis += static_cast<std::int64_t>(x.rank());
      if (axis < 0 || axis > static_cast<std::int64_t>(x.rank())) {
        throw mismatch(node, "axis out of range for " + x.str());
      }
      std::int64_t outer = 1;
      std::int64_t inner = 1;
      for (std::int64_t i = 0; i < static_cast<std::int64_t>(x.rank()); ++i) {
        (i < axis ? outer : inner) *= x.dims[static_cast<std::size_t>(i)];
      }
      return TensorShape{{outer, inner}};
    }
  }
  throw mismatch(node, "unknown operator");
}

}  // namespace onnx2smt
