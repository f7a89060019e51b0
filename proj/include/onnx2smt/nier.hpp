#pragma once

// Neural IntErmediate Representation: a tensor-level DAG sitting between the
// ONNX import and the scalar constraint lowering.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "onnx2smt/rational.hpp"

namespace onnx2smt {

struct TensorShape {
  std::vector<std::int64_t> dims;

  std::int64_t element_count() const;
  std::size_t rank() const { return dims.size(); }
  std::string str() const;  // "1x1x3x3"

  friend bool operator==(const TensorShape&, const TensorShape&) = default;
};

/// Row-major dense tensor of exact rationals.
struct RationalTensor {
  TensorShape shape;
  std::vector<Rational> data;

  RationalTensor() = default;
  RationalTensor(TensorShape s, std::vector<Rational> values);
  static RationalTensor zeros(TensorShape s);

  friend bool operator==(const RationalTensor&, const RationalTensor&) = default;
};

/// Row-major strides for a shape.
std::vector<std::int64_t> strides_of(const TensorShape& shape);

/// Unravels a flat row-major index into per-dimension coordinates.
std::vector<std::int64_t> unravel(std::int64_t flat, const TensorShape& shape);

enum class OpKind { Gemm, MatMul, Add, Relu, Conv2D, MaxPool2D, Flatten, Constant, Identity };

std::string_view to_string(OpKind op);

struct GemmAttrs {
  Rational alpha{1};
  Rational beta{1};
  bool trans_b = false;
  friend bool operator==(const GemmAttrs&, const GemmAttrs&) = default;
};

struct Conv2DAttrs {
  std::array<std::int64_t, 2> kernel{1, 1};
  std::array<std::int64_t, 2> strides{1, 1};
  std::array<std::int64_t, 4> pads{0, 0, 0, 0};  // top, left, bottom, right
  std::int64_t in_channels = 0;
  std::int64_t out_channels = 0;
  friend bool operator==(const Conv2DAttrs&, const Conv2DAttrs&) = default;
};

struct MaxPool2DAttrs {
  std::array<std::int64_t, 2> kernel{1, 1};
  std::array<std::int64_t, 2> strides{1, 1};
  std::array<std::int64_t, 4> pads{0, 0, 0, 0};  // top, left, bottom, right
  friend bool operator==(const MaxPool2DAttrs&, const MaxPool2DAttrs&) = default;
};

struct FlattenAttrs {
  std::int64_t axis = 1;
  friend bool operator==(const FlattenAttrs&, const FlattenAttrs&) = default;
};

struct ConstantAttrs {
  RationalTensor value;
  friend bool operator==(const ConstantAttrs&, const ConstantAttrs&) = default;
};

using NodeAttrs =
    std::variant<std::monostate, GemmAttrs, Conv2DAttrs, MaxPool2DAttrs, FlattenAttrs, ConstantAttrs>;

struct NierNode {
  std::string name;
  OpKind op = OpKind::Identity;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  NodeAttrs attrs;

  friend bool operator==(const NierNode&, const NierNode&) = default;
};

struct ValueInfo {
  std::string name;
  TensorShape shape;
  friend bool operator==(const ValueInfo&, const ValueInfo&) = default;
};

struct NierGraph {
  std::vector<NierNode> nodes;                    // topologically ordered
  std::map<std::string, RationalTensor> tensors;  // initializers
  std::vector<ValueInfo> inputs;
  std::vector<ValueInfo> outputs;
  std::map<std::string, TensorShape> shapes;      // filled by infer_shapes

  /// Value of a compile-time constant: an initializer or the output of a
  /// Constant node. nullptr otherwise.
  const RationalTensor* constant(const std::string& name) const;
  bool is_input(const std::string& name) const;
  const TensorShape& shape_of(const std::string& name) const;

  friend bool operator==(const NierGraph&, const NierGraph&) = default;
};

/// Kahn's algorithm, ties broken by original node index. Throws
/// CycleDetected (or ShapeMismatch for a dangling input).
std::vector<std::size_t> topo_order(const NierGraph& graph);

/// Returns a copy with `nodes` permuted into topo_order.
NierGraph sorted(NierGraph graph);

/// Annotates every tensor with a concrete shape and validates node
/// attributes. Throws ShapeMismatch naming the node.
NierGraph infer_shapes(NierGraph graph);

enum class RewriteRule : unsigned {
  ConstantFolding = 1u << 0,
  IdentityElimination = 1u << 1,
  FlattenFusion = 1u << 2,
  GemmNormalization = 1u << 3,
};

struct RuleSet {
  unsigned mask = 0;

  static RuleSet all();
  RuleSet& with(RewriteRule r) {
    mask |= static_cast<unsigned>(r);
    return *this;
  }
  bool has(RewriteRule r) const { return (mask & static_cast<unsigned>(r)) != 0; }
};

/// Semantics-preserving rewriting to a fixpoint. Rules that do not apply are
/// skipped. The result is shape-inferred.
NierGraph rewrite(const NierGraph& graph, RuleSet rules = RuleSet::all());

/// Line-oriented debug dump, format "nier-dump v1" (see docs/nier_dump.md).
std::string dump(const NierGraph& graph);

}  // namespace onnx2smt
