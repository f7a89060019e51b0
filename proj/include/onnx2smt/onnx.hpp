#pragma once

// ONNX import restricted to the operator subset this project lowers. The
// protobuf messages consumed are documented in docs/onnx_subset.md.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "onnx2smt/nier.hpp"

namespace onnx2smt {

enum class OnnxDataType : std::int32_t { Float = 1, Double = 11 };

struct OnnxTensor {
  std::string name;
  std::int32_t data_type = static_cast<std::int32_t>(OnnxDataType::Float);
  std::vector<std::int64_t> dims;
  std::vector<float> float_data;
  std::vector<double> double_data;

  std::size_t payload_size() const { return float_data.size() + double_data.size(); }
};

struct OnnxAttribute {
  enum class Type : std::int32_t { Undefined = 0, Float = 1, Int = 2, String = 3, Tensor = 4, Floats = 6, Ints = 7 };

  std::string name;
  Type type = Type::Undefined;
  float f = 0.0F;
  std::int64_t i = 0;
  std::string s;
  std::optional<OnnxTensor> t;
  std::vector<float> floats;
  std::vector<std::int64_t> ints;
};

struct OnnxNode {
  std::string name;
  std::string op_type;
  std::string domain;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::vector<OnnxAttribute> attributes;

  const OnnxAttribute* attribute(const std::string& attr_name) const;
};

/// A graph input/output. Symbolic dimensions are stored as -1.
struct OnnxValueInfo {
  std::string name;
  std::int32_t elem_type = static_cast<std::int32_t>(OnnxDataType::Float);
  std::vector<std::int64_t> dims;
};

struct OnnxSubsetModel {
  std::int64_t ir_version = 7;
  std::int64_t opset_version = 13;
  std::string producer_name;
  std::string graph_name;
  std::vector<OnnxNode> nodes;
  std::vector<OnnxTensor> initializers;
  std::vector<OnnxValueInfo> inputs;   // initializer-backed inputs already removed
  std::vector<OnnxValueInfo> outputs;
};

inline constexpr std::int64_t kMinOpset = 9;
inline constexpr std::int64_t kMaxOpset = 13;

/// Decodes and validates a serialized ModelProto. Throws MalformedProtobuf,
/// UnsupportedOperator, UnsupportedDtype, UnsupportedOpset.
OnnxSubsetModel parse_onnx(std::span<const std::uint8_t> bytes);
OnnxSubsetModel load_onnx(const std::string& path);

/// Encodes a ModelProto (initializers as raw_data, repeated scalars packed).
std::string serialize_onnx(const OnnxSubsetModel& model);
void save_onnx(const OnnxSubsetModel& model, const std::string& path);

/// Converts to a shape-inferred, topologically ordered NierGraph with exact
/// rational constants and every attribute default resolved. Throws
/// UnsupportedAttribute, ShapeMismatch, NonFiniteWeight.
NierGraph to_nier(const OnnxSubsetModel& model);

}  // namespace onnx2smt
