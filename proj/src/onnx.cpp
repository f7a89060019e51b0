#include "onnx2smt/onnx.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <iterator>
#include <set>

#include "onnx2smt/error.hpp"
#include "onnx2smt/protobuf_wire.hpp"

namespace onnx2smt {

namespace {

// Field numbers from onnx.proto.
namespace model_field {
constexpr std::uint32_t kIrVersion = 1, kProducerName = 2, kGraph = 7, kOpsetImport = 8;
}
namespace opset_field {
constexpr std::uint32_t kDomain = 1, kVersion = 2;
}
namespace graph_field {
constexpr std::uint32_t kNode = 1, kName = 2, kInitializer = 5, kInput = 11, kOutput = 12;
}
namespace node_field {
constexpr std::uint32_t kInput = 1, kOutput = 2, kName = 3, kOpType = 4, kAttribute = 5, kDomain = 7;
}
namespace attr_field {
constexpr std::uint32_t kName = 1, kF = 2, kI = 3, kS = 4, kT = 5, kFloats = 7, kInts = 8, kType = 20;
}
namespace tensor_field {
constexpr std::uint32_t kDims = 1, kDataType = 2, kFloatData = 4, kName = 8, kRawData = 9, kDoubleData = 10,
                        kDataLocation = 14;
}
namespace value_info_field {
constexpr std::uint32_t kName = 1, kType = 2;
}
namespace type_field {
constexpr std::uint32_t kTensorType = 1;
}
namespace tensor_type_field {
constexpr std::uint32_t kElemType = 1, kShape = 2;
}
namespace shape_field {
constexpr std::uint32_t kDim = 1;
}
namespace dim_field {
constexpr std::uint32_t kValue = 1, kParam = 2;
}

const std::set<std::string>& supported_ops() {
  static const std::set<std::string> ops{"Gemm", "MatMul", "Add", "Relu", "Conv",
                                         "MaxPool", "Flatten", "Constant", "Identity"};
  return ops;
}

Error malformed(const std::string& what) { return Error(ErrorKind::MalformedProtobuf, what); }

bool is_float_type(std::int32_t t) {
  return t == static_cast<std::int32_t>(OnnxDataType::Float) || t == static_cast<std::int32_t>(OnnxDataType::Double);
}

std::string dtype_name(std::int32_t t) {
  switch (t) {
    case 1: return "FLOAT";
    case 2: return "UINT8";
    case 3: return "INT8";
    case 5: return "INT16";
    case 6: return "INT32";
    case 7: return "INT64";
    case 9: return "BOOL";
    case 10: return "FLOAT16";
    case 11: return "DOUBLE";
    case 16: return "BFLOAT16";
    default: return "dtype " + std::to_string(t);
  }
}

OnnxTensor decode_tensor(std::span<const std::uint8_t> bytes) {
  OnnxTensor t;
  t.data_type = 0;
  std::span<const std::uint8_t> raw;
  bool has_raw = false;
  pb::Reader r(bytes);
  pb::Field f;
  while (r.next(f)) {
    switch (f.number) {
      case tensor_field::kDims: pb::read_repeated_int64(f, t.dims); break;
      case tensor_field::kDataType: t.data_type = static_cast<std::int32_t>(f.scalar); break;
      case tensor_field::kFloatData: pb::read_repeated_float(f, t.float_data); break;
      case tensor_field::kDoubleData: pb::read_repeated_double(f, t.double_data); break;
      case tensor_field::kName: t.name = std::string(f.as_string()); break;
      case tensor_field::kRawData:
        raw = f.bytes;
        has_raw = true;
        break;
      case tensor_field::kDataLocation:
        if (f.scalar != 0) throw malformed("tensor '" + t.name + "' uses external data, which is not supported");
        break;
      default: break;
    }
  }
  if (!is_float_type(t.data_type)) {
    throw Error(ErrorKind::UnsupportedDtype, "tensor '" + t.name + "' has " + dtype_name(t.data_type) +
                                                 "; only FLOAT and DOUBLE are supported");
  }
  if (has_raw) {
    const std::size_t width = t.data_type == static_cast<std::int32_t>(OnnxDataType::Float) ? 4 : 8;
    if (raw.size() % width != 0) throw malformed("raw_data of '" + t.name + "' is not a whole number of elements");
    for (std::size_t i = 0; i < raw.size(); i += width) {
      std::uint64_t bits = 0;
      for (std::size_t b = width; b-- > 0;) bits = (bits << 8) | raw[i + b];
      if (width == 4) {
        t.float_data.push_back(std::bit_cast<float>(static_cast<std::uint32_t>(bits)));
      } else {
        t.double_data.push_back(std::bit_cast<double>(bits));
      }
    }
  }
  std::int64_t count = 1;
  for (auto d : t.dims) {
    if (d < 0) throw malformed("tensor '" + t.name + "' has a negative dimension");
    count *= d;
  }
  if (static_cast<std::int64_t>(t.payload_size()) != count) {
    throw malformed("tensor '" + t.name + "' declares " + std::to_string(count) + " elements but carries " +
                    std::to_string(t.payload_size()));
  }
  return t;
}

OnnxAttribute decode_attribute(std::span<const std::uint8_t> bytes) {
  OnnxAttribute a;
  pb::Reader r(bytes);
  pb::Field f;
  while (r.next(f)) {
    switch (f.number) {
      case attr_field::kName: a.name = std::string(f.as_string()); break;
      case attr_field::kF: a.f = f.as_float(); break;
      case attr_field::kI: a.i = f.as_int64(); break;
      case attr_field::kS: a.s = std::string(f.as_string()); break;
      case attr_field::kT: a.t = decode_tensor(f.bytes); break;
      case attr_field::kFloats: pb::read_repeated_float(f, a.floats); break;
      case attr_field::kInts: pb::read_repeated_int64(f, a.ints); break;
      case attr_field::kType: a.type = static_cast<OnnxAttribute::Type>(f.scalar); break;
      default: break;
    }
  }
  return a;
}

OnnxNode decode_node(std::span<const std::uint8_t> bytes) {
  OnnxNode n;
  pb::Reader r(bytes);
  pb::Field f;
  while (r.next(f)) {
    switch (f.number) {
      case node_field::kInput: n.inputs.emplace_back(f.as_string()); break;
      case node_field::kOutput: n.outputs.emplace_back(f.as_string()); break;
      case node_field::kName: n.name = std::string(f.as_string()); break;
      case node_field::kOpType: n.op_type = std::string(f.as_string()); break;
      case node_field::kAttribute: n.attributes.push_back(decode_attribute(f.bytes)); break;
      case node_field::kDomain: n.domain = std::string(f.as_string()); break;
      default: break;
    }
  }
  return n;
}

OnnxValueInfo decode_value_info(std::span<const std::uint8_t> bytes) {
  OnnxValueInfo v;
  v.elem_type = 0;
  pb::Reader r(bytes);
  pb::Field f;
  while (r.next(f)) {
    if (f.number == value_info_field::kName) {
      v.name = std::string(f.as_string());
    } else if (f.number == value_info_field::kType) {
      pb::Reader tr(f.bytes);
      pb::Field tf;
      while (tr.next(tf)) {
        if (tf.number != type_field::kTensorType) continue;
        pb::Reader ttr(tf.bytes);
        pb::Field ttf;
        while (ttr.next(ttf)) {
          if (ttf.number == tensor_type_field::kElemType) {
            v.elem_type = static_cast<std::int32_t>(ttf.scalar);
          } else if (ttf.number == tensor_type_field::kShape) {
            pb::Reader sr(ttf.bytes);
            pb::Field sf;
            while (sr.next(sf)) {
              if (sf.number != shape_field::kDim) continue;
              std::int64_t dim = -1;
              pb::Reader dr(sf.bytes);
              pb::Field df;
              while (dr.next(df)) {
                if (df.number == dim_field::kValue) dim = df.as_int64();
              }
              v.dims.push_back(dim);
            }
          }
        }
      }
    }
  }
  return v;
}

}  // namespace

const OnnxAttribute* OnnxNode::attribute(const std::string& attr_name) const {
  auto it = std::find_if(attributes.begin(), attributes.end(), [&](const OnnxAttribute& a) { return a.name == attr_name; });
  return it == attributes.end() ? nullptr : &*it;
}

OnnxSubsetModel parse_onnx(std::span<const std::uint8_t> bytes) {
  OnnxSubsetModel model;
  model.opset_version = -1;
  std::span<const std::uint8_t> graph_bytes;
  bool has_graph = false;

  pb::Reader r(bytes);
  pb::Field f;
  while (r.next(f)) {
    switch (f.number) {
      case model_field::kIrVersion: model.ir_version = f.as_int64(); break;
      case model_field::kProducerName: model.producer_name = std::string(f.as_string()); break;
      case model_field::kGraph:
        if (f.type != pb::WireType::LengthDelimited) throw malformed("graph field has wrong wire type");
        graph_bytes = f.bytes;
        has_graph = true;
        break;
      case model_field::kOpsetImport: {
        std::string domain;
        std::int64_t version = -1;
        pb::Reader or_(f.bytes);
        pb::Field of;
        while (or_.next(of)) {
          if (of.number == opset_field::kDomain) domain = std::string(of.as_string());
          if (of.number == opset_field::kVersion) version = of.as_int64();
        }
        if (domain.empty() || domain == "ai.onnx") model.opset_version = version;
        break;
      }
      default: break;
    }
  }
  if (!has_graph) throw malformed("no GraphProto in model");

  std::vector<OnnxValueInfo> declared_inputs;
  pb::Reader gr(graph_bytes);
  while (gr.next(f)) {
    if (f.type != pb::WireType::LengthDelimited) continue;
    switch (f.number) {
      case graph_field::kNode: model.nodes.push_back(decode_node(f.bytes)); break;
      case graph_field::kName: model.graph_name = std::string(f.as_string()); break;
      case graph_field::kInitializer: model.initializers.push_back(decode_tensor(f.bytes)); break;
      case graph_field::kInput: declared_inputs.push_back(decode_value_info(f.bytes)); break;
      case graph_field::kOutput: model.outputs.push_back(decode_value_info(f.bytes)); break;
      default: break;
    }
  }

  if (model.opset_version < kMinOpset || model.opset_version > kMaxOpset) {
    throw Error(ErrorKind::UnsupportedOpset, "default-domain opset " + std::to_string(model.opset_version) +
                                                 " outside supported range " + std::to_string(kMinOpset) + "-" +
                                                 std::to_string(kMaxOpset));
  }

  std::set<std::string> defined;
  for (const auto& t : model.initializers) defined.insert(t.name);
  for (auto& in : declared_inputs) {
    if (defined.count(in.name)) continue;  // pre-IR4 exporters list initializers as inputs
    if (!is_float_type(in.elem_type)) {
      throw Error(ErrorKind::UnsupportedDtype, "graph input '" + in.name + "' has " + dtype_name(in.elem_type));
    }
    model.inputs.push_back(std::move(in));
  }
  for (const auto& in : model.inputs) defined.insert(in.name);

  for (std::size_t i = 0; i < model.nodes.size(); ++i) {
    const auto& node = model.nodes[i];
    const std::string label = node.name.empty() ? "#" + std::to_string(i) : "'" + node.name + "'";
    if (!supported_ops().count(node.op_type) || !(node.domain.empty() || node.domain == "ai.onnx")) {
      throw Error(ErrorKind::UnsupportedOperator,
                  node.op_type + (node.domain.empty() ? "" : " (domain " + node.domain + ")") + " at node " + label);
    }
    if (node.outputs.empty()) throw malformed("node " + label + " has no outputs");
    for (const auto& out : node.outputs) {
      if (!out.empty()) defined.insert(out);
    }
  }
  for (const auto& node : model.nodes) {
    for (const auto& in : node.inputs) {
      if (!in.empty() && !defined.count(in)) {
        throw malformed("node '" + node.name + "' consumes undefined tensor '" + in + "'");
      }
    }
  }
  return model;
}

OnnxSubsetModel load_onnx(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
  const std::vector<char> raw((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());
  return parse_onnx(std::span(reinterpret_cast<const std::uint8_t*>(raw.data()), raw.size()));
}

namespace {

std::string encode_tensor(const OnnxTensor& t) {
  pb::Writer w;
  w.packed_int64(tensor_field::kDims, t.dims);
  w.varint(tensor_field::kDataType, static_cast<std::uint64_t>(t.data_type));
  w.bytes(tensor_field::kName, t.name);
  std::string raw;
  auto append = [&](std::uint64_t bits, int width) {
    for (int i = 0; i < width; ++i) raw.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
  };
  for (float v : t.float_data) append(std::bit_cast<std::uint32_t>(v), 4);
  for (double v : t.double_data) append(std::bit_cast<std::uint64_t>(v), 8);
  w.bytes(tensor_field::kRawData, raw);
  return w.take();
}

std::string encode_attribute(const OnnxAttribute& a) {
  pb::Writer w;
  w.bytes(attr_field::kName, a.name);
  switch (a.type) {
    case OnnxAttribute::Type::Float: w.float32(attr_field::kF, a.f); break;
    case OnnxAttribute::Type::Int: w.varint(attr_field::kI, static_cast<std::uint64_t>(a.i)); break;
    case OnnxAttribute::Type::String: w.bytes(attr_field::kS, a.s); break;
    case OnnxAttribute::Type::Tensor:
      if (a.t) w.bytes(attr_field::kT, encode_tensor(*a.t));
      break;
    case OnnxAttribute::Type::Floats: w.packed_float(attr_field::kFloats, a.floats); break;
    case OnnxAttribute::Type::Ints: w.packed_int64(attr_field::kInts, a.ints); break;
    case OnnxAttribute::Type::Undefined: break;
  }
  w.varint(attr_field::kType, static_cast<std::uint64_t>(a.type));
  return w.take();
}

std::string encode_value_info(const OnnxValueInfo& v) {
  pb::Writer shape;
  for (auto d : v.dims) {
    pb::Writer dim;
    if (d >= 0) {
      dim.varint(dim_field::kValue, static_cast<std::uint64_t>(d));
    } else {
      dim.bytes(dim_field::kParam, "N");
    }
    shape.bytes(shape_field::kDim, dim.buffer());
  }
  pb::Writer tensor_type;
  tensor_type.varint(tensor_type_field::kElemType, static_cast<std::uint64_t>(v.elem_type));
  tensor_type.bytes(tensor_type_field::kShape, shape.buffer());
  pb::Writer type;
  type.bytes(type_field::kTensorType, tensor_type.buffer());
  pb::Writer w;
  w.bytes(value_info_field::kName, v.name);
  w.bytes(value_info_field::kType, type.buffer());
  return w.take();
}

}  // namespace

std::string serialize_onnx(const OnnxSubsetModel& model) {
  pb::Writer graph;
  for (const auto& node : model.nodes) {
    pb::Writer n;
    for (const auto& in : node.inputs) n.bytes(node_field::kInput, in);
    for (const auto& out : node.outputs) n.bytes(node_field::kOutput, out);
    n.bytes(node_field::kName, node.name);
    n.bytes(node_field::kOpType, node.op_type);
    for (const auto& a : node.attributes) n.bytes(node_field::kAttribute, encode_attribute(a));
    if (!node.domain.empty()) n.bytes(node_field::kDomain, node.domain);
    graph.bytes(graph_field::kNode, n.buffer());
  }
  graph.bytes(graph_field::kName, model.graph_name);
  for (const auto& t : model.initializers) graph.bytes(graph_field::kInitializer, encode_tensor(t));
  for (const auto& in : model.inputs) graph.bytes(graph_field::kInput, encode_value_info(in));
  for (const auto& out : model.outputs) graph.bytes(graph_field::kOutput, encode_value_info(out));

  pb::Writer opset;
  opset.bytes(opset_field::kDomain, "");
  opset.varint(opset_field::kVersion, static_cast<std::uint64_t>(model.opset_version));

  pb::Writer w;
  w.varint(model_field::kIrVersion, static_cast<std::uint64_t>(model.ir_version));
  w.bytes(model_field::kProducerName, model.producer_name);
  w.bytes(model_field::kGraph, graph.buffer());
  w.bytes(model_field::kOpsetImport, opset.buffer());
  return w.take();
}

void save_onnx(const OnnxSubsetModel& model, const std::string& path) {
  std::ofstream file(path, std::ios::binary);
  if (!file) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
  const std::string bytes = serialize_onnx(model);
  file.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace onnx2smt
