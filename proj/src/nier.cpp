#include "onnx2smt/nier.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>

#include "onnx2smt/error.hpp"
#include "shape_rules.hpp"

namespace onnx2smt {

std::int64_t TensorShape::element_count() const {
  return std::accumulate(dims.begin(), dims.end(), std::int64_t{1}, std::multiplies<>());
}

std::string TensorShape::str() const {
  std::string out;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) out += 'x';
    out += std::to_string(dims[i]);
  }
  return out.empty() ? "scalar" : out;
}

RationalTensor::RationalTensor(TensorShape s, std::vector<Rational> values)
    : shape(std::move(s)), data(std::move(values)) {
  if (static_cast<std::int64_t>(data.size()) != shape.element_count()) {
    throw Error(ErrorKind::ShapeMismatch, "tensor of shape " + shape.str() + " given " +
                                              std::to_string(data.size()) + " values");
  }
}

RationalTensor RationalTensor::zeros(TensorShape s) {
  const auto n = static_cast<std::size_t>(s.element_count());
  return RationalTensor(std::move(s), std::vector<Rational>(n));
}

std::vector<std::int64_t> strides_of(const TensorShape& shape) {
  std::vector<std::int64_t> strides(shape.rank(), 1);
  for (std::size_t i = shape.rank(); i-- > 1;) strides[i - 1] = strides[i] * shape.dims[i];
  return strides;
}

std::vector<std::int64_t> unravel(std::int64_t flat, const TensorShape& shape) {
  std::vector<std::int64_t> index(shape.rank());
  for (std::size_t i = shape.rank(); i-- > 0;) {
    index[i] = flat % shape.dims[i];
    flat /= shape.dims[i];
  }
  return index;
}

std::string_view to_string(OpKind op) {
  switch (op) {
    case OpKind::Gemm: return "Gemm";
    case OpKind::MatMul: return "MatMul";
    case OpKind::Add: return "Add";
    case OpKind::Relu: return "Relu";
    case OpKind::Conv2D: return "Conv2D";
    case OpKind::MaxPool2D: return "MaxPool2D";
    case OpKind::Flatten: return "Flatten";
    case OpKind::Constant: return "Constant";
    case OpKind::Identity: return "Identity";
  }
  return "?";
}

const RationalTensor* NierGraph::constant(const std::string& name) const {
  if (auto it = tensors.find(name); it != tensors.end()) return &it->second;
  for (const auto& node : nodes) {
    if (node.op == OpKind::Constant && !node.outputs.empty() && node.outputs[0] == name) {
      return &std::get<ConstantAttrs>(node.attrs).value;
    }
  }
  return nullptr;
}

bool NierGraph::is_input(const std::string& name) const {
  return std::any_of(inputs.begin(), inputs.end(), [&](const ValueInfo& v) { return v.name == name; });
}

const TensorShape& NierGraph::shape_of(const std::string& name) const {
  if (auto it = shapes.find(name); it != shapes.end()) return it->second;
  if (auto it = tensors.find(name); it != tensors.end()) return it->second.shape;
  for (const auto& in : inputs) {
    if (in.name == name) return in.shape;
  }
  throw Error(ErrorKind::ShapeMismatch, "no shape known for tensor '" + name + "'");
}

std::vector<std::size_t> topo_order(const NierGraph& graph) {
  std::map<std::string, std::size_t> producer;
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    for (const auto& out : graph.nodes[i].outputs) {
      if (!producer.emplace(out, i).second || graph.tensors.count(out) || graph.is_input(out)) {
        throw Error(ErrorKind::ShapeMismatch, "tensor '" + out + "' is produced more than once");
      }
    }
  }

  std::vector<std::size_t> indegree(graph.nodes.size(), 0);
  std::vector<std::vector<std::size_t>> consumers(graph.nodes.size());
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    for (const auto& in : graph.nodes[i].inputs) {
      if (in.empty()) continue;  // omitted optional input
      if (auto it = producer.find(in); it != producer.end()) {
        ++indegree[i];
        consumers[it->second].push_back(i);
      } else if (!graph.tensors.count(in) && !graph.is_input(in)) {
        throw Error(ErrorKind::ShapeMismatch,
                    "node '" + graph.nodes[i].name + "' consumes undefined tensor '" + in + "'");
      }
    }
  }

  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  for (std::size_t i = 0; i < indegree.size(); ++i) {
    if (indegree[i] == 0) ready.push(i);
  }
  std::vector<std::size_t> order;
  order.reserve(graph.nodes.size());
  while (!ready.empty()) {
    const std::size_t i = ready.top();
    ready.pop();
    order.push_back(i);
    for (std::size_t c : consumers[i]) {
      if (--indegree[c] == 0) ready.push(c);
    }
  }
  if (order.size() != graph.nodes.size()) {
    throw Error(ErrorKind::CycleDetected, std::to_string(graph.nodes.size() - order.size()) +
                                              " node(s) lie on a cycle");
  }
  return order;
}

NierGraph sorted(NierGraph graph) {
  const auto order = topo_order(graph);
  std::vector<NierNode> nodes;
  nodes.reserve(order.size());
  for (std::size_t i : order) nodes.push_back(std::move(graph.nodes[i]));
  graph.nodes = std::move(nodes);
  return graph;
}

NierGraph infer_shapes(NierGraph graph) {
  graph = sorted(std::move(graph));
  graph.shapes.clear();
  for (const auto& in : graph.inputs) {
    if (in.shape.dims.empty() ||
        std::any_of(in.shape.dims.begin(), in.shape.dims.end(), [](auto d) { return d < 1; })) {
      throw Error(ErrorKind::ShapeMismatch, "graph input '" + in.name + "' has invalid shape " + in.shape.str());
    }
    graph.shapes[in.name] = in.shape;
  }
  for (const auto& [name, t] : graph.tensors) graph.shapes[name] = t.shape;

  for (const auto& node : graph.nodes) {
    std::vector<const TensorShape*> in_shapes;
    for (const auto& in : node.inputs) {
      in_shapes.push_back(in.empty() ? nullptr : &graph.shapes.at(in));
    }
    graph.shapes[node.outputs.at(0)] = infer_node_shape(node, in_shapes);
  }
  for (auto& out : graph.outputs) {
    auto it = graph.shapes.find(out.name);
    if (it == graph.shapes.end()) {
      throw Error(ErrorKind::ShapeMismatch, "graph output '" + out.name + "' is never produced");
    }
    if (!out.shape.dims.empty() && out.shape != it->second) {
      throw Error(ErrorKind::ShapeMismatch, "graph output '" + out.name + "' declared " + out.shape.str() +
                                                " but computed " + it->second.str());
    }
    out.shape = it->second;
  }
  return graph;
}

namespace {

std::string join(const std::vector<std::string>& names) {
  std::string out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i) out += ',';
    out += names[i].empty() ? "-" : names[i];
  }
  return out;
}

std::string pair_str(const std::array<std::int64_t, 2>& a) {
  return std::to_string(a[0]) + "x" + std::to_string(a[1]);
}

std::string pads_str(const std::array<std::int64_t, 4>& p) {
  return std::to_string(p[0]) + "," + std::to_string(p[1]) + "," + std::to_string(p[2]) + "," +
         std::to_string(p[3]);
}

// FNV-1a over the canonical decimal forms; stable across platforms.
std::string digest(const RationalTensor& t) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& q : t.data) {
    for (char c : q.get_str()) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ull;
    }
    h ^= ';';
    h *= 0x100000001b3ull;
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

std::string attrs_str(const NodeAttrs& attrs) {
  struct Visitor {
    std::string operator()(std::monostate) const { return ""; }
    std::string operator()(const GemmAttrs& a) const {
      return " alpha=" + a.alpha.get_str() + " beta=" + a.beta.get_str() + " transB=" + (a.trans_b ? "1" : "0");
    }
    std::string operator()(const Conv2DAttrs& a) const {
      return " kernel=" + pair_str(a.kernel) + " strides=" + pair_str(a.strides) + " pads=" + pads_str(a.pads) +
             " channels=" + std::to_string(a.in_channels) + "->" + std::to_string(a.out_channels);
    }
    std::string operator()(const MaxPool2DAttrs& a) const {
      return " kernel=" + pair_str(a.kernel) + " strides=" + pair_str(a.strides) + " pads=" + pads_str(a.pads);
    }
    std::string operator()(const FlattenAttrs& a) const { return " axis=" + std::to_string(a.axis); }
    std::string operator()(const ConstantAttrs& a) const {
      return " value=" + a.value.shape.str() + "#" + digest(a.value);
    }
  };
  return std::visit(Visitor{}, attrs);
}

}  // namespace

std::string dump(const NierGraph& graph) {
  std::ostringstream os;
  os << "nier-dump v1\n";
  for (const auto& in : graph.inputs) os << "input " << in.name << ' ' << in.shape.str() << '\n';
  for (const auto& [name, t] : graph.tensors) os << "tensor " << name << ' ' << t.shape.str() << " #" << digest(t) << '\n';
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    const auto& n = graph.nodes[i];
    os << "node " << i << ' ' << n.name << ' ' << to_string(n.op) << " in=" << join(n.inputs)
       << " out=" << join(n.outputs);
    if (auto it = graph.shapes.find(n.outputs.at(0)); it != graph.shapes.end()) os << " shape=" << it->second.str();
    os << attrs_str(n.attrs) << '\n';
  }
  for (const auto& out : graph.outputs) os << "output " << out.name << ' ' << out.shape.str() << '\n';
  return os.str();
}

}  // namespace onnx2smt
