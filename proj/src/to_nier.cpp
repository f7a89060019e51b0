#include <algorithm>
#include <map>

#include "onnx2smt/error.hpp"
#include "onnx2smt/onnx.hpp"

namespace onnx2smt {

namespace {

Error unsupported(const OnnxNode& node, const std::string& what) {
  return Error(ErrorKind::UnsupportedAttribute, node.op_type + " node '" + node.name + "': " + what);
}

RationalTensor to_rational(const OnnxTensor& t) {
  TensorShape shape{t.dims};
  std::vector<Rational> data;
  data.reserve(t.payload_size());
  try {
    for (float f : t.float_data) data.push_back(float32_to_rational(f));
    for (double d : t.double_data) data.push_back(float64_to_rational(d));
  } catch (const Error& e) {
    throw Error(e.kind(), "tensor '" + t.name + "': " + e.what());
  }
  return RationalTensor(std::move(shape), std::move(data));
}

std::int64_t int_attr(const OnnxNode& node, const std::string& name, std::int64_t fallback) {
  const auto* a = node.attribute(name);
  return a ? a->i : fallback;
}

Rational float_attr(const OnnxNode& node, const std::string& name, const Rational& fallback) {
  const auto* a = node.attribute(name);
  return a ? float32_to_rational(a->f) : fallback;
}

struct Window {
  std::array<std::int64_t, 2> kernel{1, 1};
  std::array<std::int64_t, 2> strides{1, 1};
  std::array<std::int64_t, 4> pads{0, 0, 0, 0};
};

Window window_attrs(const OnnxNode& node, std::optional<std::array<std::int64_t, 2>> kernel_from_weight) {
  Window w;
  if (const auto* k = node.attribute("kernel_shape")) {
    if (k->ints.size() != 2) throw unsupported(node, "only 2-D kernels are supported");
    w.kernel = {k->ints[0], k->ints[1]};
  } else if (kernel_from_weight) {
    w.kernel = *kernel_from_weight;
  } else {
    throw unsupported(node, "kernel_shape is required");
  }
  if (const auto* s = node.attribute("strides")) {
    if (s->ints.size() != 2) throw unsupported(node, "strides must have 2 entries");
    w.strides = {s->ints[0], s->ints[1]};
  }
  if (const auto* p = node.attribute("pads")) {
    if (p->ints.size() != 4) throw unsupported(node, "pads must have 4 entries");
    w.pads = {p->ints[0], p->ints[1], p->ints[2], p->ints[3]};
  }
  if (const auto* d = node.attribute("dilations")) {
    if (std::any_of(d->ints.begin(), d->ints.end(), [](auto v) { return v != 1; })) {
      throw unsupported(node, "dilation != 1");
    }
  }
  if (const auto* ap = node.attribute("auto_pad")) {
    if (ap->s == "VALID") {
      w.pads = {0, 0, 0, 0};
    } else if (!ap->s.empty() && ap->s != "NOTSET") {
      throw unsupported(node, "auto_pad=" + ap->s);
    }
  }
  return w;
}

NierNode convert_node(const OnnxNode& node, std::size_t index, const std::map<std::string, const OnnxTensor*>& inits) {
  NierNode out;
  out.name = node.name.empty() ? node.op_type + "_" + std::to_string(index) : node.name;
  for (const auto& in : node.inputs) {
    if (!in.empty()) out.inputs.push_back(in);
  }
  out.outputs = {node.outputs.at(0)};
  if (std::any_of(node.outputs.begin() + 1, node.outputs.end(), [](const auto& o) { return !o.empty(); })) {
    throw unsupported(node, "secondary outputs are not supported");
  }
  auto need_inputs = [&](std::size_t lo, std::size_t hi) {
    if (out.inputs.size() < lo || out.inputs.size() > hi) {
      throw Error(ErrorKind::ShapeMismatch, node.op_type + " node '" + out.name + "' has " +
                                                std::to_string(out.inputs.size()) + " inputs");
    }
  };

  const std::string& op = node.op_type;
  if (op == "Gemm") {
    need_inputs(2, 3);
    if (int_attr(node, "transA", 0) != 0) throw unsupported(node, "transA=1");
    GemmAttrs attrs;
    attrs.alpha = float_attr(node, "alpha", Rational(1));
    attrs.beta = float_attr(node, "beta", Rational(1));
    attrs.trans_b = int_attr(node, "transB", 0) != 0;
    out.op = OpKind::Gemm;
    out.attrs = attrs;
  } else if (op == "MatMul") {
    need_inputs(2, 2);
    out.op = OpKind::MatMul;
  } else if (op == "Add") {
    need_inputs(2, 2);
    out.op = OpKind::Add;
  } else if (op == "Relu") {
    need_inputs(1, 1);
    out.op = OpKind::Relu;
  } else if (op == "Identity") {
    need_inputs(1, 1);
    out.op = OpKind::Identity;
  } else if (op == "Flatten") {
    need_inputs(1, 1);
    out.op = OpKind::Flatten;
    out.attrs = FlattenAttrs{int_attr(node, "axis", 1)};
  } else if (op == "Conv") {
    need_inputs(2, 3);
    if (int_attr(node, "group", 1) != 1) throw unsupported(node, "group != 1");
    std::optional<std::array<std::int64_t, 2>> kernel;
    std::int64_t in_channels = 0;
    std::int64_t out_channels = 0;
    if (auto it = inits.find(out.inputs[1]); it != inits.end()) {
      const auto& dims = it->second->dims;
      if (dims.size() != 4) throw unsupported(node, "only 2-D convolution is supported");
      kernel = std::array<std::int64_t, 2>{dims[2], dims[3]};
      out_channels = dims[0];
      in_channels = dims[1];
    }
    const Window w = window_attrs(node, kernel);
    out.op = OpKind::Conv2D;
    out.attrs = Conv2DAttrs{w.kernel, w.strides, w.pads, in_channels, out_channels};
  } else if (op == "MaxPool") {
    need_inputs(1, 1);
    if (int_attr(node, "ceil_mode", 0) != 0) throw unsupported(node, "ceil_mode=1");
    const Window w = window_attrs(node, std::nullopt);
    out.op = OpKind::MaxPool2D;
    out.attrs = MaxPool2DAttrs{w.kernel, w.strides, w.pads};
  } else if (op == "Constant") {
    need_inputs(0, 0);
    out.op = OpKind::Constant;
    if (const auto* v = node.attribute("value"); v && v->t) {
      out.attrs = ConstantAttrs{to_rational(*v->t)};
    } else if (const auto* vf = node.attribute("value_float")) {
      out.attrs = ConstantAttrs{RationalTensor(TensorShape{{1}}, {float32_to_rational(vf->f)})};
    } else if (const auto* vfs = node.attribute("value_floats")) {
      std::vector<Rational> data;
      for (float f : vfs->floats) data.push_back(float32_to_rational(f));
      const auto n = static_cast<std::int64_t>(data.size());
      out.attrs = ConstantAttrs{RationalTensor(TensorShape{{n}}, std::move(data))};
    } else {
      throw unsupported(node, "only float 'value', 'value_float' and 'value_floats' are supported");
    }
  } else {
    throw Error(ErrorKind::UnsupportedOperator, op);
  }
  return out;
}

TensorShape input_shape(const OnnxValueInfo& info) {
  TensorShape shape{info.dims};
  if (shape.dims.empty()) throw Error(ErrorKind::ShapeMismatch, "graph input '" + info.name + "' has no shape");
  if (shape.dims[0] < 0) shape.dims[0] = 1;  // symbolic batch
  for (auto d : shape.dims) {
    if (d < 1) throw Error(ErrorKind::ShapeMismatch, "graph input '" + info.name + "' has a dynamic dimension");
  }
  if (shape.rank() >= 2 && shape.dims[0] != 1) {
    throw Error(ErrorKind::ShapeMismatch, "graph input '" + info.name + "' has batch " + std::to_string(shape.dims[0]) +
                                              "; batch is fixed to 1");
  }
  return shape;
}

}  // namespace

NierGraph to_nier(const OnnxSubsetModel& model) {
  NierGraph graph;
  std::map<std::string, const OnnxTensor*> inits;
  for (const auto& t : model.initializers) {
    inits.emplace(t.name, &t);
    graph.tensors.emplace(t.name, to_rational(t));
  }
  for (const auto& in : model.inputs) graph.inputs.push_back(ValueInfo{in.name, input_shape(in)});
  for (std::size_t i = 0; i < model.nodes.size(); ++i) graph.nodes.push_back(convert_node(model.nodes[i], i, inits));
  for (const auto& out : model.outputs) {
    ValueInfo info{out.name, {}};
    TensorShape declared{out.dims};
    if (declared.dims.size() >= 1 && declared.dims[0] < 0) declared.dims[0] = 1;
    const bool concrete = !declared.dims.empty() &&
                          std::all_of(declared.dims.begin(), declared.dims.end(), [](auto d) { return d >= 1; });
    if (concrete) info.shape = declared;
    graph.outputs.push_back(std::move(info));
  }
  graph = infer_shapes(std::move(graph));

  // Conv channel counts follow the weight once shapes are known.
  for (auto& node : graph.nodes) {
    if (node.op != OpKind::Conv2D) continue;
    auto& attrs = std::get<Conv2DAttrs>(node.attrs);
    const auto& w = graph.shape_of(node.inputs[1]);
    attrs.out_channels = w.dims[0];
    attrs.in_channels = w.dims[1];
  }
  return graph;
}

}  // namespace onnx2smt
