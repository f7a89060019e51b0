#include "onnx2smt/oracle.hpp"

#include <algorithm>
#include <atomic>
#include <limits>
#include <optional>
#include <thread>

#include "onnx2smt/error.hpp"
#include "shape_rules.hpp"

namespace onnx2smt {

namespace kernels {

namespace {

// Maps an output index to the flat index of a broadcast operand.
std::int64_t broadcast_source(const std::vector<std::int64_t>& out_index, const TensorShape& src,
                              const std::vector<std::int64_t>& src_strides) {
  const std::size_t offset = out_index.size() - src.rank();
  std::int64_t flat = 0;
  for (std::size_t i = 0; i < src.rank(); ++i) {
    if (src.dims[i] != 1) flat += out_index[offset + i] * src_strides[i];
  }
  return flat;
}

}  // namespace

RationalTensor add(const RationalTensor& a, const RationalTensor& b) {
  auto out = RationalTensor::zeros(broadcast_shape(a.shape, b.shape, "Add"));
  const auto sa = strides_of(a.shape);
  const auto sb = strides_of(b.shape);
  for (std::int64_t i = 0; i < out.shape.element_count(); ++i) {
    const auto idx = unravel(i, out.shape);
    out.data[static_cast<std::size_t>(i)] = a.data[static_cast<std::size_t>(broadcast_source(idx, a.shape, sa))] +
                                            b.data[static_cast<std::size_t>(broadcast_source(idx, b.shape, sb))];
  }
  return out;
}

RationalTensor matmul(const RationalTensor& a, const RationalTensor& b) {
  if (a.shape.rank() != 2 || b.shape.rank() != 2 || a.shape.dims[1] != b.shape.dims[0]) {
    throw Error(ErrorKind::ShapeMismatch, "MatMul " + a.shape.str() + " * " + b.shape.str());
  }
  const auto m = a.shape.dims[0];
  const auto k = a.shape.dims[1];
  const auto n = b.shape.dims[1];
  auto out = RationalTensor::zeros(TensorShape{{m, n}});
  for (std::int64_t i = 0; i < m; ++i) {
    for (std::int64_t j = 0; j < n; ++j) {
      Rational acc;
      for (std::int64_t p = 0; p < k; ++p) {
        acc += a.data[static_cast<std::size_t>(i * k + p)] * b.data[static_cast<std::size_t>(p * n + j)];
      }
      out.data[static_cast<std::size_t>(i * n + j)] = acc;
    }
  }
  return out;
}

RationalTensor gemm(const RationalTensor& a, const RationalTensor& b, const RationalTensor* c,
                    const GemmAttrs& attrs) {
  RationalTensor bt = b;
  if (attrs.trans_b) {
    if (b.shape.rank() != 2) throw Error(ErrorKind::ShapeMismatch, "Gemm B must be 2-D");
    const auto rows = b.shape.dims[0];
    const auto cols = b.shape.dims[1];
    bt = RationalTensor::zeros(TensorShape{{cols, rows}});
    for (std::int64_t r = 0; r < rows; ++r) {
      for (std::int64_t col = 0; col < cols; ++col) {
        bt.data[static_cast<std::size_t>(col * rows + r)] = b.data[static_cast<std::size_t>(r * cols + col)];
      }
    }
  }
  RationalTensor out = matmul(a, bt);
  for (auto& v : out.data) v *= attrs.alpha;
  if (c != nullptr) {
    RationalTensor scaled = *c;
    for (auto& v : scaled.data) v *= attrs.beta;
    out = add(out, scaled);
  }
  return out;
}

RationalTensor relu(const RationalTensor& x) {
  RationalTensor out = x;
  for (auto& v : out.data) {
    if (sgn(v) < 0) v = 0;
  }
  return out;
}

RationalTensor conv2d(const RationalTensor& x, const RationalTensor& w, const RationalTensor* bias,
                      const Conv2DAttrs& attrs) {
  NierNode probe{"conv", OpKind::Conv2D, {}, {}, attrs};
  const TensorShape out_shape = infer_node_shape(probe, {&x.shape, &w.shape, bias ? &bias->shape : nullptr});
  auto out = RationalTensor::zeros(out_shape);
  const auto channels_in = x.shape.dims[1];
  const auto height = x.shape.dims[2];
  const auto width = x.shape.dims[3];
  const auto kh = attrs.kernel[0];
  const auto kw = attrs.kernel[1];
  std::size_t o = 0;
  for (std::int64_t co = 0; co < out_shape.dims[1]; ++co) {
    for (std::int64_t oh = 0; oh < out_shape.dims[2]; ++oh) {
      for (std::int64_t ow = 0; ow < out_shape.dims[3]; ++ow) {
        Rational acc = bias ? bias->data[static_cast<std::size_t>(co)] : Rational(0);
        for (std::int64_t ci = 0; ci < channels_in; ++ci) {
          for (std::int64_t i = 0; i < kh; ++i) {
            for (std::int64_t j = 0; j < kw; ++j) {
              const auto h = oh * attrs.strides[0] - attrs.pads[0] + i;
              const auto v = ow * attrs.strides[1] - attrs.pads[1] + j;
              if (h < 0 || h >= height || v < 0 || v >= width) continue;
              acc += w.data[static_cast<std::size_t>(((co * channels_in + ci) * kh + i) * kw + j)] *
                     x.data[static_cast<std::size_t>((ci * height + h) * width + v)];
            }
          }
        }
        out.data[o++] = acc;
      }
    }
  }
  return out;
}

RationalTensor maxpool2d(const RationalTensor& x, const MaxPool2DAttrs& attrs) {
  NierNode probe{"maxpool", OpKind::MaxPool2D, {}, {}, attrs};
  const TensorShape out_shape = infer_node_shape(probe, {&x.shape});
  auto out = RationalTensor::zeros(out_shape);
  const auto height = x.shape.dims[2];
  const auto width = x.shape.dims[3];
  std::size_t o = 0;
  for (std::int64_t c = 0; c < out_shape.dims[1]; ++c) {
    for (std::int64_t oh = 0; oh < out_shape.dims[2]; ++oh) {
      for (std::int64_t ow = 0; ow < out_shape.dims[3]; ++ow) {
        std::optional<Rational> best;
        for (std::int64_t i = 0; i < attrs.kernel[0]; ++i) {
          for (std::int64_t j = 0; j < attrs.kernel[1]; ++j) {
            const auto h = oh * attrs.strides[0] - attrs.pads[0] + i;
            const auto v = ow * attrs.strides[1] - attrs.pads[1] + j;
            if (h < 0 || h >= height || v < 0 || v >= width) continue;
            const Rational& candidate = x.data[static_cast<std::size_t>((c * height + h) * width + v)];
            if (!best || candidate > *best) best = candidate;
          }
        }
        if (!best) throw Error(ErrorKind::EmptyWindow, "max-pool window lies entirely in padding");
        out.data[o++] = *best;
      }
    }
  }
  return out;
}

RationalTensor flatten(const RationalTensor& x, std::int64_t axis) {
  NierNode probe{"flatten", OpKind::Flatten, {}, {}, FlattenAttrs{axis}};
  return RationalTensor(infer_node_shape(probe, {&x.shape}), x.data);
}

RationalTensor evaluate(const NierNode& node, std::span<const RationalTensor* const> inputs) {
  auto in = [&](std::size_t i) -> const RationalTensor& {
    if (i >= inputs.size() || inputs[i] == nullptr) {
      throw Error(ErrorKind::ShapeMismatch, "node '" + node.name + "' is missing input #" + std::to_string(i));
    }
    return *inputs[i];
  };
  auto optional_in = [&](std::size_t i) -> const RationalTensor* { return i < inputs.size() ? inputs[i] : nullptr; };

  switch (node.op) {
    case OpKind::Gemm: return gemm(in(0), in(1), optional_in(2), std::get<GemmAttrs>(node.attrs));
    case OpKind::MatMul: return matmul(in(0), in(1));
    case OpKind::Add: return add(in(0), in(1));
    case OpKind::Relu: return relu(in(0));
    case OpKind::Conv2D: return conv2d(in(0), in(1), optional_in(2), std::get<Conv2DAttrs>(node.attrs));
    case OpKind::MaxPool2D: return maxpool2d(in(0), std::get<MaxPool2DAttrs>(node.attrs));
    case OpKind::Flatten: return flatten(in(0), std::get<FlattenAttrs>(node.attrs).axis);
    case OpKind::Constant: return std::get<ConstantAttrs>(node.attrs).value;
    case OpKind::Identity: return in(0);
  }
  throw Error(ErrorKind::UnsupportedOperator, std::string(to_string(node.op)));
}

}  // namespace kernels

namespace {

void check_single_input(const NierGraph& graph, const RationalTensor& input) {
  if (graph.inputs.size() != 1) {
    throw Error(ErrorKind::ShapeMismatch, "expected exactly one graph input, found " +
                                              std::to_string(graph.inputs.size()));
  }
  if (input.shape != graph.inputs[0].shape) {
    throw Error(ErrorKind::ShapeMismatch, "input shape " + input.shape.str() + " does not match graph input " +
                                              graph.inputs[0].shape.str());
  }
}

// Forward pass that records node outputs only; constants are read in place.
class ForwardPass {
 public:
  explicit ForwardPass(const NierGraph& graph) : graph_(graph), order_(topo_order(graph)) {}

  std::map<std::string, RationalTensor> run(const RationalTensor& input) const {
    check_single_input(graph_, input);
    std::map<std::string, RationalTensor> produced;
    auto lookup = [&](const std::string& name) -> const RationalTensor* {
      if (name == graph_.inputs[0].name) return &input;
      if (auto it = graph_.tensors.find(name); it != graph_.tensors.end()) return &it->second;
      if (auto it = produced.find(name); it != produced.end()) return &it->second;
      throw Error(ErrorKind::ShapeMismatch, "undefined tensor '" + name + "'");
    };
    for (std::size_t i : order_) {
      const auto& node = graph_.nodes[i];
      std::vector<const RationalTensor*> args;
      args.reserve(node.inputs.size());
      for (const auto& name : node.inputs) args.push_back(name.empty() ? nullptr : lookup(name));
      produced.insert_or_assign(node.outputs.at(0), kernels::evaluate(node, args));
    }
    return produced;
  }

  RationalTensor output(const std::map<std::string, RationalTensor>& produced, const RationalTensor& input,
                        const std::string& name) const {
    if (auto it = produced.find(name); it != produced.end()) return it->second;
    if (name == graph_.inputs[0].name) return input;
    return graph_.tensors.at(name);
  }

 private:
  const NierGraph& graph_;
  std::vector<std::size_t> order_;
};

}  // namespace

ExactResult eval_exact(const NierGraph& graph, const RationalTensor& input) {
  const ForwardPass pass(graph);
  auto produced = pass.run(input);
  ExactResult result;
  for (const auto& out : graph.outputs) result.outputs.push_back(pass.output(produced, input, out.name));
  result.trace = std::move(produced);
  result.trace.emplace(graph.inputs[0].name, input);
  for (const auto& [name, t] : graph.tensors) result.trace.emplace(name, t);
  return result;
}

namespace {

std::vector<bool> obstacles_of(std::uint64_t code, std::int64_t pixels) {
  // pixel 0 is the most significant bit: counting order is lexicographic
  std::vector<bool> flags(static_cast<std::size_t>(pixels));
  for (std::int64_t p = 0; p < pixels; ++p) flags[static_cast<std::size_t>(p)] = ((code >> (pixels - 1 - p)) & 1u) != 0;
  return flags;
}

}  // namespace

Verdict brute_force_verify(const NierGraph& graph, const SimulatorSpec& sim, const PropertySpec& prop,
                           const BruteForceOptions& options) {
  sim.validate();
  if (sim.pixels.kind != PixelDomain::Kind::Binary) {
    throw Error(ErrorKind::InvalidSpec, "exhaustive verification needs a Binary pixel domain");
  }
  const std::int64_t pixels = sim.grid.pixels();
  if (pixels >= 63 || (std::uint64_t{1} << pixels) > options.max_renders) {
    throw Error(ErrorKind::GridTooLarge, "grid " + std::to_string(sim.grid.height) + "x" +
                                             std::to_string(sim.grid.width) + " needs 2^" + std::to_string(pixels) +
                                             " renders, cap is " + std::to_string(options.max_renders));
  }
  if (graph.outputs.size() != 1) throw Error(ErrorKind::ShapeMismatch, "expected exactly one graph output");
  validate_property(prop, sim, graph.outputs[0].shape, graph.inputs.at(0).shape);

  const std::uint64_t total = std::uint64_t{1} << pixels;
  const unsigned workers = std::max(1u, options.threads);
  std::atomic<std::uint64_t> first_violation{std::numeric_limits<std::uint64_t>::max()};
  std::atomic<std::uint64_t> evaluations{0};

  // Each worker scans a strided slice and stops once it passes the best
  // witness found so far; the minimum code wins, so the result does not
  // depend on scheduling.
  const ForwardPass pass(graph);
  const std::string& output_name = graph.outputs[0].name;
  auto scan = [&](unsigned worker) {
    std::uint64_t local = 0;
    for (std::uint64_t code = worker; code < total; code += workers) {
      if (code > first_violation.load(std::memory_order_relaxed)) break;
      const RationalTensor image = sim.render(obstacles_of(code, pixels));
      const auto produced = pass.run(image);
      ++local;
      if (violates(prop, sim, image, pass.output(produced, image, output_name))) {
        std::uint64_t seen = first_violation.load();
        while (code < seen && !first_violation.compare_exchange_weak(seen, code)) {
        }
        break;
      }
    }
    evaluations += local;
  };

  if (workers == 1) {
    scan(0);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(scan, w);
  }

  Verdict verdict;
  verdict.solver = "oracle";
  verdict.evaluations = evaluations.load();
  const std::uint64_t found = first_violation.load();
  if (found == std::numeric_limits<std::uint64_t>::max()) {
    verdict.status = VerdictStatus::Proven;
    return verdict;
  }
  verdict.status = VerdictStatus::Falsified;
  Counterexample witness;
  const auto flags = obstacles_of(found, pixels);
  witness.image = sim.render(flags);
  for (std::int64_t p = 0; p < pixels; ++p) {
    if (flags[static_cast<std::size_t>(p)]) witness.obstacles.emplace_back(p / sim.grid.width, p % sim.grid.width);
  }
  witness.confirmed = true;
  verdict.witness = std::move(witness);
  return verdict;
}

}  // namespace onnx2smt
