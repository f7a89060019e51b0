#include "onnx2smt/lowering.hpp"

#include <algorithm>
#include <functional>

#include "onnx2smt/error.hpp"

namespace onnx2smt {

namespace term {

TermPtr var(std::string name) {
  auto t = std::make_shared<Term>();
  t->kind = Term::Kind::Var;
  t->symbol = std::move(name);
  return t;
}

TermPtr lit(const Rational& value) {
  auto t = std::make_shared<Term>();
  t->kind = Term::Kind::Literal;
  t->value = value;
  return t;
}

TermPtr app(std::string op, std::vector<TermPtr> args) {
  auto t = std::make_shared<Term>();
  t->kind = Term::Kind::App;
  t->symbol = std::move(op);
  t->args = std::move(args);
  return t;
}

TermPtr sum(std::vector<TermPtr> operands) {
  if (operands.empty()) return lit(Rational(0));
  if (operands.size() == 1) return operands.front();
  return app("+", std::move(operands));
}

TermPtr mul(TermPtr a, TermPtr b) { return app("*", {std::move(a), std::move(b)}); }
TermPtr sub(TermPtr a, TermPtr b) { return app("-", {std::move(a), std::move(b)}); }
TermPtr eq(TermPtr a, TermPtr b) { return app("=", {std::move(a), std::move(b)}); }
TermPtr le(TermPtr a, TermPtr b) { return app("<=", {std::move(a), std::move(b)}); }
TermPtr lt(TermPtr a, TermPtr b) { return app("<", {std::move(a), std::move(b)}); }
TermPtr ge(TermPtr a, TermPtr b) { return app(">=", {std::move(a), std::move(b)}); }
TermPtr gt(TermPtr a, TermPtr b) { return app(">", {std::move(a), std::move(b)}); }

TermPtr ite(TermPtr cond, TermPtr then_term, TermPtr else_term) {
  return app("ite", {std::move(cond), std::move(then_term), std::move(else_term)});
}

TermPtr any_of(std::vector<TermPtr> operands) {
  if (operands.size() == 1) return operands.front();
  return app("or", std::move(operands));
}

TermPtr all_of(std::vector<TermPtr> operands) {
  if (operands.size() == 1) return operands.front();
  return app("and", std::move(operands));
}

TermPtr max2(TermPtr a, TermPtr b) { return ite(ge(a, b), a, b); }

TermPtr abs(TermPtr a) { return ite(ge(a, lit(Rational(0))), a, app("-", {a})); }

}  // namespace term

void ConstraintSystem::declare(std::string name, VarRole role) {
  if (!names_.insert(name).second) {
    throw Error(ErrorKind::InternalNamingCollision, "variable '" + name + "' declared twice");
  }
  declarations.push_back(ScalarVar{std::move(name), role});
}

void ConstraintSystem::add(TermPtr t, Section section, std::string defines) {
  assertions.push_back(Assertion{std::move(t), std::move(defines), section});
}

void ConstraintSystem::validate() const {
  std::function<void(const Term&)> visit = [&](const Term& t) {
    if (t.kind == Term::Kind::Var && !declares(t.symbol)) {
      throw Error(ErrorKind::MissingVariable, "'" + t.symbol + "' is referenced but never declared");
    }
    for (const auto& a : t.args) visit(*a);
  };
  for (const auto& a : assertions) visit(*a.term);
}

namespace {

std::string index_suffix(const TensorShape& shape, std::int64_t flat) {
  if (shape.rank() > 4) throw Error(ErrorKind::ShapeMismatch, "tensors above rank 4 cannot be named: " + shape.str());
  const auto idx = unravel(flat, shape);
  std::string out;
  for (std::size_t pad = idx.size(); pad < 4; ++pad) out += "_0";
  for (auto i : idx) out += "_" + std::to_string(i);
  return out;
}

std::string sanitize(const std::string& name) {
  std::string out = name;
  for (char& c : out) {
    const bool ok = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '.';
    if (!ok) c = '_';
  }
  return out;
}

}  // namespace

std::string input_var_name(const TensorShape& shape, std::int64_t flat) {
  return "actual_input" + index_suffix(shape, flat);
}

std::string output_var_name(const TensorShape& shape, std::int64_t flat) {
  return "actual_output" + index_suffix(shape, flat);
}

std::string weight_var_name(const std::string& tensor, std::int64_t flat) {
  return "w_" + sanitize(tensor) + "_" + std::to_string(flat);
}

std::string intermediate_var_name(std::size_t node_index, std::int64_t flat) {
  return "n" + std::to_string(node_index) + "_" + std::to_string(flat);
}

TermPtr lower_relu(TermPtr x) { return term::ite(term::ge(x, term::lit(Rational(0))), x, term::lit(Rational(0))); }

std::vector<TermPtr> lower_conv2d(const Conv2DAttrs& attrs, const TensorShape& in_shape, std::span<const TermPtr> in,
                                  const TensorShape& kernel_shape, std::span<const TermPtr> kernel,
                                  std::span<const TermPtr> bias) {
  if (in_shape.rank() != 4 || kernel_shape.rank() != 4 || kernel_shape.dims[1] != in_shape.dims[1] ||
      static_cast<std::int64_t>(in.size()) != in_shape.element_count() ||
      static_cast<std::int64_t>(kernel.size()) != kernel_shape.element_count() ||
      (!bias.empty() && static_cast<std::int64_t>(bias.size()) != kernel_shape.dims[0])) {
    throw Error(ErrorKind::ShapeMismatch, "conv2d operands " + in_shape.str() + " / " + kernel_shape.str());
  }
  const auto c_in = in_shape.dims[1];
  const auto height = in_shape.dims[2];
  const auto width = in_shape.dims[3];
  const auto kh = kernel_shape.dims[2];
  const auto kw = kernel_shape.dims[3];
  const auto out_h = (height + attrs.pads[0] + attrs.pads[2] - kh) / attrs.strides[0] + 1;
  const auto out_w = (width + attrs.pads[1] + attrs.pads[3] - kw) / attrs.strides[1] + 1;

  std::vector<TermPtr> out;
  out.reserve(static_cast<std::size_t>(kernel_shape.dims[0] * out_h * out_w));
  for (std::int64_t co = 0; co < kernel_shape.dims[0]; ++co) {
    for (std::int64_t oh = 0; oh < out_h; ++oh) {
      for (std::int64_t ow = 0; ow < out_w; ++ow) {
        std::vector<TermPtr> products;
        for (std::int64_t ci = 0; ci < c_in; ++ci) {
          for (std::int64_t i = 0; i < kh; ++i) {
            for (std::int64_t j = 0; j < kw; ++j) {
              const auto h = oh * attrs.strides[0] - attrs.pads[0] + i;
              const auto v = ow * attrs.strides[1] - attrs.pads[1] + j;
              if (h < 0 || h >= height || v < 0 || v >= width) continue;
              products.push_back(term::mul(kernel[static_cast<std::size_t>(((co * c_in + ci) * kh + i) * kw + j)],
                                           in[static_cast<std::size_t>((ci * height + h) * width + v)]));
            }
          }
        }
        if (!bias.empty()) products.push_back(bias[static_cast<std::size_t>(co)]);
        out.push_back(term::sum(std::move(products)));
      }
    }
  }
  return out;
}

std::vector<TermPtr> lower_maxpool(const MaxPool2DAttrs& attrs, const TensorShape& in_shape,
                                   std::span<const TermPtr> in) {
  if (in_shape.rank() != 4 || static_cast<std::int64_t>(in.size()) != in_shape.element_count()) {
    throw Error(ErrorKind::ShapeMismatch, "maxpool input " + in_shape.str());
  }
  const auto channels = in_shape.dims[1];
  const auto height = in_shape.dims[2];
  const auto width = in_shape.dims[3];
  const auto padded_h = height + attrs.pads[0] + attrs.pads[2];
  const auto padded_w = width + attrs.pads[1] + attrs.pads[3];
  if (padded_h < attrs.kernel[0] || padded_w < attrs.kernel[1]) {
    throw Error(ErrorKind::EmptyWindow, "kernel larger than padded input " + in_shape.str());
  }
  const auto out_h = (padded_h - attrs.kernel[0]) / attrs.strides[0] + 1;
  const auto out_w = (padded_w - attrs.kernel[1]) / attrs.strides[1] + 1;

  std::vector<TermPtr> out;
  for (std::int64_t c = 0; c < channels; ++c) {
    for (std::int64_t oh = 0; oh < out_h; ++oh) {
      for (std::int64_t ow = 0; ow < out_w; ++ow) {
        TermPtr acc;
        for (std::int64_t i = 0; i < attrs.kernel[0]; ++i) {
          for (std::int64_t j = 0; j < attrs.kernel[1]; ++j) {
            const auto h = oh * attrs.strides[0] - attrs.pads[0] + i;
            const auto v = ow * attrs.strides[1] - attrs.pads[1] + j;
            if (h < 0 || h >= height || v < 0 || v >= width) continue;
            const TermPtr& x = in[static_cast<std::size_t>((c * height + h) * width + v)];
            acc = acc ? term::max2(acc, x) : x;
          }
        }
        if (!acc) throw Error(ErrorKind::EmptyWindow, "max-pool window lies entirely in padding");
        out.push_back(acc);
      }
    }
  }
  return out;
}

namespace {

std::vector<TermPtr> broadcast_operand(const std::vector<TermPtr>& src, const TensorShape& src_shape,
                                       const TensorShape& out_shape) {
  const auto strides = strides_of(src_shape);
  const std::size_t offset = out_shape.rank() - src_shape.rank();
  std::vector<TermPtr> out;
  out.reserve(static_cast<std::size_t>(out_shape.element_count()));
  for (std::int64_t i = 0; i < out_shape.element_count(); ++i) {
    const auto idx = unravel(i, out_shape);
    std::int64_t flat = 0;
    for (std::size_t d = 0; d < src_shape.rank(); ++d) {
      if (src_shape.dims[d] != 1) flat += idx[offset + d] * strides[d];
    }
    out.push_back(src[static_cast<std::size_t>(flat)]);
  }
  return out;
}

std::vector<TermPtr> affine_product(const std::vector<TermPtr>& a, const TensorShape& a_shape,
                                    const std::vector<TermPtr>& b, const TensorShape& b_shape, bool trans_b) {
  const auto m = a_shape.dims[0];
  const auto k = a_shape.dims[1];
  const auto n = trans_b ? b_shape.dims[0] : b_shape.dims[1];
  std::vector<TermPtr> out;
  out.reserve(static_cast<std::size_t>(m * n));
  for (std::int64_t i = 0; i < m; ++i) {
    for (std::int64_t j = 0; j < n; ++j) {
      std::vector<TermPtr> products;
      products.reserve(static_cast<std::size_t>(k));
      for (std::int64_t p = 0; p < k; ++p) {
        const auto b_index = trans_b ? j * k + p : p * n + j;
        products.push_back(term::mul(a[static_cast<std::size_t>(i * k + p)], b[static_cast<std::size_t>(b_index)]));
      }
      out.push_back(term::sum(std::move(products)));
    }
  }
  return out;
}

}  // namespace

ConstraintSystem lower_graph(const NierGraph& input_graph) {
  const NierGraph g = rewrite(input_graph, RuleSet{}.with(RewriteRule::GemmNormalization));
  if (g.inputs.size() != 1 || g.outputs.size() != 1) {
    throw Error(ErrorKind::ShapeMismatch, "lowering expects exactly one graph input and one graph output");
  }
  ConstraintSystem cs;
  cs.input_shape = g.inputs[0].shape;
  cs.output_shape = g.outputs[0].shape;
  const std::string& output_name = g.outputs[0].name;

  std::map<std::string, std::vector<TermPtr>> values;

  auto& in_terms = values[g.inputs[0].name];
  for (std::int64_t i = 0; i < cs.input_shape.element_count(); ++i) {
    std::string name = input_var_name(cs.input_shape, i);
    cs.declare(name, VarRole::Input);
    cs.input_vars.push_back(name);
    in_terms.push_back(term::var(std::move(name)));
  }

  auto declare_constant = [&](const std::string& tensor) {
    if (values.count(tensor)) return;
    const RationalTensor* value = g.constant(tensor);
    auto& terms = values[tensor];
    for (std::int64_t i = 0; i < value->shape.element_count(); ++i) {
      std::string name = weight_var_name(tensor, i);
      const Rational& v = value->data[static_cast<std::size_t>(i)];
      cs.declare(name, VarRole::Weight);
      cs.weight_values.emplace(name, v);
      cs.add(term::eq(term::var(name), term::lit(v)), Section::Network, name);
      terms.push_back(term::var(std::move(name)));
    }
  };

  for (const auto& node : g.nodes) {
    if (node.op == OpKind::Constant) continue;
    for (const auto& in : node.inputs) {
      if (g.constant(in) != nullptr) declare_constant(in);
    }
  }

  for (std::size_t k = 0; k < g.nodes.size(); ++k) {
    const NierNode& node = g.nodes[k];
    if (node.op == OpKind::Constant) continue;
    auto operand = [&](std::size_t i) -> const std::vector<TermPtr>& { return values.at(node.inputs.at(i)); };
    auto operand_shape = [&](std::size_t i) -> const TensorShape& { return g.shape_of(node.inputs.at(i)); };
    const TensorShape& out_shape = g.shape_of(node.outputs[0]);

    std::vector<TermPtr> rhs;
    switch (node.op) {
      case OpKind::Add:
        rhs.reserve(static_cast<std::size_t>(out_shape.element_count()));
        {
          const auto a = broadcast_operand(operand(0), operand_shape(0), out_shape);
          const auto b = broadcast_operand(operand(1), operand_shape(1), out_shape);
          for (std::size_t i = 0; i < a.size(); ++i) rhs.push_back(term::sum({a[i], b[i]}));
        }
        break;
      case OpKind::MatMul:
        rhs = affine_product(operand(0), operand_shape(0), operand(1), operand_shape(1), false);
        break;
      case OpKind::Gemm: {
        const auto& attrs = std::get<GemmAttrs>(node.attrs);
        rhs = affine_product(operand(0), operand_shape(0), operand(1), operand_shape(1), attrs.trans_b);
        std::vector<TermPtr> bias;
        if (node.inputs.size() > 2) bias = broadcast_operand(operand(2), operand_shape(2), out_shape);
        for (std::size_t i = 0; i < rhs.size(); ++i) {
          TermPtr t = attrs.alpha == 1 ? rhs[i] : term::mul(term::lit(attrs.alpha), rhs[i]);
          if (!bias.empty()) {
            t = term::sum({t, attrs.beta == 1 ? bias[i] : term::mul(term::lit(attrs.beta), bias[i])});
          }
          rhs[i] = t;
        }
        break;
      }
      case OpKind::Relu:
        for (const auto& x : operand(0)) rhs.push_back(lower_relu(x));
        break;
      case OpKind::Conv2D: {
        std::span<const TermPtr> bias;
        if (node.inputs.size() > 2) bias = operand(2);
        rhs = lower_conv2d(std::get<Conv2DAttrs>(node.attrs), operand_shape(0), operand(0), operand_shape(1),
                           operand(1), bias);
        break;
      }
      case OpKind::MaxPool2D:
        rhs = lower_maxpool(std::get<MaxPool2DAttrs>(node.attrs), operand_shape(0), operand(0));
        break;
      case OpKind::Flatten:
      case OpKind::Identity:
        rhs = operand(0);
        break;
      case OpKind::Constant:
        break;
    }

    const bool is_output = node.outputs[0] == output_name;
    auto& terms = values[node.outputs[0]];
    for (std::size_t i = 0; i < rhs.size(); ++i) {
      const auto flat = static_cast<std::int64_t>(i);
      std::string name = is_output ? output_var_name(out_shape, flat) : intermediate_var_name(k, flat);
      cs.declare(name, is_output ? VarRole::Output : VarRole::Intermediate);
      if (is_output) cs.output_vars.push_back(name);
      cs.add(term::eq(term::var(name), rhs[i]), Section::Network, name);
      terms.push_back(term::var(std::move(name)));
    }
  }

  if (cs.output_vars.empty()) {
    // The output is a constant or the input itself.
    if (g.constant(output_name) != nullptr) declare_constant(output_name);
    const auto& src = values.at(output_name);
    for (std::size_t i = 0; i < src.size(); ++i) {
      std::string name = output_var_name(cs.output_shape, static_cast<std::int64_t>(i));
      cs.declare(name, VarRole::Output);
      cs.output_vars.push_back(name);
      cs.add(term::eq(term::var(name), src[i]), Section::Network, name);
    }
  }
  return cs;
}

}  // namespace onnx2smt
