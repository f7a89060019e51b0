#include <algorithm>
#include <set>

#include "onnx2smt/error.hpp"
#include "onnx2smt/nier.hpp"
#include "onnx2smt/oracle.hpp"

namespace onnx2smt {

RuleSet RuleSet::all() {
  return RuleSet{}
      .with(RewriteRule::ConstantFolding)
      .with(RewriteRule::IdentityElimination)
      .with(RewriteRule::FlattenFusion)
      .with(RewriteRule::GemmNormalization);
}

namespace {

bool is_graph_output(const NierGraph& g, const std::string& name) {
  return std::any_of(g.outputs.begin(), g.outputs.end(), [&](const ValueInfo& v) { return v.name == name; });
}

std::size_t consumer_count(const NierGraph& g, const std::string& name) {
  std::size_t n = 0;
  for (const auto& node : g.nodes) n += static_cast<std::size_t>(std::count(node.inputs.begin(), node.inputs.end(), name));
  return n;
}

void replace_uses(NierGraph& g, const std::string& from, const std::string& to) {
  for (auto& node : g.nodes) std::replace(node.inputs.begin(), node.inputs.end(), from, to);
}

bool name_taken(const NierGraph& g, const std::string& name) {
  if (g.tensors.count(name) || g.is_input(name)) return true;
  return std::any_of(g.nodes.begin(), g.nodes.end(), [&](const NierNode& n) {
    return std::find(n.outputs.begin(), n.outputs.end(), name) != n.outputs.end();
  });
}

std::string fresh_name(const NierGraph& g, const std::string& base) {
  std::string name = base;
  for (int i = 1; name_taken(g, name); ++i) name = base + "_" + std::to_string(i);
  return name;
}

// Drops constants that nothing reads any more, restricted to `candidates`.
void prune_constants(NierGraph& g, const std::set<std::string>& candidates) {
  for (const auto& name : candidates) {
    if (consumer_count(g, name) != 0 || is_graph_output(g, name)) continue;
    g.tensors.erase(name);
    std::erase_if(g.nodes, [&](const NierNode& n) { return n.op == OpKind::Constant && n.outputs.at(0) == name; });
  }
}

bool fold_constants(NierGraph& g) {
  bool changed = false;
  std::set<std::string> released;
  for (auto& node : g.nodes) {
    if (node.op == OpKind::Constant) continue;
    std::vector<const RationalTensor*> args;
    bool all_constant = !node.inputs.empty();
    for (const auto& in : node.inputs) {
      if (in.empty()) {
        args.push_back(nullptr);
        continue;
      }
      const RationalTensor* value = g.constant(in);
      if (value == nullptr) {
        all_constant = false;
        break;
      }
      args.push_back(value);
    }
    if (!all_constant) continue;
    RationalTensor folded = kernels::evaluate(node, args);
    for (const auto& in : node.inputs) {
      if (!in.empty()) released.insert(in);
    }
    node.op = OpKind::Constant;
    node.inputs.clear();
    node.attrs = ConstantAttrs{std::move(folded)};
    changed = true;
  }
  prune_constants(g, released);
  return changed;
}

bool eliminate_identities(NierGraph& g) {
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const NierNode& node = g.nodes[i];
    if (node.op != OpKind::Identity) continue;
    const std::string src = node.inputs.at(0);
    const std::string dst = node.outputs.at(0);
    if (!is_graph_output(g, dst)) {
      g.nodes.erase(g.nodes.begin() + static_cast<std::ptrdiff_t>(i));
      replace_uses(g, dst, src);
      return true;
    }
    // The output name is public: hand it to the producer of `src` instead.
    auto producer = std::find_if(g.nodes.begin(), g.nodes.end(), [&](const NierNode& n) {
      return n.op != OpKind::Constant && n.outputs.at(0) == src;
    });
    if (producer == g.nodes.end() || is_graph_output(g, src) || consumer_count(g, src) != 1) continue;
    producer->outputs[0] = dst;
    g.nodes.erase(g.nodes.begin() + static_cast<std::ptrdiff_t>(i));
    return true;
  }
  return false;
}

bool fuse_flattens(NierGraph& g) {
  for (auto& outer : g.nodes) {
    if (outer.op != OpKind::Flatten) continue;
    const std::string mid = outer.inputs.at(0);
    auto inner = std::find_if(g.nodes.begin(), g.nodes.end(), [&](const NierNode& n) {
      return n.op == OpKind::Flatten && n.outputs.at(0) == mid;
    });
    if (inner == g.nodes.end() || consumer_count(g, mid) != 1 || is_graph_output(g, mid)) continue;

    const std::string src = inner->inputs.at(0);
    const auto src_rank = static_cast<std::int64_t>(g.shape_of(src).rank());
    std::int64_t inner_axis = std::get<FlattenAttrs>(inner->attrs).axis;
    if (inner_axis < 0) inner_axis += src_rank;
    std::int64_t outer_axis = std::get<FlattenAttrs>(outer.attrs).axis;
    if (outer_axis < 0) outer_axis += 2;
    // The inner result is 2-D (P, Q); the outer axis picks (1, PQ), (P, Q) or (PQ, 1).
    const std::int64_t fused = outer_axis == 0 ? 0 : outer_axis == 1 ? inner_axis : src_rank;

    outer.inputs[0] = src;
    outer.attrs = FlattenAttrs{fused};
    g.nodes.erase(inner);
    return true;
  }
  return false;
}

bool normalize_gemm(NierGraph& g) {
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    if (g.nodes[i].op != OpKind::Gemm) continue;
    const NierNode gemm = g.nodes[i];
    const auto& attrs = std::get<GemmAttrs>(gemm.attrs);
    if (attrs.alpha != 1 || attrs.beta != 1) continue;

    std::string weight = gemm.inputs.at(1);
    if (attrs.trans_b) {
      const RationalTensor* b = g.constant(weight);
      if (b == nullptr) continue;
      const auto rows = b->shape.dims.at(0);
      const auto cols = b->shape.dims.at(1);
      RationalTensor t = RationalTensor::zeros(TensorShape{{cols, rows}});
      for (std::int64_t r = 0; r < rows; ++r) {
        for (std::int64_t c = 0; c < cols; ++c) {
          t.data[static_cast<std::size_t>(c * rows + r)] = b->data[static_cast<std::size_t>(r * cols + c)];
        }
      }
      const bool sole_initializer_use = g.tensors.count(weight) && consumer_count(g, weight) == 1 &&
                                        !is_graph_output(g, weight);
      if (sole_initializer_use) {
        g.tensors[weight] = std::move(t);
      } else {
        weight = fresh_name(g, weight + "_T");
        g.tensors.emplace(weight, std::move(t));
      }
    }

    const bool has_bias = gemm.inputs.size() > 2 && !gemm.inputs[2].empty();
    const std::string out = gemm.outputs.at(0);
    NierNode matmul{gemm.name + "_matmul", OpKind::MatMul, {gemm.inputs[0], weight},
                    {has_bias ? fresh_name(g, out + "_matmul") : out}, std::monostate{}};
    std::vector<NierNode> replacement{matmul};
    if (has_bias) {
      replacement.push_back(
          NierNode{gemm.name + "_add", OpKind::Add, {matmul.outputs[0], gemm.inputs[2]}, {out}, std::monostate{}});
    }
    g.nodes.erase(g.nodes.begin() + static_cast<std::ptrdiff_t>(i));
    g.nodes.insert(g.nodes.begin() + static_cast<std::ptrdiff_t>(i), replacement.begin(), replacement.end());
    return true;
  }
  return false;
}

}  // namespace

NierGraph rewrite(const NierGraph& graph, RuleSet rules) {
  NierGraph g = infer_shapes(graph);
  for (bool changed = true; changed;) {
    changed = false;
    if (rules.has(RewriteRule::ConstantFolding)) changed |= fold_constants(g);
    if (rules.has(RewriteRule::IdentityElimination)) changed |= eliminate_identities(g);
    if (rules.has(RewriteRule::FlattenFusion)) changed |= fuse_flattens(g);
    if (rules.has(RewriteRule::GemmNormalization)) changed |= normalize_gemm(g);
    if (changed) g = infer_shapes(std::move(g));
  }
  return g;
}

}  // namespace onnx2smt
