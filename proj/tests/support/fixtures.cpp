#include "fixtures.hpp"

#include <unistd.h>

#include <filesystem>

namespace fixtures {

using namespace onnx2smt;

namespace {

OnnxAttribute int_attr(const std::string& name, std::int64_t v) {
  OnnxAttribute a;
  a.name = name;
  a.type = OnnxAttribute::Type::Int;
  a.i = v;
  return a;
}

OnnxTensor tensor(const std::string& name, std::vector<std::int64_t> dims, std::vector<float> values) {
  OnnxTensor t;
  t.name = name;
  t.dims = std::move(dims);
  t.float_data = std::move(values);
  return t;
}

std::int64_t zone_rows(std::int64_t height) { return (height + 1) / 2; }

Dense single_layer(std::int64_t height, std::int64_t width, float no_alert_bias) {
  const std::int64_t n = height * width;
  Dense d{std::vector<float>(static_cast<std::size_t>(2 * n), 0.0F), {no_alert_bias, 0.0F}, n, 2};
  for (std::int64_t p = (height - zone_rows(height)) * width; p < n; ++p) d.weight[static_cast<std::size_t>(n + p)] = 1.0F;
  return d;
}

float dyadic(std::mt19937_64& rng, int bits = 3) {
  const int scale = 1 << bits;
  std::uniform_int_distribution<int> d(-scale, scale);
  return static_cast<float>(d(rng)) / static_cast<float>(scale);
}

Dense random_dense(std::int64_t in, std::int64_t out, std::mt19937_64& rng) {
  Dense d;
  d.in = in;
  d.out = out;
  for (std::int64_t i = 0; i < in * out; ++i) d.weight.push_back(dyadic(rng));
  for (std::int64_t i = 0; i < out; ++i) d.bias.push_back(dyadic(rng));
  return d;
}

}  // namespace

OnnxSubsetModel mlp(std::int64_t height, std::int64_t width, const std::vector<Dense>& layers) {
  OnnxSubsetModel m;
  m.producer_name = "fixtures";
  m.graph_name = "mlp";
  m.inputs.push_back({"input", 1, {1, 1, height, width}});
  m.nodes.push_back({"flatten", "Flatten", "", {"input"}, {"flat"}, {int_attr("axis", 1)}});
  std::string cur = "flat";
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& d = layers[l];
    const std::string idx = std::to_string(l);
    m.initializers.push_back(tensor("fc" + idx + ".weight", {d.out, d.in}, d.weight));
    m.initializers.push_back(tensor("fc" + idx + ".bias", {d.out}, d.bias));
    const bool last = l + 1 == layers.size();
    const std::string out = last ? "output" : "gemm" + idx;
    m.nodes.push_back({"fc" + idx, "Gemm", "", {cur, "fc" + idx + ".weight", "fc" + idx + ".bias"}, {out},
                       {int_attr("transB", 1)}});
    cur = out;
    if (!last) {
      m.nodes.push_back({"relu" + idx, "Relu", "", {cur}, {"relu" + idx}, {}});
      cur = "relu" + idx;
    }
  }
  m.outputs.push_back({cur, 1, {1, layers.back().out}});
  return m;
}

OnnxSubsetModel correct_net(std::int64_t height, std::int64_t width) {
  return mlp(height, width, {single_layer(height, width, 0.5F)});
}

OnnxSubsetModel correct_deep_net(std::int64_t height, std::int64_t width) {
  // hidden = [zone count, 1/2] -> logits = [h1, h0]
  const std::int64_t n = height * width;
  Dense first{std::vector<float>(static_cast<std::size_t>(2 * n), 0.0F), {0.0F, 0.5F}, n, 2};
  for (std::int64_t p = (height - zone_rows(height)) * width; p < n; ++p) first.weight[static_cast<std::size_t>(p)] = 1.0F;
  Dense second{{0.0F, 1.0F, 1.0F, 0.0F}, {0.0F, 0.0F}, 2, 2};
  return mlp(height, width, {first, second});
}

OnnxSubsetModel zero_net(std::int64_t height, std::int64_t width) {
  Dense d = single_layer(height, width, 0.0F);
  std::fill(d.weight.begin(), d.weight.end(), 0.0F);
  return mlp(height, width, {d});
}

OnnxSubsetModel always_alert_net(std::int64_t height, std::int64_t width) {
  Dense d = single_layer(height, width, 0.0F);
  std::fill(d.weight.begin(), d.weight.end(), 0.0F);
  d.bias = {0.0F, 1.0F};
  return mlp(height, width, {d});
}

OnnxSubsetModel blind_spot_net(std::int64_t height, std::int64_t width) {
  Dense d = single_layer(height, width, 0.5F);
  d.weight.back() = 0.0F;
  return mlp(height, width, {d});
}

OnnxSubsetModel jumpy_net(std::int64_t height, std::int64_t width) {
  Dense d = single_layer(height, width, 0.5F);
  d.weight[static_cast<std::size_t>(d.in)] = 1.0F;
  return mlp(height, width, {d});
}

OnnxSubsetModel random_mlp(std::int64_t height, std::int64_t width, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::int64_t n = height * width;
  const std::int64_t h1 = std::max<std::int64_t>(n / 2, 1);
  const std::int64_t h2 = std::max<std::int64_t>(n / 4, 1);
  return mlp(height, width, {random_dense(n, h1, rng), random_dense(h1, h2, rng), random_dense(h2, 2, rng)});
}

OnnxSubsetModel conv_net(std::int64_t height, std::int64_t width, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  OnnxSubsetModel m;
  m.producer_name = "fixtures";
  m.graph_name = "conv";
  m.inputs.push_back({"input", 1, {1, 1, height, width}});
  std::vector<float> w;
  for (int i = 0; i < 8; ++i) w.push_back(dyadic(rng));
  m.initializers.push_back(tensor("conv.weight", {2, 1, 2, 2}, w));
  m.initializers.push_back(tensor("conv.bias", {2}, {dyadic(rng), dyadic(rng)}));
  OnnxAttribute pads{"pads", OnnxAttribute::Type::Ints};
  pads.ints = {1, 1, 1, 1};
  OnnxAttribute kernel{"kernel_shape", OnnxAttribute::Type::Ints};
  kernel.ints = {2, 2};
  m.nodes.push_back({"conv", "Conv", "", {"input", "conv.weight", "conv.bias"}, {"c"}, {pads, kernel}});
  m.nodes.push_back({"relu", "Relu", "", {"c"}, {"r"}, {}});
  OnnxAttribute strides{"strides", OnnxAttribute::Type::Ints};
  strides.ints = {1, 1};
  m.nodes.push_back({"pool", "MaxPool", "", {"r"}, {"p"}, {kernel, strides}});
  m.nodes.push_back({"flatten", "Flatten", "", {"p"}, {"f"}, {int_attr("axis", 1)}});
  const std::int64_t features = 2 * height * width;  // (h+1-1) x (w+1-1) per channel
  Dense d = random_dense(features, 2, rng);
  m.initializers.push_back(tensor("fc.weight", {2, features}, d.weight));
  m.initializers.push_back(tensor("fc.bias", {2}, d.bias));
  m.nodes.push_back({"fc", "Gemm", "", {"f", "fc.weight", "fc.bias"}, {"output"}, {int_attr("transB", 1)}});
  m.outputs.push_back({"output", 1, {1, 2}});
  return m;
}

namespace {

RationalTensor random_tensor(TensorShape shape, std::mt19937_64& rng) {
  std::vector<Rational> v;
  std::uniform_int_distribution<int> d(-8, 8);
  for (std::int64_t i = 0; i < shape.element_count(); ++i) v.emplace_back(d(rng), 4);
  for (auto& q : v) q.canonicalize();
  return RationalTensor(std::move(shape), std::move(v));
}

}  // namespace

NierGraph random_graph(std::mt19937_64& rng) {
  NierGraph g;
  auto pick = [&](int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng); };
  const std::int64_t h = 2 + pick(2);
  const std::int64_t w = 2 + pick(2);
  g.inputs.push_back({"x", TensorShape{{1, 1, h, w}}});
  std::string cur = "x";
  std::vector<std::int64_t> shape{1, 1, h, w};
  int counter = 0;
  auto fresh = [&](const std::string& stem) { return stem + std::to_string(counter++); };
  auto add = [&](OpKind op, std::vector<std::string> inputs, NodeAttrs attrs) {
    const std::string out = fresh("t");
    g.nodes.push_back({fresh("op"), op, std::move(inputs), {out}, std::move(attrs)});
    return out;
  };
  // A weight that is either an initializer or computed by a foldable
  // Constant subgraph.
  auto weight = [&](std::vector<std::int64_t> dims) {
    RationalTensor value = random_tensor(TensorShape{dims}, rng);
    if (pick(3) != 0) {
      const std::string name = fresh("w");
      g.tensors[name] = std::move(value);
      return name;
    }
    RationalTensor half = random_tensor(TensorShape{dims}, rng);
    const std::string a = add(OpKind::Constant, {}, ConstantAttrs{std::move(value)});
    const std::string b = add(OpKind::Constant, {}, ConstantAttrs{std::move(half)});
    return add(OpKind::Add, {a, b}, std::monostate{});
  };

  const int steps = 2 + pick(5);
  for (int s = 0; s < steps; ++s) {
    if (shape.size() == 4) {
      switch (pick(5)) {
        case 0: cur = add(OpKind::Relu, {cur}, std::monostate{}); break;
        case 1: cur = add(OpKind::Identity, {cur}, std::monostate{}); break;
        case 2: {
          Conv2DAttrs a;
          const std::int64_t k = 1 + pick(2);
          std::int64_t pad = pick(2);
          if (shape[2] < k || shape[3] < k) pad = 1;
          const std::int64_t out_c = 1 + pick(2);
          a.kernel = {k, k};
          a.pads = {pad, pad, pad, pad};
          a.in_channels = shape[1];
          a.out_channels = out_c;
          const std::string wname = weight({out_c, shape[1], k, k});
          std::vector<std::string> ins{cur, wname};
          if (pick(2) == 0) ins.push_back(weight({out_c}));
          cur = add(OpKind::Conv2D, ins, a);
          shape = {1, out_c, shape[2] + 2 * pad - k + 1, shape[3] + 2 * pad - k + 1};
          break;
        }
        case 3: {
          MaxPool2DAttrs a;
          const std::int64_t k = std::min<std::int64_t>(1 + pick(2), std::min(shape[2], shape[3]));
          a.kernel = {k, k};
          cur = add(OpKind::MaxPool2D, {cur}, a);
          shape = {1, shape[1], shape[2] - k + 1, shape[3] - k + 1};
          break;
        }
        default: {
          const std::int64_t axis = pick(4) == 0 ? 0 : 1;
          // a chain of two flattens exercises fusion
          if (pick(2) == 0) cur = add(OpKind::Flatten, {cur}, FlattenAttrs{axis});
          cur = add(OpKind::Flatten, {cur}, FlattenAttrs{axis});
          shape = {axis == 0 ? 1 : shape[0], shape[1] * shape[2] * shape[3]};
          break;
        }
      }
    } else {
      const std::int64_t k = shape[1];
      const std::int64_t out = 1 + pick(3);
      switch (pick(5)) {
        case 0: cur = add(OpKind::Relu, {cur}, std::monostate{}); break;
        case 1: cur = add(OpKind::Identity, {cur}, std::monostate{}); break;
        case 2: {
          GemmAttrs a;
          if (pick(3) == 0) a.alpha = Rational(1 + pick(3), 2);
          if (pick(3) == 0) a.beta = Rational(pick(3), 2);
          a.alpha.canonicalize();
          a.beta.canonicalize();
          a.trans_b = pick(2) == 0;
          const std::string b = a.trans_b ? weight({out, k}) : weight({k, out});
          std::vector<std::string> ins{cur, b};
          if (pick(3) != 0) ins.push_back(pick(2) == 0 ? weight({out}) : weight({1, out}));
          cur = add(OpKind::Gemm, ins, a);
          shape = {shape[0], out};
          break;
        }
        case 3: {
          cur = add(OpKind::MatMul, {cur, weight({k, out})}, std::monostate{});
          cur = add(OpKind::Add, {cur, weight({out})}, std::monostate{});
          shape = {shape[0], out};
          break;
        }
        default:
          cur = add(OpKind::Flatten, {cur}, FlattenAttrs{1});
          break;
      }
    }
  }
  g.outputs.push_back({cur, TensorShape{shape}});
  return infer_shapes(std::move(g));
}

RationalTensor random_input(const TensorShape& shape, std::mt19937_64& rng) { return random_tensor(shape, rng); }

SimulatorSpec binary_grid(std::int64_t height, std::int64_t width) {
  SimulatorSpec s;
  s.grid = {height, width};
  return s;
}

PropertySpec property(PropertyKind kind) {
  PropertySpec p;
  p.kind = kind;
  return p;
}

std::string fixture_path(const std::string& name) { return std::string(ONNX2SMT_FIXTURE_DIR) + "/" + name; }

std::string scratch_dir(const std::string& tag) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / ("onnx2smt-test-" + std::to_string(::getpid()) + "-" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

}  // namespace fixtures
