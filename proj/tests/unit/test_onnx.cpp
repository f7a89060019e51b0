#include <doctest.h>

#include <functional>

#include <cmath>
#include <json.hpp>

#include "fixtures.hpp"
#include "onnx2smt/error.hpp"
#include "onnx2smt/onnx.hpp"
#include "onnx2smt/oracle.hpp"
#include "onnx2smt/protobuf_wire.hpp"
#include "process.hpp"

using namespace onnx2smt;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error raised");
  return ErrorKind::Io;
}

std::vector<std::uint8_t> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

OnnxSubsetModel roundtrip(const OnnxSubsetModel& m) {
  const auto b = bytes_of(serialize_onnx(m));
  return parse_onnx(b);
}

}  // namespace

TEST_CASE("wire format primitives") {
  pb::Writer w;
  w.varint(1, 300);
  w.bytes(2, "abc");
  const std::vector<std::int64_t> ints{1, -2, 3};
  w.packed_int64(3, ints);
  w.float32(4, 1.5F);
  const std::string buf = w.take();
  const auto data = bytes_of(buf);
  pb::Reader r(data);
  pb::Field f;
  REQUIRE(r.next(f));
  CHECK(f.number == 1);
  CHECK(f.as_int64() == 300);
  REQUIRE(r.next(f));
  CHECK(f.as_string() == "abc");
  REQUIRE(r.next(f));
  std::vector<std::int64_t> back;
  pb::read_repeated_int64(f, back);
  CHECK(back == ints);
  REQUIRE(r.next(f));
  CHECK(f.as_float() == 1.5F);
  CHECK_FALSE(r.next(f));

  // truncated varint and overlong length prefix
  const std::vector<std::uint8_t> truncated{0x08, 0x80};
  pb::Reader t(truncated);
  CHECK(kind_of([&] { pb::Field g; t.next(g); }) == ErrorKind::MalformedProtobuf);
  const std::vector<std::uint8_t> overlong{0x12, 0x05, 'a'};
  pb::Reader o(overlong);
  CHECK(kind_of([&] { pb::Field g; o.next(g); }) == ErrorKind::MalformedProtobuf);
}

TEST_CASE("parse_onnx rejects malformed or unsupported models") {
  CHECK(kind_of([] { parse_onnx({}); }) == ErrorKind::MalformedProtobuf);
  const std::vector<std::uint8_t> junk{0xff, 0xff, 0xff};
  CHECK(kind_of([&] { parse_onnx(junk); }) == ErrorKind::MalformedProtobuf);

  try {
    load_onnx(fixtures::fixture_path("softmax.onnx"));
    FAIL("expected UnsupportedOperator");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnsupportedOperator);
    CHECK(std::string(e.what()).find("Softmax") != std::string::npos);
  }

  auto m = fixtures::correct_net(2, 2);
  m.opset_version = 8;
  CHECK(kind_of([&] { roundtrip(m); }) == ErrorKind::UnsupportedOpset);
  m.opset_version = 14;
  CHECK(kind_of([&] { roundtrip(m); }) == ErrorKind::UnsupportedOpset);

  m = fixtures::correct_net(2, 2);
  m.initializers[0].data_type = 7;  // INT64
  CHECK(kind_of([&] { roundtrip(m); }) == ErrorKind::UnsupportedDtype);

  m = fixtures::correct_net(2, 2);
  m.initializers[0].dims = {3, 4};
  CHECK(kind_of([&] { roundtrip(m); }) == ErrorKind::MalformedProtobuf);
}

TEST_CASE("torch-exported two-layer model") {
  const auto m = load_onnx(fixtures::fixture_path("mlp_vec.onnx"));
  std::vector<std::string> ops;
  for (const auto& n : m.nodes) ops.push_back(n.op_type);
  CHECK(ops == std::vector<std::string>{"Gemm", "Relu", "Gemm"});
  CHECK(m.opset_version == 13);

  const NierGraph g = to_nier(m);
  CHECK(g.nodes.size() == 3);
  CHECK(g.tensors.size() == 4);
  CHECK(g.inputs.at(0).shape == TensorShape{{1, 4}});
  CHECK(g.outputs.at(0).shape == TensorShape{{1, 2}});
}

TEST_CASE("exact evaluation agrees with the exporting framework") {
  for (const char* name : {"toy3x3", "two_layer", "conv_pool"}) {
    CAPTURE(name);
    const NierGraph g = to_nier(load_onnx(fixtures::fixture_path(std::string(name) + ".onnx")));
    const auto ref = nlohmann::json::parse(fixtures::read_file(fixtures::fixture_path(std::string(name) + ".reference.json")));
    const TensorShape shape{ref["shape"].get<std::vector<std::int64_t>>()};
    for (const auto& c : ref["cases"]) {
      std::vector<Rational> in;
      for (double v : c["input"]) in.push_back(float64_to_rational(v));
      const auto out = eval_exact(g, RationalTensor(shape, in)).outputs.at(0);
      const auto expected = c["output"].get<std::vector<double>>();
      REQUIRE(out.data.size() == expected.size());
      for (std::size_t i = 0; i < expected.size(); ++i) CHECK(std::abs(out.data[i].get_d() - expected[i]) < 1e-4);
    }
  }
}

TEST_CASE("two-layer fixture on the blank image composes the biases") {
  const auto m = load_onnx(fixtures::fixture_path("mlp_vec.onnx"));
  const NierGraph g = to_nier(m);
  // hand composition: b2 + W2 relu(b1)
  const auto& b1 = g.tensors.at(g.nodes[0].inputs[2]);
  const auto& w2 = g.tensors.at(g.nodes[2].inputs[1]);  // 2x3 (transB layout)
  const auto& b2 = g.tensors.at(g.nodes[2].inputs[2]);
  std::vector<Rational> expected(2);
  for (int o = 0; o < 2; ++o) {
    expected[o] = b2.data[o];
    for (int h = 0; h < 3; ++h) {
      const Rational r = b1.data[h] > 0 ? b1.data[h] : Rational(0);
      expected[o] += w2.data[o * 3 + h] * r;
    }
  }
  const auto out = eval_exact(g, RationalTensor::zeros(TensorShape{{1, 4}})).outputs.at(0);
  CHECK(out.data == expected);
}

TEST_CASE("serialize/parse round trip") {
  const auto m = fixtures::conv_net(3, 3, 5);
  const auto back = roundtrip(m);
  CHECK(back.nodes.size() == m.nodes.size());
  CHECK(back.initializers.size() == m.initializers.size());
  CHECK(to_nier(back) == to_nier(m));
}

TEST_CASE("to_nier attribute handling") {
  SUBCASE("Conv without pads defaults to zero padding") {
    auto m = fixtures::conv_net(3, 3, 1);
    auto& attrs = m.nodes[0].attributes;
    attrs.erase(std::remove_if(attrs.begin(), attrs.end(), [](const OnnxAttribute& a) { return a.name == "pads"; }),
                attrs.end());
    // without padding the pooled map shrinks to 1x1 per channel
    m.initializers[2].dims = {2, 2};
    m.initializers[2].float_data.resize(4);
    const NierGraph g = to_nier(roundtrip(m));
    const auto& conv = std::get<Conv2DAttrs>(g.nodes[0].attrs);
    CHECK(conv.pads == std::array<std::int64_t, 4>{0, 0, 0, 0});
    CHECK(conv.kernel == std::array<std::int64_t, 2>{2, 2});
  }
  SUBCASE("Conv group=2 is unsupported") {
    auto m = fixtures::conv_net(3, 3, 1);
    OnnxAttribute group{"group", OnnxAttribute::Type::Int};
    group.i = 2;
    m.nodes[0].attributes.push_back(group);
    CHECK(kind_of([&] { to_nier(roundtrip(m)); }) == ErrorKind::UnsupportedAttribute);
  }
  SUBCASE("Gemm transA is unsupported") {
    auto m = fixtures::correct_net(2, 2);
    OnnxAttribute ta{"transA", OnnxAttribute::Type::Int};
    ta.i = 1;
    m.nodes[1].attributes.push_back(ta);
    CHECK(kind_of([&] { to_nier(roundtrip(m)); }) == ErrorKind::UnsupportedAttribute);
  }
  SUBCASE("non-finite initializer") {
    auto m = fixtures::correct_net(2, 2);
    m.initializers[0].float_data[0] = std::nanf("");
    CHECK(kind_of([&] { to_nier(roundtrip(m)); }) == ErrorKind::NonFiniteWeight);
  }
  SUBCASE("batch size other than one") {
    auto m = fixtures::correct_net(2, 2);
    m.inputs[0].dims[0] = 4;
    CHECK(kind_of([&] { to_nier(roundtrip(m)); }) == ErrorKind::ShapeMismatch);
    m.inputs[0].dims[0] = -1;
    CHECK(to_nier(roundtrip(m)).inputs[0].shape == TensorShape{{1, 1, 2, 2}});
  }
}
