#pragma once

// Model builders shared by the unit and acceptance tests.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "onnx2smt/camus.hpp"
#include "onnx2smt/nier.hpp"
#include "onnx2smt/onnx.hpp"

namespace fixtures {

using onnx2smt::OnnxSubsetModel;

struct Dense {
  std::vector<float> weight;  // out x in, row-major (torch layout, Gemm transB=1)
  std::vector<float> bias;    // out
  std::int64_t in = 0;
  std::int64_t out = 0;
};

/// Flatten, then Gemm layers with ReLU between them; input 1x1xHxW, output 1xK.
OnnxSubsetModel mlp(std::int64_t height, std::int64_t width, const std::vector<Dense>& layers);

/// Logit 1 = number of obstacles in the bottom ceil(h/2) rows, logit 0 = 1/2:
/// alerts exactly when the danger zone is occupied.
OnnxSubsetModel correct_net(std::int64_t height, std::int64_t width);

/// Same, routed through a hidden ReLU layer of width 2.
OnnxSubsetModel correct_deep_net(std::int64_t height, std::int64_t width);

/// All weights and biases zero: the two logits always tie, so it never alerts.
OnnxSubsetModel zero_net(std::int64_t height, std::int64_t width);

/// Alert logit is a constant 1, no-alert logit 0.
OnnxSubsetModel always_alert_net(std::int64_t height, std::int64_t width);

/// The correct net with the last danger-zone pixel disconnected (misses it).
OnnxSubsetModel blind_spot_net(std::int64_t height, std::int64_t width);

/// The correct net that also counts pixel (0,0), which lies outside the zone.
OnnxSubsetModel jumpy_net(std::int64_t height, std::int64_t width);

/// Random two-hidden-layer network (n/2 and n/4 units, at least 1) with
/// weights drawn from a few-bit dyadic grid in [-1, 1].
OnnxSubsetModel random_mlp(std::int64_t height, std::int64_t width, std::uint64_t seed);

/// Conv(1->2, 2x2, pad 1) -> ReLU -> MaxPool(2x2, stride 1) -> Flatten -> Gemm(2).
OnnxSubsetModel conv_net(std::int64_t height, std::int64_t width, std::uint64_t seed);

/// Random graph over the whole operator set (Identity, Flatten chains,
/// Constant subgraphs, Gemm with alpha/beta/transB, MatMul+Add, Conv, MaxPool,
/// ReLU) with input 1x1xHxW, for rewrite and lowering property tests.
onnx2smt::NierGraph random_graph(std::mt19937_64& rng);

/// Random input of the right shape with small dyadic entries.
onnx2smt::RationalTensor random_input(const onnx2smt::TensorShape& shape, std::mt19937_64& rng);

onnx2smt::SimulatorSpec binary_grid(std::int64_t height, std::int64_t width);

onnx2smt::PropertySpec property(onnx2smt::PropertyKind kind);

/// Path inside the source tree's tests/fixtures directory.
std::string fixture_path(const std::string& name);

/// Fresh scratch directory for one test.
std::string scratch_dir(const std::string& tag);

}  // namespace fixtures
