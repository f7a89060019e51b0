#pragma once

// Simulator and property descriptions, and their compilation into SMT-LIB
// constraints appended to a lowered network.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "onnx2smt/lowering.hpp"
#include "onnx2smt/nier.hpp"
#include "onnx2smt/rational.hpp"

namespace onnx2smt {

struct Grid {
  std::int64_t height = 0;
  std::int64_t width = 0;
  std::int64_t pixels() const { return height * width; }
};

struct PixelDomain {
  enum class Kind { Binary, Interval };
  Kind kind = Kind::Binary;
  Rational lo{0};
  Rational hi{1};
};

/// Toy obstacle simulator: a parameter configuration s is a set of obstacle
/// pixels; g(s) paints those pixels `hi` and everything else `lo`.
struct SimulatorSpec {
  Grid grid;
  PixelDomain pixels;

  TensorShape input_shape() const { return TensorShape{{1, 1, grid.height, grid.width}}; }
  /// `obstacles` is indexed row-major, one flag per pixel.
  RationalTensor render(const std::vector<bool>& obstacles) const;
  void validate() const;  // throws InvalidSpec
};

/// Half-open rectangle [row_begin, row_end) x [col_begin, col_end).
struct PixelRegion {
  std::int64_t row_begin = 0;
  std::int64_t row_end = 0;
  std::int64_t col_begin = 0;
  std::int64_t col_end = 0;

  bool contains(std::int64_t row, std::int64_t col) const {
    return row >= row_begin && row < row_end && col >= col_begin && col < col_end;
  }
};

/// The last ceil(h/2) rows.
PixelRegion bottom_half(const Grid& grid);

enum class PropertyKind { DangerZoneAlert, NoFalseAlert, IdentityReconstruction, ToleranceReconstruction, IoContract };
enum class Norm { LInf, L1 };

std::string_view to_string(PropertyKind kind);

/// How the network's outputs encode the "change direction" directive.
struct Directive {
  enum class Form { TwoLogit, Threshold };
  Form form = Form::TwoLogit;
  // TwoLogit: alert <=> out[alert] > out[no_alert]
  std::int64_t alert_output = 1;
  std::int64_t no_alert_output = 0;
  // Threshold: alert <=> out[output] >= threshold
  std::int64_t output = 0;
  Rational threshold{0};
};

enum class Comparison { Lt, Le, Gt, Ge, Eq };

struct LinearTerm {
  Rational coeff;
  std::string var;  // in<k>, out<k>, or a declared input/output variable name
};

struct LinearExpr {
  std::vector<LinearTerm> terms;
  Rational constant{0};
};

struct LinearConstraint {
  LinearExpr lhs;
  Comparison cmp = Comparison::Le;
  LinearExpr rhs;
};

/// Parses "2*in0 - out1 + 1/2 >= out0" style inequalities. Throws InvalidSpec.
LinearConstraint parse_linear_constraint(const std::string& text);

struct PropertySpec {
  PropertyKind kind = PropertyKind::DangerZoneAlert;
  std::optional<PixelRegion> danger_zone;  // defaults to bottom_half
  Directive directive;
  Rational epsilon{0};
  Norm norm = Norm::LInf;
  std::vector<LinearConstraint> preconditions;
  std::vector<LinearConstraint> postconditions;

  PixelRegion zone(const Grid& grid) const { return danger_zone.value_or(bottom_half(grid)); }
};

struct VerificationTask {
  NierGraph model;
  SimulatorSpec simulator;
  PropertySpec property;
  std::string logic = "QF_NRA";
  bool fig5_compat = false;
};

/// Appends the pixel-domain constraints (Simulator section). Throws
/// MissingVariable if an input variable is not declared.
void emit_input_constraints(const SimulatorSpec& sim, ConstraintSystem& cs);

/// Appends the negated property (Property section); a model of the result is
/// a counterexample. `fig5_compat` writes a DangerZoneAlert output comparison
/// strictly, as the original tool printed it.
void emit_property_negation(const PropertySpec& prop, const SimulatorSpec& sim, ConstraintSystem& cs,
                            bool fig5_compat = false);

/// Network formula, simulator constraints, negated property, then
/// (check-sat). The solver harness requests the model itself, so an unsat
/// task produces no diagnostics. Everything is validated before any text is
/// produced.
std::string compose_task(const VerificationTask& task);

/// Validates the property against the simulator and the network outputs.
void validate_property(const PropertySpec& prop, const SimulatorSpec& sim, const TensorShape& output_shape,
                       const TensorShape& input_shape);

/// Exact check of the property on one concrete image and the network outputs
/// it produces. True iff the property is violated.
bool violates(const PropertySpec& prop, const SimulatorSpec& sim, const RationalTensor& image,
              const RationalTensor& outputs);

struct TaskFile {
  SimulatorSpec simulator;
  PropertySpec property;
};

/// Property/simulator spec document, schema version 1 (docs/spec_format.md).
TaskFile parse_task_file(const std::string& yaml_text);
TaskFile load_task_file(const std::string& path);

}  // namespace onnx2smt
