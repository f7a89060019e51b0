#pragma once

// Scalar lowering of a NierGraph into a solver-agnostic ConstraintSystem, and
// deterministic SMT-LIB 2.6 text emission.
//
// Naming scheme v1:
//   actual_input_<n>_<c>_<h>_<w>    graph input elements (indices left-padded
//   actual_output_<n>_<c>_<h>_<w>   with zeros to rank 4)
//   n<nodeIndex>_<flatIndex>         intermediate node outputs
//   w_<tensor>_<flatIndex>           constants, tensor name mapped to [A-Za-z0-9_.]

#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "onnx2smt/nier.hpp"
#include "onnx2smt/rational.hpp"

namespace onnx2smt {

inline constexpr std::string_view kNamingScheme = "v1";

enum class VarRole { Input, Output, Intermediate, Weight };

struct ScalarVar {
  std::string name;
  VarRole role = VarRole::Intermediate;
};

struct Term;
using TermPtr = std::shared_ptr<const Term>;

/// Immutable expression node. Sub-terms may be shared.
struct Term {
  enum class Kind { Var, Literal, App };

  Kind kind = Kind::Literal;
  std::string symbol;  // variable name or operator
  Rational value;      // Literal only
  std::vector<TermPtr> args;
};

namespace term {

TermPtr var(std::string name);
TermPtr lit(const Rational& value);
TermPtr app(std::string op, std::vector<TermPtr> args);

/// n-ary sum; zero operands give 0, one operand is returned as is.
TermPtr sum(std::vector<TermPtr> operands);
TermPtr mul(TermPtr a, TermPtr b);
TermPtr sub(TermPtr a, TermPtr b);
TermPtr eq(TermPtr a, TermPtr b);
TermPtr le(TermPtr a, TermPtr b);
TermPtr lt(TermPtr a, TermPtr b);
TermPtr ge(TermPtr a, TermPtr b);
TermPtr gt(TermPtr a, TermPtr b);
TermPtr ite(TermPtr cond, TermPtr then_term, TermPtr else_term);
/// n-ary disjunction / conjunction; a single operand is returned as is.
TermPtr any_of(std::vector<TermPtr> operands);
TermPtr all_of(std::vector<TermPtr> operands);
/// max(a, b) as (ite (>= a b) a b)
TermPtr max2(TermPtr a, TermPtr b);
/// |a| as (ite (>= a 0) a (- a))
TermPtr abs(TermPtr a);

}  // namespace term

enum class Section { Network, Simulator, Property };

struct Assertion {
  TermPtr term;
  std::string defines;   // variable this assertion defines, empty otherwise
  Section section = Section::Network;
};

struct ConstraintSystem {
  std::vector<ScalarVar> declarations;
  std::vector<Assertion> assertions;
  std::map<std::string, Rational> weight_values;
  std::vector<std::string> input_vars;   // flat row-major order
  std::vector<std::string> output_vars;  // flat row-major order
  TensorShape input_shape;
  TensorShape output_shape;
  std::string logic_tag = "QF_NRA";
  /// Free-form comment lines emitted at the top of the annotation sections.
  std::vector<std::string> simulator_notes;
  std::vector<std::string> property_notes;

  /// Throws InternalNamingCollision on a duplicate name.
  void declare(std::string name, VarRole role);
  bool declares(const std::string& name) const { return names_.count(name) != 0; }
  void add(TermPtr t, Section section, std::string defines = {});

  /// Throws MissingVariable if an assertion references an undeclared symbol.
  void validate() const;

 private:
  std::unordered_set<std::string> names_;
};

std::string input_var_name(const TensorShape& shape, std::int64_t flat);
std::string output_var_name(const TensorShape& shape, std::int64_t flat);
std::string weight_var_name(const std::string& tensor, std::int64_t flat);
std::string intermediate_var_name(std::size_t node_index, std::int64_t flat);

/// Lowers a shape-inferred graph with exactly one input and one output. Gemm
/// nodes with alpha = beta = 1 are first normalized to MatMul + Add.
ConstraintSystem lower_graph(const NierGraph& graph);

/// (ite (>= x 0) x 0)
TermPtr lower_relu(TermPtr x);

/// Right-hand sides of each output element of a 2-D convolution (NCHW,
/// batch 1). Padding positions contribute nothing to the sum.
std::vector<TermPtr> lower_conv2d(const Conv2DAttrs& attrs, const TensorShape& in_shape, std::span<const TermPtr> in,
                                  const TensorShape& kernel_shape, std::span<const TermPtr> kernel,
                                  std::span<const TermPtr> bias);

/// Left-folded max chain over each window, scanned row-major; padding
/// positions are skipped. Throws EmptyWindow.
std::vector<TermPtr> lower_maxpool(const MaxPool2DAttrs& attrs, const TensorShape& in_shape,
                                   std::span<const TermPtr> in);

struct EmitOptions {
  std::string logic = "QF_NRA";
  bool fig5_compat = false;
  bool produce_models = false;
  bool check_sat = false;
  bool get_model = false;
};

/// Deterministic SMT-LIB 2.6 text. Throws LogicMismatch for nonlinear
/// products under a linear logic, InvalidSpec for an unknown logic.
std::string emit_smtlib(const ConstraintSystem& cs, const EmitOptions& options);
std::string emit_smtlib(const ConstraintSystem& cs, const std::string& logic);

}  // namespace onnx2smt
