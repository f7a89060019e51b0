#include "onnx2smt/camus.hpp"

#include <algorithm>
#include <cctype>

#include "onnx2smt/error.hpp"

namespace onnx2smt {

std::string_view to_string(PropertyKind kind) {
  switch (kind) {
    case PropertyKind::DangerZoneAlert: return "danger_zone_alert";
    case PropertyKind::NoFalseAlert: return "no_false_alert";
    case PropertyKind::IdentityReconstruction: return "identity_reconstruction";
    case PropertyKind::ToleranceReconstruction: return "tolerance_reconstruction";
    case PropertyKind::IoContract: return "io_contract";
  }
  return "?";
}

void SimulatorSpec::validate() const {
  if (grid.height < 1 || grid.width < 1) throw Error(ErrorKind::InvalidSpec, "grid dimensions must be >= 1");
  if (!(pixels.lo < pixels.hi)) throw Error(ErrorKind::InvalidSpec, "pixel domain needs lo < hi");
}

RationalTensor SimulatorSpec::render(const std::vector<bool>& obstacles) const {
  if (static_cast<std::int64_t>(obstacles.size()) != grid.pixels()) {
    throw Error(ErrorKind::ShapeMismatch, "obstacle map has " + std::to_string(obstacles.size()) + " entries for " +
                                              std::to_string(grid.pixels()) + " pixels");
  }
  std::vector<Rational> data;
  data.reserve(obstacles.size());
  for (bool o : obstacles) data.push_back(o ? pixels.hi : pixels.lo);
  return RationalTensor(input_shape(), std::move(data));
}

PixelRegion bottom_half(const Grid& grid) {
  const std::int64_t rows = (grid.height + 1) / 2;
  return PixelRegion{grid.height - rows, grid.height, 0, grid.width};
}

// ---------------------------------------------------------------------------
// Linear constraint text

namespace {

struct Token {
  enum class Kind { Number, Ident, Op, End };
  Kind kind;
  std::string text;
};

std::vector<Token> tokenize(const std::string& s) {
  std::vector<Token> out;
  std::size_t i = 0;
  auto fail = [&] { return Error(ErrorKind::InvalidSpec, "cannot parse constraint '" + s + "'"); };
  while (i < s.size()) {
    const char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      std::size_t j = i;
      while (j < s.size() && (std::isdigit(static_cast<unsigned char>(s[j])) || s[j] == '.')) ++j;
      if (j < s.size() && (s[j] == 'e' || s[j] == 'E')) {
        std::size_t k = j + 1;
        if (k < s.size() && (s[k] == '+' || s[k] == '-')) ++k;
        if (k < s.size() && std::isdigit(static_cast<unsigned char>(s[k]))) {
          j = k;
          while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
        }
      }
      out.push_back({Token::Kind::Number, s.substr(i, j - i)});
      i = j;
    } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_' || s[j] == '.')) ++j;
      out.push_back({Token::Kind::Ident, s.substr(i, j - i)});
      i = j;
    } else if (s.compare(i, 2, "<=") == 0 || s.compare(i, 2, ">=") == 0 || s.compare(i, 2, "==") == 0) {
      out.push_back({Token::Kind::Op, s.substr(i, 2)});
      i += 2;
    } else if (std::string("+-*/<>=").find(c) != std::string::npos) {
      out.push_back({Token::Kind::Op, std::string(1, c)});
      ++i;
    } else {
      throw fail();
    }
  }
  out.push_back({Token::Kind::End, ""});
  return out;
}

class ConstraintParser {
 public:
  explicit ConstraintParser(const std::string& text) : text_(text), tokens_(tokenize(text)) {}

  LinearConstraint parse() {
    LinearConstraint c;
    c.lhs = expr();
    const Token& op = tokens_[pos_];
    if (op.kind != Token::Kind::Op) throw fail();
    if (op.text == "<") c.cmp = Comparison::Lt;
    else if (op.text == "<=") c.cmp = Comparison::Le;
    else if (op.text == ">") c.cmp = Comparison::Gt;
    else if (op.text == ">=") c.cmp = Comparison::Ge;
    else if (op.text == "=" || op.text == "==") c.cmp = Comparison::Eq;
    else throw fail();
    ++pos_;
    c.rhs = expr();
    if (tokens_[pos_].kind != Token::Kind::End) throw fail();
    return c;
  }

 private:
  Error fail() const { return Error(ErrorKind::InvalidSpec, "cannot parse constraint '" + text_ + "'"); }

  bool accept(const std::string& op) {
    if (tokens_[pos_].kind == Token::Kind::Op && tokens_[pos_].text == op) {
      ++pos_;
      return true;
    }
    return false;
  }

  LinearExpr expr() {
    LinearExpr e;
    Rational sign(1);
    if (accept("-")) sign = -1;
    else accept("+");
    term(e, sign);
    while (true) {
      if (accept("+")) term(e, Rational(1));
      else if (accept("-")) term(e, Rational(-1));
      else break;
    }
    return e;
  }

  void term(LinearExpr& e, const Rational& sign) {
    Rational coeff = sign;
    std::string var;
    auto factor = [&](bool divide) {
      const Token& t = tokens_[pos_];
      if (t.kind == Token::Kind::Number) {
        const Rational v = parse_rational(t.text);
        if (divide) {
          if (v == 0) throw fail();
          coeff /= v;
        } else {
          coeff *= v;
        }
      } else if (t.kind == Token::Kind::Ident && !divide && var.empty()) {
        var = t.text;
      } else {
        throw fail();
      }
      ++pos_;
    };
    factor(false);
    while (true) {
      if (accept("*")) factor(false);
      else if (accept("/")) factor(true);
      else break;
    }
    coeff.canonicalize();
    if (var.empty()) {
      e.constant += coeff;
    } else {
      e.terms.push_back(LinearTerm{coeff, var});
    }
  }

  std::string text_;
  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
};

}  // namespace

LinearConstraint parse_linear_constraint(const std::string& text) { return ConstraintParser(text).parse(); }

// ---------------------------------------------------------------------------
// Validation and exact property semantics

namespace {

// in<k> / out<k> shorthands, or full variable names.
struct VarRef {
  bool is_input = false;
  std::int64_t index = 0;
};

std::optional<VarRef> resolve(const std::string& name, const TensorShape& input_shape, const TensorShape& output_shape) {
  auto numbered = [&](const std::string& prefix) -> std::optional<std::int64_t> {
    if (name.size() <= prefix.size() || name.compare(0, prefix.size(), prefix) != 0) return std::nullopt;
    const std::string digits = name.substr(prefix.size());
    if (!std::all_of(digits.begin(), digits.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
      return std::nullopt;
    }
    return std::stoll(digits);
  };
  if (auto k = numbered("in"); k && *k < input_shape.element_count()) return VarRef{true, *k};
  if (auto k = numbered("out"); k && *k < output_shape.element_count()) return VarRef{false, *k};
  for (std::int64_t i = 0; i < input_shape.element_count(); ++i) {
    if (input_var_name(input_shape, i) == name) return VarRef{true, i};
  }
  for (std::int64_t i = 0; i < output_shape.element_count(); ++i) {
    if (output_var_name(output_shape, i) == name) return VarRef{false, i};
  }
  return std::nullopt;
}

bool alert_fires(const Directive& d, const RationalTensor& out) {
  if (d.form == Directive::Form::TwoLogit) {
    return out.data.at(static_cast<std::size_t>(d.alert_output)) > out.data.at(static_cast<std::size_t>(d.no_alert_output));
  }
  return out.data.at(static_cast<std::size_t>(d.output)) >= d.threshold;
}

Rational parameter_of(const SimulatorSpec& sim, const Rational& pixel) {
  Rational s = (pixel - sim.pixels.lo) / (sim.pixels.hi - sim.pixels.lo);
  s.canonicalize();
  return s;
}

bool holds(const Rational& lhs, Comparison cmp, const Rational& rhs) {
  switch (cmp) {
    case Comparison::Lt: return lhs < rhs;
    case Comparison::Le: return lhs <= rhs;
    case Comparison::Gt: return lhs > rhs;
    case Comparison::Ge: return lhs >= rhs;
    case Comparison::Eq: return lhs == rhs;
  }
  return false;
}

}  // namespace

void validate_property(const PropertySpec& prop, const SimulatorSpec& sim, const TensorShape& output_shape,
                       const TensorShape& input_shape) {
  sim.validate();
  const auto outputs = output_shape.element_count();
  auto bad = [](const std::string& what) { return Error(ErrorKind::InvalidSpec, what); };

  switch (prop.kind) {
    case PropertyKind::DangerZoneAlert:
    case PropertyKind::NoFalseAlert: {
      const PixelRegion z = prop.zone(sim.grid);
      if (z.row_begin < 0 || z.col_begin < 0 || z.row_end > sim.grid.height || z.col_end > sim.grid.width ||
          z.row_begin >= z.row_end || z.col_begin >= z.col_end) {
        throw bad("danger zone must be a non-empty region inside the grid");
      }
      const auto& d = prop.directive;
      if (d.form == Directive::Form::TwoLogit) {
        if (d.alert_output < 0 || d.alert_output >= outputs || d.no_alert_output < 0 || d.no_alert_output >= outputs ||
            d.alert_output == d.no_alert_output) {
          throw bad("two-logit directive needs two distinct output indices below " + std::to_string(outputs));
        }
      } else if (d.output < 0 || d.output >= outputs) {
        throw bad("threshold directive output index out of range");
      }
      break;
    }
    case PropertyKind::IdentityReconstruction:
    case PropertyKind::ToleranceReconstruction:
      if (outputs != sim.grid.pixels()) {
        throw bad("reconstruction properties need one output per pixel (" + std::to_string(sim.grid.pixels()) +
                  "), network has " + std::to_string(outputs));
      }
      if (sgn(prop.epsilon) < 0) throw bad("epsilon must be >= 0");
      break;
    case PropertyKind::IoContract:
      if (prop.postconditions.empty()) throw bad("io_contract needs at least one postcondition");
      for (const auto* list : {&prop.preconditions, &prop.postconditions}) {
        for (const auto& c : *list) {
          for (const auto* e : {&c.lhs, &c.rhs}) {
            for (const auto& t : e->terms) {
              if (!resolve(t.var, input_shape, output_shape)) {
                throw Error(ErrorKind::MissingVariable, "constraint references undeclared variable '" + t.var + "'");
              }
            }
          }
        }
      }
      break;
  }
}

bool violates(const PropertySpec& prop, const SimulatorSpec& sim, const RationalTensor& image,
              const RationalTensor& outputs) {
  const auto width = sim.grid.width;
  switch (prop.kind) {
    case PropertyKind::DangerZoneAlert:
    case PropertyKind::NoFalseAlert: {
      const PixelRegion z = prop.zone(sim.grid);
      bool occupied = false;
      bool empty = true;
      for (std::int64_t r = z.row_begin; r < z.row_end; ++r) {
        for (std::int64_t c = z.col_begin; c < z.col_end; ++c) {
          const Rational& v = image.data.at(static_cast<std::size_t>(r * width + c));
          occupied = occupied || v == sim.pixels.hi;
          empty = empty && v == sim.pixels.lo;
        }
      }
      const bool alert = alert_fires(prop.directive, outputs);
      return prop.kind == PropertyKind::DangerZoneAlert ? occupied && !alert : empty && alert;
    }
    case PropertyKind::IdentityReconstruction:
    case PropertyKind::ToleranceReconstruction: {
      Rational worst(0);
      Rational total(0);
      for (std::size_t i = 0; i < image.data.size(); ++i) {
        const Rational diff = abs(outputs.data.at(i) - parameter_of(sim, image.data[i]));
        worst = std::max(worst, diff);
        total += diff;
      }
      if (prop.kind == PropertyKind::IdentityReconstruction) return worst != 0;
      return (prop.norm == Norm::LInf ? worst : total) > prop.epsilon;
    }
    case PropertyKind::IoContract: {
      auto value = [&](const LinearExpr& e) {
        Rational v = e.constant;
        for (const auto& t : e.terms) {
          const auto ref = resolve(t.var, image.shape, outputs.shape);
          if (!ref) throw Error(ErrorKind::MissingVariable, t.var);
          const auto& src = ref->is_input ? image : outputs;
          v += t.coeff * src.data.at(static_cast<std::size_t>(ref->index));
        }
        return v;
      };
      for (const auto& c : prop.preconditions) {
        if (!holds(value(c.lhs), c.cmp, value(c.rhs))) return false;
      }
      return std::any_of(prop.postconditions.begin(), prop.postconditions.end(),
                         [&](const LinearConstraint& c) { return !holds(value(c.lhs), c.cmp, value(c.rhs)); });
    }
  }
  return false;
}

// ---------------------------------------------------------------------------
// Constraint emission

namespace {

const std::string& pixel_var(const ConstraintSystem& cs, std::int64_t index) {
  if (index < 0 || index >= static_cast<std::int64_t>(cs.input_vars.size()) ||
      !cs.declares(cs.input_vars[static_cast<std::size_t>(index)])) {
    throw Error(ErrorKind::MissingVariable, "no input variable for pixel " + std::to_string(index));
  }
  return cs.input_vars[static_cast<std::size_t>(index)];
}

const std::string& output_var(const ConstraintSystem& cs, std::int64_t index) {
  if (index < 0 || index >= static_cast<std::int64_t>(cs.output_vars.size())) {
    throw Error(ErrorKind::MissingVariable, "no output variable #" + std::to_string(index));
  }
  return cs.output_vars[static_cast<std::size_t>(index)];
}

TermPtr parameter_term(const SimulatorSpec& sim, TermPtr pixel) {
  if (sim.pixels.lo == 0 && sim.pixels.hi == 1) return pixel;
  Rational scale = 1 / (sim.pixels.hi - sim.pixels.lo);
  scale.canonicalize();
  return term::mul(term::lit(scale), term::sub(std::move(pixel), term::lit(sim.pixels.lo)));
}

TermPtr linear_term(const LinearExpr& e, const ConstraintSystem& cs) {
  std::vector<TermPtr> parts;
  for (const auto& t : e.terms) {
    const auto ref = resolve(t.var, cs.input_shape, cs.output_shape);
    if (!ref) throw Error(ErrorKind::MissingVariable, "constraint references undeclared variable '" + t.var + "'");
    const std::string& name = ref->is_input ? pixel_var(cs, ref->index) : output_var(cs, ref->index);
    TermPtr v = term::var(name);
    parts.push_back(t.coeff == 1 ? v : term::mul(term::lit(t.coeff), v));
  }
  if (e.constant != 0 || parts.empty()) parts.push_back(term::lit(e.constant));
  return term::sum(std::move(parts));
}

TermPtr compare(Comparison cmp, TermPtr a, TermPtr b) {
  switch (cmp) {
    case Comparison::Lt: return term::lt(a, b);
    case Comparison::Le: return term::le(a, b);
    case Comparison::Gt: return term::gt(a, b);
    case Comparison::Ge: return term::ge(a, b);
    case Comparison::Eq: return term::eq(a, b);
  }
  return nullptr;
}

// Negation without `not`: the emitted grammar stays within comparisons.
TermPtr negated(Comparison cmp, TermPtr a, TermPtr b) {
  switch (cmp) {
    case Comparison::Lt: return term::ge(a, b);
    case Comparison::Le: return term::gt(a, b);
    case Comparison::Gt: return term::le(a, b);
    case Comparison::Ge: return term::lt(a, b);
    case Comparison::Eq: return term::any_of({term::lt(a, b), term::gt(a, b)});
  }
  return nullptr;
}

std::string describe(const Rational& q) { return q.get_str(); }

}  // namespace

void emit_input_constraints(const SimulatorSpec& sim, ConstraintSystem& cs) {
  sim.validate();
  const auto lo = term::lit(sim.pixels.lo);
  const auto hi = term::lit(sim.pixels.hi);
  std::vector<TermPtr> pending;
  for (std::int64_t p = 0; p < sim.grid.pixels(); ++p) {
    const auto v = term::var(pixel_var(cs, p));
    if (sim.pixels.kind == PixelDomain::Kind::Binary) {
      pending.push_back(term::any_of({term::eq(v, lo), term::eq(v, hi)}));
    } else {
      pending.push_back(term::ge(v, lo));
      pending.push_back(term::le(v, hi));
    }
  }
  cs.simulator_notes.push_back(sim.pixels.kind == PixelDomain::Kind::Binary
                                   ? "Input space constraints: each pixel is " + describe(sim.pixels.lo) + " or " +
                                         describe(sim.pixels.hi)
                                   : "Input space constraints: inputs between " + describe(sim.pixels.lo) + " and " +
                                         describe(sim.pixels.hi));
  for (auto& t : pending) cs.add(std::move(t), Section::Simulator);
}

void emit_property_negation(const PropertySpec& prop, const SimulatorSpec& sim, ConstraintSystem& cs,
                            bool fig5_compat) {
  validate_property(prop, sim, cs.output_shape, cs.input_shape);
  std::vector<TermPtr> pending;
  std::vector<std::string> notes;

  switch (prop.kind) {
    case PropertyKind::DangerZoneAlert:
    case PropertyKind::NoFalseAlert: {
      const PixelRegion z = prop.zone(sim.grid);
      const bool missed = prop.kind == PropertyKind::DangerZoneAlert;
      const auto level = term::lit(missed ? sim.pixels.hi : sim.pixels.lo);
      std::vector<TermPtr> pixels;
      for (std::int64_t r = z.row_begin; r < z.row_end; ++r) {
        for (std::int64_t c = z.col_begin; c < z.col_end; ++c) {
          pixels.push_back(term::eq(term::var(pixel_var(cs, r * sim.grid.width + c)), level));
        }
      }
      notes.push_back(missed ? "At least one input in the danger zone is an obstacle"
                             : "No input in the danger zone is an obstacle");
      pending.push_back(missed ? term::any_of(std::move(pixels)) : term::all_of(std::move(pixels)));

      const auto& d = prop.directive;
      TermPtr outcome;
      if (d.form == Directive::Form::TwoLogit) {
        const auto alert = term::var(output_var(cs, d.alert_output));
        const auto calm = term::var(output_var(cs, d.no_alert_output));
        if (missed) {
          notes.push_back("Negation: the alert logit does not exceed the no-alert logit");
          outcome = fig5_compat ? term::lt(alert, calm) : term::le(alert, calm);
        } else {
          notes.push_back("Negation: the alert logit exceeds the no-alert logit");
          outcome = term::lt(calm, alert);
        }
      } else {
        const auto out = term::var(output_var(cs, d.output));
        const auto theta = term::lit(d.threshold);
        notes.push_back(missed ? "Negation: output stays below the threshold " + describe(d.threshold)
                               : "Negation: output reaches the threshold " + describe(d.threshold));
        outcome = missed ? term::lt(out, theta) : term::ge(out, theta);
      }
      pending.push_back(outcome);
      break;
    }

    case PropertyKind::IdentityReconstruction:
    case PropertyKind::ToleranceReconstruction: {
      const bool identity = prop.kind == PropertyKind::IdentityReconstruction;
      if (!identity && prop.norm != Norm::LInf && prop.norm != Norm::L1) {
        throw Error(ErrorKind::UnsupportedNorm, "norm not supported");
      }
      const auto eps = term::lit(prop.epsilon);
      std::vector<TermPtr> disjuncts;
      std::vector<TermPtr> magnitudes;
      for (std::int64_t i = 0; i < sim.grid.pixels(); ++i) {
        const auto s = parameter_term(sim, term::var(pixel_var(cs, i)));
        const auto s_rec = term::var(output_var(cs, i));
        if (identity) {
          disjuncts.push_back(term::lt(s_rec, s));
          disjuncts.push_back(term::gt(s_rec, s));
        } else if (prop.norm == Norm::LInf) {
          disjuncts.push_back(term::gt(term::sub(s_rec, s), eps));
          disjuncts.push_back(term::gt(term::sub(s, s_rec), eps));
        } else {
          magnitudes.push_back(term::abs(term::sub(s_rec, s)));
        }
      }
      if (identity) {
        notes.push_back("Negation of p(g(s)) = s: some reconstructed parameter differs");
        pending.push_back(term::any_of(std::move(disjuncts)));
      } else if (prop.norm == Norm::LInf) {
        notes.push_back("Negation of ||s - p(g(s))||_inf <= " + describe(prop.epsilon));
        pending.push_back(term::any_of(std::move(disjuncts)));
      } else {
        notes.push_back("Negation of ||s - p(g(s))||_1 <= " + describe(prop.epsilon));
        pending.push_back(term::gt(term::sum(std::move(magnitudes)), eps));
      }
      break;
    }

    case PropertyKind::IoContract: {
      notes.push_back("Preconditions hold and some postcondition fails");
      for (const auto& c : prop.preconditions) {
        pending.push_back(compare(c.cmp, linear_term(c.lhs, cs), linear_term(c.rhs, cs)));
      }
      std::vector<TermPtr> failures;
      for (const auto& c : prop.postconditions) {
        failures.push_back(negated(c.cmp, linear_term(c.lhs, cs), linear_term(c.rhs, cs)));
      }
      pending.push_back(term::any_of(std::move(failures)));
      break;
    }
  }

  for (auto& n : notes) cs.property_notes.push_back(std::move(n));
  for (auto& t : pending) cs.add(std::move(t), Section::Property);
}

std::string compose_task(const VerificationTask& task) {
  const auto& graph = task.model;
  if (graph.inputs.size() != 1 || graph.outputs.size() != 1) {
    throw Error(ErrorKind::ShapeMismatch, "tasks need a network with one input and one output");
  }
  if (graph.inputs[0].shape != task.simulator.input_shape()) {
    throw Error(ErrorKind::ShapeMismatch, "network input " + graph.inputs[0].shape.str() +
                                              " does not match simulator image " +
                                              task.simulator.input_shape().str());
  }
  validate_property(task.property, task.simulator, graph.outputs[0].shape, graph.inputs[0].shape);

  ConstraintSystem cs = lower_graph(graph);
  cs.logic_tag = task.logic;
  emit_input_constraints(task.simulator, cs);
  emit_property_negation(task.property, task.simulator, cs, task.fig5_compat);

  EmitOptions options;
  options.logic = task.logic;
  options.fig5_compat = task.fig5_compat;
  options.produce_models = true;
  options.check_sat = true;
  return emit_smtlib(cs, options);
}

}  // namespace onnx2smt
