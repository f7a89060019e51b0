#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "onnx2smt/error.hpp"
#include "onnx2smt/lowering.hpp"

namespace onnx2smt {

namespace {

bool is_simple_symbol(const std::string& s) {
  static const std::string extra = "~!@$%^&*_-+=<>.?/";
  if (s.empty() || (s[0] >= '0' && s[0] <= '9')) return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') ||
           extra.find(c) != std::string::npos;
  });
}

class Printer {
 public:
  Printer(const ConstraintSystem& cs, const EmitOptions& options)
      : cs_(cs), linear_(options.logic != "QF_NRA") {
    if (options.fig5_compat) {
      style_ = LiteralStyle::Fig5Compat;
    } else if (options.logic == "QF_LIRA") {
      style_ = LiteralStyle::StrictDecimal;
    }
    for (const auto& d : cs.declarations) roles_.emplace(d.name, d.role);
  }

  /// `quoted` selects |x| over bare symbols; `defining` is the variable whose
  /// own definition is being printed (never inlined).
  std::string print(const Term& t, bool quoted, const std::string& defining = {}) const {
    std::string out;
    write(t, quoted, defining, out);
    return out;
  }

  std::string symbol(const std::string& name, bool quoted) const {
    if (!quoted && is_simple_symbol(name)) return name;
    return "|" + name + "|";
  }

 private:
  bool inlined(const std::string& name, const std::string& defining) const {
    if (!linear_ || name == defining) return false;
    auto it = roles_.find(name);
    return it != roles_.end() && it->second == VarRole::Weight;
  }

  bool is_constant(const Term& t) const {
    switch (t.kind) {
      case Term::Kind::Literal: return true;
      case Term::Kind::Var: return inlined(t.symbol, {});
      case Term::Kind::App:
        return std::all_of(t.args.begin(), t.args.end(), [&](const TermPtr& a) { return is_constant(*a); });
    }
    return false;
  }

  void check_linear(const Term& t) const {
    if (!linear_ || t.kind != Term::Kind::App) return;
    if (t.symbol == "*") {
      const auto variable_factors =
          std::count_if(t.args.begin(), t.args.end(), [&](const TermPtr& a) { return !is_constant(*a); });
      if (variable_factors > 1) {
        std::string text;
        write(t, true, {}, text, false);
        throw Error(ErrorKind::LogicMismatch, "nonlinear product " + text + " under a linear logic");
      }
    } else if (t.symbol == "/") {
      if (std::any_of(t.args.begin() + 1, t.args.end(), [&](const TermPtr& a) { return !is_constant(*a); })) {
        throw Error(ErrorKind::LogicMismatch, "division by a variable under a linear logic");
      }
    }
  }

  void write(const Term& t, bool quoted, const std::string& defining, std::string& out, bool checked = true) const {
    switch (t.kind) {
      case Term::Kind::Literal:
        out += format_literal(t.value, style_);
        return;
      case Term::Kind::Var:
        if (inlined(t.symbol, defining)) {
          out += format_literal(cs_.weight_values.at(t.symbol), style_);
        } else {
          out += symbol(t.symbol, quoted);
        }
        return;
      case Term::Kind::App:
        if (checked) check_linear(t);
        out += '(';
        out += t.symbol;
        for (const auto& a : t.args) {
          out += ' ';
          write(*a, quoted, defining, out, checked);
        }
        out += ')';
        return;
    }
  }

  const ConstraintSystem& cs_;
  bool linear_;
  LiteralStyle style_ = LiteralStyle::Strict;
  std::map<std::string, VarRole> roles_;
};

const char* section_banner(VarRole role) {
  switch (role) {
    case VarRole::Input: return ";; Inputs declaration";
    case VarRole::Weight: return ";; Weights declaration";
    case VarRole::Intermediate: return ";; Encoded calculation";
    case VarRole::Output: return ";; Outputs declaration";
  }
  return ";;";
}

}  // namespace

std::string emit_smtlib(const ConstraintSystem& cs, const EmitOptions& options) {
  static const std::set<std::string> logics{"QF_NRA", "QF_LRA", "QF_LIRA"};
  if (!logics.count(options.logic)) throw Error(ErrorKind::InvalidSpec, "unsupported logic '" + options.logic + "'");
  cs.validate();

  const Printer printer(cs, options);
  std::multimap<std::string, const Assertion*> definitions;
  for (const auto& a : cs.assertions) {
    if (a.section == Section::Network && !a.defines.empty()) definitions.emplace(a.defines, &a);
  }

  std::ostringstream os;
  os << ";;;; Automatically generated part\n";
  os << ";; onnx2smt, naming scheme " << kNamingScheme << "\n";
  if (options.produce_models) os << "(set-option :produce-models true)\n";
  os << "(set-logic " << options.logic << ")\n";

  std::optional<VarRole> current;
  for (const auto& decl : cs.declarations) {
    if (current != decl.role) {
      os << section_banner(decl.role) << '\n';
      current = decl.role;
    }
    os << "(declare-fun " << printer.symbol(decl.name, true) << " () Real)\n";
    auto [lo, hi] = definitions.equal_range(decl.name);
    for (auto it = lo; it != hi; ++it) {
      os << "(assert " << printer.print(*it->second->term, true, decl.name) << ")\n";
    }
  }
  for (const auto& a : cs.assertions) {
    if (a.section == Section::Network && a.defines.empty()) os << "(assert " << printer.print(*a.term, true) << ")\n";
  }

  auto annotations = [&](Section section) {
    std::ostringstream block;
    for (const auto& a : cs.assertions) {
      if (a.section == section) block << "(assert " << printer.print(*a.term, false) << ")\n";
    }
    return block.str();
  };
  const std::string simulator = annotations(Section::Simulator);
  const std::string property = annotations(Section::Property);
  if (!simulator.empty() || !property.empty()) {
    os << "\n;;;; Handmade annotations\n";
    os << ";; Simulator description\n";
    for (const auto& note : cs.simulator_notes) os << ";; " << note << '\n';
    os << simulator;
    os << ";; Property to check\n";
    for (const auto& note : cs.property_notes) os << ";; " << note << '\n';
    os << property;
  }

  if (options.check_sat) os << "(check-sat)\n";
  if (options.get_model) os << "(get-model)\n";
  return os.str();
}

std::string emit_smtlib(const ConstraintSystem& cs, const std::string& logic) {
  EmitOptions options;
  options.logic = logic;
  return emit_smtlib(cs, options);
}

}  // namespace onnx2smt
