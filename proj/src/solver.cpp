#include <cctype>
#include <fstream>
#include <memory>

#include "onnx2smt/error.hpp"
#include "onnx2smt/oracle.hpp"
#include "onnx2smt/solver.hpp"

namespace onnx2smt {

std::string_view to_string(VerdictStatus status) {
  switch (status) {
    case VerdictStatus::Proven: return "proven";
    case VerdictStatus::Falsified: return "falsified";
    case VerdictStatus::Unknown: return "unknown";
    case VerdictStatus::Timeout: return "timeout";
    case VerdictStatus::SolverError: return "solver_error";
  }
  return "?";
}

namespace {

struct Sexp {
  std::string atom;  // empty for lists
  std::vector<Sexp> items;
  bool is_list = false;
};

class SexpReader {
 public:
  explicit SexpReader(const std::string& text) : text_(text) {}

  bool at_end() {
    skip();
    return pos_ >= text_.size();
  }

  Sexp read() {
    skip();
    if (pos_ >= text_.size()) fail("unexpected end of model");
    if (text_[pos_] == '(') {
      ++pos_;
      Sexp list;
      list.is_list = true;
      for (;;) {
        skip();
        if (pos_ >= text_.size()) fail("unbalanced parentheses");
        if (text_[pos_] == ')') {
          ++pos_;
          return list;
        }
        list.items.push_back(read());
      }
    }
    if (text_[pos_] == ')') fail("unexpected ')'");
    Sexp atom;
    if (text_[pos_] == '|') {
      const auto end = text_.find('|', pos_ + 1);
      if (end == std::string::npos) fail("unterminated |symbol|");
      atom.atom = text_.substr(pos_ + 1, end - pos_ - 1);
      pos_ = end + 1;
      return atom;
    }
    if (text_[pos_] == '"') {
      const auto end = text_.find('"', pos_ + 1);
      if (end == std::string::npos) fail("unterminated string");
      atom.atom = text_.substr(pos_, end - pos_ + 1);
      pos_ = end + 1;
      return atom;
    }
    const auto begin = pos_;
    while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_])) && text_[pos_] != '(' &&
           text_[pos_] != ')') {
      ++pos_;
    }
    atom.atom = text_.substr(begin, pos_ - begin);
    return atom;
  }

 private:
  void skip() {
    while (pos_ < text_.size()) {
      if (std::isspace(static_cast<unsigned char>(text_[pos_]))) {
        ++pos_;
      } else if (text_[pos_] == ';') {
        while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }
  [[noreturn]] static void fail(const std::string& msg) { throw Error(ErrorKind::UnparseableModel, msg); }

  const std::string& text_;
  std::size_t pos_ = 0;
};

Rational value_of(const Sexp& e) {
  if (!e.is_list) {
    try {
      return parse_rational(e.atom);
    } catch (const Error&) {
      throw Error(ErrorKind::UnparseableModel, "not a numeral: '" + e.atom + "'");
    }
  }
  if (e.items.size() == 2 && !e.items[0].is_list && e.items[0].atom == "-") return -value_of(e.items[1]);
  if (e.items.size() == 3 && !e.items[0].is_list && e.items[0].atom == "/") {
    const Rational den = value_of(e.items[2]);
    if (den == 0) throw Error(ErrorKind::UnparseableModel, "division by zero in model value");
    return value_of(e.items[1]) / den;
  }
  throw Error(ErrorKind::UnparseableModel, "unsupported value expression in model");
}

void collect(const Sexp& e, Assignment& out) {
  if (!e.is_list) return;
  if (!e.items.empty() && !e.items[0].is_list && e.items[0].atom == "define-fun") {
    if (e.items.size() != 5 || e.items[1].is_list || !e.items[2].is_list || e.items[3].is_list) {
      throw Error(ErrorKind::UnparseableModel, "malformed define-fun");
    }
    const std::string& name = e.items[1].atom;
    if (!e.items[2].items.empty()) throw Error(ErrorKind::UnparseableModel, "function '" + name + "' takes arguments");
    if (e.items[3].atom != "Real" && e.items[3].atom != "Int") {
      throw Error(ErrorKind::UnparseableModel, "'" + name + "' has sort " + e.items[3].atom);
    }
    out[name] = value_of(e.items[4]);
    return;
  }
  // (model ...) wrapper or a bare list of definitions
  std::size_t first = 0;
  if (!e.items.empty() && !e.items[0].is_list) {
    if (e.items[0].atom != "model") throw Error(ErrorKind::UnparseableModel, "unexpected '" + e.items[0].atom + "'");
    first = 1;
  }
  for (std::size_t i = first; i < e.items.size(); ++i) collect(e.items[i], out);
}

}  // namespace

Assignment parse_model(const std::string& text) {
  SexpReader reader(text);
  Assignment out;
  bool any = false;
  while (!reader.at_end()) {
    const Sexp e = reader.read();
    if (!e.is_list) throw Error(ErrorKind::UnparseableModel, "unexpected token '" + e.atom + "'");
    if (!e.items.empty() && !e.items[0].is_list && e.items[0].atom == "error") {
      throw Error(ErrorKind::UnparseableModel, "solver reported an error instead of a model");
    }
    collect(e, out);
    any = true;
  }
  if (!any) throw Error(ErrorKind::UnparseableModel, "empty model");
  return out;
}

ReconstructedInput reconstruct_input(const Assignment& assignment, const SimulatorSpec& sim) {
  const TensorShape shape = sim.input_shape();
  std::vector<Rational> values;
  std::vector<std::pair<std::int64_t, std::int64_t>> obstacles;
  for (std::int64_t flat = 0; flat < shape.element_count(); ++flat) {
    const std::string name = input_var_name(shape, flat);
    const auto it = assignment.find(name);
    if (it == assignment.end()) throw Error(ErrorKind::IncompleteModel, "model has no value for " + name);
    const Rational& v = it->second;
    const std::int64_t row = flat / sim.grid.width;
    const std::int64_t col = flat % sim.grid.width;
    if (sim.pixels.kind == PixelDomain::Kind::Binary) {
      if (v != sim.pixels.lo && v != sim.pixels.hi) {
        throw Error(ErrorKind::DomainViolation, name + " = " + v.get_str() + " is not a binary pixel value");
      }
      if (v == sim.pixels.hi) obstacles.emplace_back(row, col);
    } else if (v < sim.pixels.lo || v > sim.pixels.hi) {
      throw Error(ErrorKind::DomainViolation, name + " = " + v.get_str() + " is outside the pixel interval");
    }
    values.push_back(v);
  }
  return {RationalTensor(shape, std::move(values)), std::move(obstacles)};
}

bool confirm_counterexample(const NierGraph& graph, const RationalTensor& image, const PropertySpec& prop,
                            const SimulatorSpec& sim) {
  const ExactResult r = eval_exact(graph, image);
  return violates(prop, sim, image, r.outputs.front());
}

VerifyResult verify(const VerificationTask& task, std::span<const SolverConfig> solvers, const std::string& smt_path) {
  const std::string text = compose_task(task);
  {
    std::ofstream out(smt_path);
    if (!out) throw Error(ErrorKind::Io, "cannot write '" + smt_path + "'");
    out << text;
  }

  const RawOutcome raw = solvers.size() == 1 ? run_solver(smt_path, solvers.front()) : run_portfolio(smt_path, solvers);
  VerifyResult result;
  result.smt_path = smt_path;
  result.seconds = raw.seconds;
  Verdict& v = result.verdict;
  v.solver = raw.solver;
  switch (raw.status) {
    case RawStatus::Unsat:
      v.status = VerdictStatus::Proven;
      break;
    case RawStatus::Unknown:
      v.status = VerdictStatus::Unknown;
      v.diagnostic = raw.solver + " answered unknown";
      break;
    case RawStatus::Timeout:
      v.status = VerdictStatus::Timeout;
      v.diagnostic = raw.solver + " exceeded the time limit";
      break;
    case RawStatus::Error: {
      v.status = VerdictStatus::SolverError;
      std::string detail = raw.stderr_text.empty() ? raw.stdout_text : raw.stderr_text;
      if (auto nl = detail.find('\n'); nl != std::string::npos) detail.resize(nl);
      v.diagnostic = raw.solver + " failed (exit " + std::to_string(raw.exit_code) + ")" +
                     (detail.empty() ? "" : ": " + detail);
      break;
    }
    case RawStatus::Sat: {
      const Assignment model = parse_model(raw.model_text);
      ReconstructedInput input = reconstruct_input(model, task.simulator);
      if (!confirm_counterexample(task.model, input.image, task.property, task.simulator)) {
        throw Error(ErrorKind::EncodingBug,
                    raw.solver + " model does not violate the property under exact evaluation");
      }
      v.status = VerdictStatus::Falsified;
      v.witness = Counterexample{model, std::move(input.image), std::move(input.obstacles), true};
      break;
    }
  }
  return result;
}

}  // namespace onnx2smt
