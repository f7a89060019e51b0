// Acceptance suite: one PASS/FAIL line per criterion. Exit status is zero
// only when every criterion passes.

#include <mpfr.h>

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <random>
#include <regex>
#include <sstream>

#include "fixtures.hpp"
#include "onnx2smt/camus.hpp"
#include "onnx2smt/error.hpp"
#include "onnx2smt/lowering.hpp"
#include "onnx2smt/onnx.hpp"
#include "onnx2smt/oracle.hpp"
#include "onnx2smt/solver.hpp"
#include "process.hpp"

using namespace onnx2smt;
namespace fx = fixtures;

namespace {

// Pinned tolerances.
constexpr auto kSolverTimeout = std::chrono::seconds(60);
constexpr std::size_t kMinFixtures = 20;
constexpr std::size_t kRoundTrips = 1000000;
constexpr std::size_t kLoweringCases = 50;
constexpr std::size_t kReconstructionFixtures = 5;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Case {
  std::string name;
  OnnxSubsetModel model;
  std::int64_t side = 0;
  PropertyKind kind = PropertyKind::DangerZoneAlert;
};

struct Falsified {
  std::string where;
  NierGraph graph;
  SimulatorSpec sim;
  PropertySpec prop;
  Verdict verdict;
};

std::vector<SolverConfig> solvers() {
  std::vector<SolverConfig> out;
  for (const char* name : {"z3", "yices", "cvc5", "cvc4"}) {
    SolverConfig c = solver_config(name);
    if (!find_executable(c.executable)) continue;
    c.timeout = kSolverTimeout;
    out.push_back(c);
  }
  return out;
}

std::string yaml_for(std::int64_t side, PropertyKind kind) {
  std::ostringstream os;
  os << "version: 1\nsimulator:\n  grid: {height: " << side << ", width: " << side << "}\nproperty:\n  kind: "
     << to_string(kind) << "\n";
  return os.str();
}

std::vector<Case> equivalence_cases() {
  using K = PropertyKind;
  std::vector<Case> c;
  auto add = [&](std::string name, OnnxSubsetModel m, std::int64_t side, K kind) {
    c.push_back({std::move(name), std::move(m), side, kind});
  };
  // 2x2
  add("correct-2-dza", fx::correct_net(2, 2), 2, K::DangerZoneAlert);
  add("correct-2-nfa", fx::correct_net(2, 2), 2, K::NoFalseAlert);
  add("zero-2-dza", fx::zero_net(2, 2), 2, K::DangerZoneAlert);
  add("blind-2-dza", fx::blind_spot_net(2, 2), 2, K::DangerZoneAlert);
  add("jumpy-2-nfa", fx::jumpy_net(2, 2), 2, K::NoFalseAlert);
  add("random-2a-dza", fx::random_mlp(2, 2, 1), 2, K::DangerZoneAlert);
  add("random-2b-nfa", fx::random_mlp(2, 2, 2), 2, K::NoFalseAlert);
  add("conv-2-dza", fx::conv_net(2, 2, 3), 2, K::DangerZoneAlert);
  // 3x3
  add("deep-3-dza", fx::correct_deep_net(3, 3), 3, K::DangerZoneAlert);
  add("deep-3-nfa", fx::correct_deep_net(3, 3), 3, K::NoFalseAlert);
  add("zero-3-nfa", fx::zero_net(3, 3), 3, K::NoFalseAlert);
  add("always-3-nfa", fx::always_alert_net(3, 3), 3, K::NoFalseAlert);
  add("blind-3-dza", fx::blind_spot_net(3, 3), 3, K::DangerZoneAlert);
  add("random-3a-dza", fx::random_mlp(3, 3, 4), 3, K::DangerZoneAlert);
  add("random-3b-nfa", fx::random_mlp(3, 3, 5), 3, K::NoFalseAlert);
  add("conv-3-nfa", fx::conv_net(3, 3, 6), 3, K::NoFalseAlert);
  const OnnxSubsetModel toy = load_onnx(fx::fixture_path("toy3x3.onnx"));
  add("torch-toy-3-dza", toy, 3, K::DangerZoneAlert);
  add("torch-toy-3-nfa", toy, 3, K::NoFalseAlert);
  // 4x4
  add("correct-4-dza", fx::correct_net(4, 4), 4, K::DangerZoneAlert);
  add("deep-4-nfa", fx::correct_deep_net(4, 4), 4, K::NoFalseAlert);
  add("jumpy-4-nfa", fx::jumpy_net(4, 4), 4, K::NoFalseAlert);
  add("blind-4-dza", fx::blind_spot_net(4, 4), 4, K::DangerZoneAlert);
  add("random-4a-dza", fx::random_mlp(4, 4, 7), 4, K::DangerZoneAlert);
  add("random-4b-nfa", fx::random_mlp(4, 4, 8), 4, K::NoFalseAlert);
  add("conv-4-dza", fx::conv_net(4, 4, 9), 4, K::DangerZoneAlert);
  return c;
}

NierGraph ingest(const OnnxSubsetModel& m) {
  const std::string bytes = serialize_onnx(m);
  return to_nier(parse_onnx(std::vector<std::uint8_t>(bytes.begin(), bytes.end())));
}

// ---------------------------------------------------------------------------

Outcome criterion1(const std::vector<SolverConfig>& configs, std::vector<Falsified>& falsified,
                   const std::string& dir) {
  if (configs.empty()) return {false, "no SMT solver installed"};
  const auto cases = equivalence_cases();
  std::size_t agree = 0;
  double slowest = 0.0;
  std::string slowest_name;
  std::vector<std::string> problems;
  std::vector<std::string> notes;
  std::size_t proven = 0;
  for (const auto& c : cases) {
    const NierGraph g = ingest(c.model);
    const SimulatorSpec sim = fx::binary_grid(c.side, c.side);
    const PropertySpec prop = fx::property(c.kind);
    const Verdict oracle = brute_force_verify(g, sim, prop);
    if (oracle.status == VerdictStatus::Falsified) falsified.push_back({c.name + "/oracle", g, sim, prop, oracle});
    bool ok = true;
    for (const auto& cfg : configs) {
      const std::vector<SolverConfig> one{cfg};
      try {
        const VerifyResult r = verify(VerificationTask{g, sim, prop}, one, dir + "/" + c.name + "." + cfg.name + ".smt2");
        if (&cfg == &configs.front() && r.seconds > slowest) {
          slowest = r.seconds;
          slowest_name = c.name + "/" + cfg.name;
        }
        if (r.verdict.status == VerdictStatus::Falsified) {
          falsified.push_back({c.name + "/" + cfg.name, g, sim, prop, r.verdict});
        }
        const bool primary = &cfg == &configs.front();
        const bool definite = r.verdict.status == VerdictStatus::Proven || r.verdict.status == VerdictStatus::Falsified;
        const std::string what = c.name + "/" + cfg.name + ": solver " + std::string(to_string(r.verdict.status)) +
                                 " vs oracle " + std::string(to_string(oracle.status));
        if (primary && (r.verdict.status != oracle.status || r.seconds >= static_cast<double>(kSolverTimeout.count()))) {
          ok = false;
          problems.push_back(what);
        } else if (!primary && definite && r.verdict.status != oracle.status) {
          ok = false;
          problems.push_back(what);
        } else if (!primary && !definite) {
          notes.push_back(what + " (cross-check only)");
        }
      } catch (const Error& e) {
        ok = false;
        problems.push_back(c.name + "/" + cfg.name + ": " + e.what());
      }
    }
    if (oracle.status == VerdictStatus::Proven) ++proven;
    if (ok) ++agree;
  }
  std::ostringstream os;
  os << agree << "/" << cases.size() << " fixtures agree (" << proven << " proven, " << cases.size() - proven
     << " falsified by the oracle) with " << configs.front().name;
  if (configs.size() > 1) {
    os << ", cross-checked by";
    for (std::size_t i = 1; i < configs.size(); ++i) os << " " << configs[i].name;
  }
  os << "; slowest " << configs.front().name << " run " << slowest << " s (" << slowest_name << ")";
  for (const auto& p : problems) os << "; " << p;
  for (const auto& n : notes) os << "; " << n;
  return {agree == cases.size() && cases.size() >= kMinFixtures, os.str()};
}

Outcome criterion2(const std::vector<Falsified>& falsified) {
  std::size_t confirmed = 0;
  std::vector<std::string> bad;
  for (const auto& f : falsified) {
    const auto& w = f.verdict.witness;
    const bool ok = w && w->confirmed && confirm_counterexample(f.graph, w->image, f.prop, f.sim);
    if (ok) {
      ++confirmed;
    } else {
      bad.push_back(f.where);
    }
  }
  std::ostringstream os;
  os << confirmed << "/" << falsified.size() << " falsified verdicts confirmed by exact evaluation";
  for (const auto& b : bad) os << "; unconfirmed: " << b;
  return {!falsified.empty() && confirmed == falsified.size(), os.str()};
}

float reround(const Rational& q) {
  mpfr_t x;
  mpfr_init2(x, 24);
  mpfr_set_q(x, q.get_mpq_t(), MPFR_RNDN);
  const float f = mpfr_get_flt(x, MPFR_RNDN);
  mpfr_clear(x);
  return f;
}

Outcome criterion3(const std::string& dir) {
  std::mt19937 rng(20240601);
  std::size_t exact = 0;
  std::size_t negative_zero = 0;
  std::size_t tried = 0;
  while (tried < kRoundTrips) {
    const std::uint32_t bits = static_cast<std::uint32_t>(rng());
    const float f = std::bit_cast<float>(bits);
    if (!std::isfinite(f)) continue;
    ++tried;
    const Rational q = float32_to_rational(f);
    const std::uint32_t back = std::bit_cast<std::uint32_t>(reround(q));
    // Rationals carry no signed zero: -0.0 maps to 0, which re-rounds to +0.0.
    if (bits == 0x80000000u) {
      ++negative_zero;
      if (back == 0u) ++exact;
    } else if (back == bits && is_dyadic(q)) {
      ++exact;
    }
  }

  const float fig5 = std::ldexp(-5585077.0F, -25);
  const Rational q = float32_to_rational(fig5);
  const bool tokens = q.get_num() == -5585077 && q.get_den() == 33554432;

  // A network holding that weight, through the command-line translator.
  fx::Dense d{{fig5, 1.0F}, {0.0F}, 2, 1};
  save_onnx(fx::mlp(1, 2, {d}), dir + "/fig5.onnx");
  const auto strict = fx::run_cli({"translate", dir + "/fig5.onnx", dir + "/fig5.smt2"});
  const auto compat = fx::run_cli({"translate", dir + "/fig5.onnx", dir + "/fig5-compat.smt2", "--fig5-compat"});
  const bool strict_ok = strict.exit_code == 0 &&
                         fx::read_file(dir + "/fig5.smt2").find("(- (/ 5585077 33554432))") != std::string::npos;
  const bool compat_ok = compat.exit_code == 0 &&
                         fx::read_file(dir + "/fig5-compat.smt2").find("(/ -5585077 33554432)") != std::string::npos;

  std::ostringstream os;
  os << exact << "/" << tried << " float32 values round-trip bit-exactly";
  if (negative_zero) os << " (" << negative_zero << " negative zeros compared by value)";
  os << "; weight -5585077*2^-25 -> " << q.get_num().get_str() << "/" << q.get_den().get_str()
     << "; strict literal " << (strict_ok ? "ok" : "MISSING") << "; --fig5-compat literal "
     << (compat_ok ? "ok" : "MISSING");
  return {exact == tried && tokens && strict_ok && compat_ok, os.str()};
}

std::size_t count_of(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

// Parse check: the file minus (check-sat) must be read with no output at all.
bool accepted(const std::string& file, SolverConfig cfg, std::string& why) {
  std::string text = fx::read_file(file);
  text.erase(text.find("(check-sat)"), std::string("(check-sat)").size());
  const std::string parse_only = file + "." + cfg.name + ".parse.smt2";
  fx::write_file(parse_only, text);
  cfg.model_request = false;
  const RawOutcome r = run_solver(parse_only, cfg);
  if (r.stdout_text.empty() && r.stderr_text.empty() && r.exit_code == 0) return true;
  why = cfg.name + " on " + parse_only + ": " + (r.stderr_text.empty() ? r.stdout_text : r.stderr_text).substr(0, 200);
  return false;
}

Outcome criterion4(const std::vector<SolverConfig>& configs, const std::string& dir) {
  std::vector<SolverConfig> parsers;
  for (const auto& c : configs) {
    if (c.name == "z3" || c.name == "yices" || c.name == "cvc5" || c.name == "cvc4") parsers.push_back(c);
  }
  const std::regex decl(R"(\(declare-fun \|actual_(input|output)_\d+_\d+_\d+_\d+\| \(\) Real\))");
  const std::regex shape(R"(\(assert \(< actual_output_\d+_\d+_\d+_\d+ actual_output_\d+_\d+_\d+_\d+\)\))");
  std::size_t files = 0;
  std::size_t deterministic = 0;
  std::size_t well_formed = 0;
  std::size_t shaped = 0;
  std::size_t shape_expected = 0;
  std::size_t parsed = 0;
  std::vector<std::string> problems;

  for (const auto& c : equivalence_cases()) {
    const std::string base = dir + "/" + c.name;
    save_onnx(c.model, base + ".onnx");
    fx::write_file(base + ".yaml", yaml_for(c.side, c.kind));
    for (const bool compat : {false, true}) {
      std::vector<std::string> args{"translate", base + ".onnx", "--spec", base + ".yaml"};
      if (compat) args.push_back("--fig5-compat");
      const std::string suffix = compat ? ".compat" : "";
      auto first = args;
      first.push_back(base + suffix + ".1.smt2");
      auto second = args;
      second.push_back(base + suffix + ".2.smt2");
      const auto r1 = fx::run_cli(first);
      const auto r2 = fx::run_cli(second);
      ++files;
      if (r1.exit_code != 0 || r2.exit_code != 0) {
        problems.push_back(c.name + ": translate failed: " + r1.err + r2.err);
        continue;
      }
      const std::string a = fx::read_file(base + suffix + ".1.smt2");
      if (a == fx::read_file(base + suffix + ".2.smt2")) ++deterministic;

      const auto pixels = static_cast<std::ptrdiff_t>(c.side * c.side);
      const auto decls = std::distance(std::sregex_iterator(a.begin(), a.end(), decl), std::sregex_iterator());
      const bool ok = count_of(a, "(set-logic ") == 1 && count_of(a, "(check-sat)") == 1 && decls == pixels + 2;
      if (ok) {
        ++well_formed;
      } else {
        problems.push_back(c.name + suffix + ": header/declaration check failed");
      }

      // Strict comparison shape: no-false-alert by default, danger-zone
      // alert in the original tool's form.
      const bool expect_shape = compat ? c.kind == PropertyKind::DangerZoneAlert : c.kind == PropertyKind::NoFalseAlert;
      if (expect_shape) {
        ++shape_expected;
        if (std::regex_search(a, shape)) {
          ++shaped;
        } else {
          problems.push_back(c.name + suffix + ": output comparison shape missing");
        }
      }

      if (!compat) {
        bool all = parsers.size() >= 2;
        for (const auto& p : parsers) {
          std::string why;
          if (!accepted(base + ".1.smt2", p, why)) {
            all = false;
            problems.push_back(why);
          }
        }
        if (all) ++parsed;
      }
    }
  }
  const std::size_t strict_files = files / 2;
  std::ostringstream os;
  os << deterministic << "/" << files << " byte-identical re-translations; " << well_formed << "/" << files
     << " with one set-logic, one check-sat and actual_input_/actual_output_ declarations; " << shaped << "/"
     << shape_expected << " with (assert (< actual_output_... actual_output_...)); " << parsed << "/" << strict_files
     << " parsed without diagnostics by [";
  for (std::size_t i = 0; i < parsers.size(); ++i) os << (i ? "," : "") << parsers[i].name;
  os << "]";
  for (std::size_t i = 0; i < problems.size() && i < 5; ++i) os << "; " << problems[i];
  return {parsers.size() >= 2 && deterministic == files && well_formed == files && shaped == shape_expected &&
              shape_expected > 0 && parsed == strict_files,
          os.str()};
}

Outcome criterion5(const std::vector<SolverConfig>& configs, const std::string& dir) {
  if (configs.empty()) return {false, "no SMT solver installed"};
  SolverConfig cfg = configs.front();
  cfg.model_request = false;
  std::mt19937_64 rng(5150);
  std::size_t sat_ok = 0;
  std::size_t unsat_ok = 0;
  std::vector<std::string> problems;
  for (std::size_t i = 0; i < kLoweringCases; ++i) {
    const NierGraph g = fx::random_graph(rng);
    const RationalTensor x = fx::random_input(g.inputs[0].shape, rng);
    const RationalTensor y = eval_exact(g, x).outputs.at(0);
    const ConstraintSystem cs = lower_graph(g);

    std::string base = emit_smtlib(cs, "QF_NRA");
    for (std::size_t k = 0; k < cs.input_vars.size(); ++k) {
      base += "(assert (= |" + cs.input_vars[k] + "| " + format_literal(x.data[k]) + "))\n";
    }
    std::string equal = base;
    for (std::size_t k = 0; k < cs.output_vars.size(); ++k) {
      equal += "(assert (= |" + cs.output_vars[k] + "| " + format_literal(y.data[k]) + "))\n";
    }
    const std::size_t pick = std::uniform_int_distribution<std::size_t>(0, cs.output_vars.size() - 1)(rng);
    const std::string out = "|" + cs.output_vars[pick] + "|";
    const std::string lit = format_literal(y.data[pick]);
    const std::string differ = base + "(assert (or (< " + out + " " + lit + ") (> " + out + " " + lit + ")))\n";

    const std::string f1 = dir + "/lowering-" + std::to_string(i) + "-eq.smt2";
    const std::string f2 = dir + "/lowering-" + std::to_string(i) + "-ne.smt2";
    fx::write_file(f1, equal + "(check-sat)\n");
    fx::write_file(f2, differ + "(check-sat)\n");
    const auto r1 = run_solver(f1, cfg);
    const auto r2 = run_solver(f2, cfg);
    if (r1.status == RawStatus::Sat) {
      ++sat_ok;
    } else {
      problems.push_back("case " + std::to_string(i) + " equalities: " + std::string(to_string(r1.status)));
    }
    if (r2.status == RawStatus::Unsat) {
      ++unsat_ok;
    } else {
      problems.push_back("case " + std::to_string(i) + " disequality: " + std::string(to_string(r2.status)));
    }
  }
  std::ostringstream os;
  os << sat_ok << "/" << kLoweringCases << " sat with exact outputs, " << unsat_ok << "/" << kLoweringCases
     << " unsat with one output disequality (" << cfg.name << ")";
  for (std::size_t i = 0; i < problems.size() && i < 5; ++i) os << "; " << problems[i];
  return {sat_ok == kLoweringCases && unsat_ok == kLoweringCases, os.str()};
}

struct Reconstruction {
  std::string name;
  OnnxSubsetModel model;
  SimulatorSpec sim;
};

std::vector<Reconstruction> reconstruction_fixtures() {
  auto diagonal = [](std::int64_t n, float v) {
    fx::Dense d{std::vector<float>(static_cast<std::size_t>(n * n), 0.0F), std::vector<float>(static_cast<std::size_t>(n), 0.0F), n, n};
    for (std::int64_t i = 0; i < n; ++i) d.weight[static_cast<std::size_t>(i * n + i)] = v;
    return d;
  };
  std::vector<Reconstruction> out;
  out.push_back({"identity-2", fx::mlp(2, 2, {diagonal(4, 1.0F)}), fx::binary_grid(2, 2)});
  out.push_back({"relu-identity-3", fx::mlp(3, 3, {diagonal(9, 1.0F), diagonal(9, 1.0F)}), fx::binary_grid(3, 3)});
  fx::Dense half = diagonal(4, 1.0F);
  half.weight[5] = 0.5F;
  out.push_back({"dimmed-pixel-2", fx::mlp(2, 2, {half}), fx::binary_grid(2, 2)});
  fx::Dense swapped = diagonal(9, 1.0F);
  swapped.weight[0] = 0.0F;
  swapped.weight[1] = 1.0F;
  swapped.weight[9] = 1.0F;
  swapped.weight[10] = 0.0F;
  out.push_back({"swapped-pixels-3", fx::mlp(3, 3, {swapped}), fx::binary_grid(3, 3)});
  SimulatorSpec scaled = fx::binary_grid(2, 2);
  scaled.pixels.hi = 2;
  out.push_back({"scaled-identity-2", fx::mlp(2, 2, {diagonal(4, 0.5F)}), scaled});
  fx::Dense noisy = diagonal(4, 1.0F);
  noisy.bias[2] = 0.125F;
  out.push_back({"biased-2", fx::mlp(2, 2, {noisy}), fx::binary_grid(2, 2)});
  return out;
}

Outcome criterion6(const std::vector<SolverConfig>& configs, std::vector<Falsified>& falsified,
                   const std::string& dir) {
  if (configs.empty()) return {false, "no SMT solver installed"};
  const std::vector<SolverConfig> one{configs.front()};
  std::size_t agree = 0;
  std::size_t proven = 0;
  std::vector<std::string> problems;
  const auto fixtures = reconstruction_fixtures();
  for (const auto& f : fixtures) {
    const NierGraph g = ingest(f.model);
    PropertySpec identity = fx::property(PropertyKind::IdentityReconstruction);
    PropertySpec linf = fx::property(PropertyKind::ToleranceReconstruction);
    linf.epsilon = 0;
    PropertySpec l1 = linf;
    l1.norm = Norm::L1;
    std::vector<VerdictStatus> statuses;
    std::string line = f.name + ":";
    for (const auto& [label, p] : {std::pair{"identity", identity}, std::pair{"linf", linf}, std::pair{"l1", l1}}) {
      try {
        const auto r = verify(VerificationTask{g, f.sim, p}, one, dir + "/" + f.name + "." + label + ".smt2");
        statuses.push_back(r.verdict.status);
        if (r.verdict.status == VerdictStatus::Falsified) {
          falsified.push_back({f.name + "/" + label, g, f.sim, p, r.verdict});
        }
        line += std::string(" ") + label + "=" + std::string(to_string(r.verdict.status));
      } catch (const Error& e) {
        statuses.push_back(VerdictStatus::SolverError);
        line += std::string(" ") + label + "=" + e.what();
      }
    }
    const VerdictStatus oracle = brute_force_verify(g, f.sim, identity).status;
    const bool same = std::all_of(statuses.begin(), statuses.end(), [&](VerdictStatus s) { return s == oracle; });
    if (same) {
      ++agree;
      if (oracle == VerdictStatus::Proven) ++proven;
    } else {
      problems.push_back(line + " oracle=" + std::string(to_string(oracle)));
    }
  }
  std::ostringstream os;
  os << agree << "/" << fixtures.size() << " fixtures give the same verdict for identity, L-inf eps=0 and L1 eps=0 ("
     << proven << " proven, " << agree - proven << " falsified; oracle agrees)";
  for (const auto& p : problems) os << "; " << p;
  return {agree == fixtures.size() && fixtures.size() >= kReconstructionFixtures && proven > 0 && proven < agree,
          os.str()};
}

}  // namespace

int main() {
  const std::string dir = fx::scratch_dir("acceptance");
  const auto configs = solvers();
  std::vector<Falsified> falsified;
  bool all = true;

  auto report = [&](int id, const char* title, const std::function<Outcome()>& run) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    all = all && o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << title << "): " << o.detail << " ["
              << static_cast<int>(secs * 10) / 10.0 << " s]" << std::endl;
  };

  report(1, "oracle/solver equivalence", [&] { return criterion1(configs, falsified, dir); });
  report(6, "tolerance eps=0 vs identity", [&] { return criterion6(configs, falsified, dir); });
  report(2, "counterexample soundness", [&] { return criterion2(falsified); });
  report(3, "dyadic exactness", [&] { return criterion3(dir); });
  report(4, "emission fidelity and determinism", [&] { return criterion4(configs, dir); });
  report(5, "lowering soundness", [&] { return criterion5(configs, dir); });
  return all ? 0 : 1;
}
