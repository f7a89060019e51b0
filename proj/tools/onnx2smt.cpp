// onnx2smt command-line driver: translate, verify, oracle, dump.

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "onnx2smt/camus.hpp"
#include "onnx2smt/error.hpp"
#include "onnx2smt/lowering.hpp"
#include "onnx2smt/onnx.hpp"
#include "onnx2smt/oracle.hpp"
#include "onnx2smt/report.hpp"
#include "onnx2smt/solver.hpp"

namespace fs = std::filesystem;
using namespace onnx2smt;

namespace {

struct Options {
  std::string model;
  std::string spec;
  std::string out;
  std::string logic = "QF_NRA";
  std::vector<std::string> solvers;
  double timeout = 60.0;
  bool portfolio = false;
  std::uint64_t max_enum = std::uint64_t{1} << 20;
  unsigned threads = 1;
  bool fig5_compat = false;
  bool json = false;
};

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
  out << text;
  if (!out) throw Error(ErrorKind::Io, "short write to '" + path + "'");
}

NierGraph load_model(const std::string& path) { return to_nier(load_onnx(path)); }

void print_report(const RunReport& report, bool json) {
  std::cout << (json ? format_report_json(report) : format_report(report));
}

std::string grid_for(const Verdict& v, const TaskFile& task) {
  if (!v.witness) return "";
  return render_image(v.witness->image, task.simulator, task.property.zone(task.simulator.grid));
}

int cmd_translate(const Options& o) {
  const NierGraph graph = load_model(o.model);
  std::string text;
  if (!o.spec.empty()) {
    const TaskFile task = load_task_file(o.spec);
    text = compose_task(VerificationTask{graph, task.simulator, task.property, o.logic, o.fig5_compat});
  } else {
    EmitOptions emit;
    emit.logic = o.logic;
    emit.fig5_compat = o.fig5_compat;
    emit.check_sat = true;
    text = emit_smtlib(lower_graph(graph), emit);
  }
  if (o.out.empty() || o.out == "-") {
    std::cout << text;
  } else {
    write_file(o.out, text);
  }
  return 0;
}

std::vector<SolverConfig> pick_solvers(const Options& o) {
  std::vector<SolverConfig> configs;
  for (const auto& s : o.solvers) configs.push_back(solver_config(s));
  if (configs.empty()) {
    configs = installed_solvers();
    if (configs.empty()) throw Error(ErrorKind::SolverNotFound, "no SMT solver found on PATH (tried z3, cvc5, cvc4, yices)");
    if (!o.portfolio) configs.resize(1);
  } else if (!o.portfolio && configs.size() > 1) {
    configs.resize(1);
  }
  const auto timeout = std::chrono::milliseconds(static_cast<std::int64_t>(std::ceil(o.timeout * 1000.0)));
  for (auto& c : configs) c.timeout = timeout;
  return configs;
}

int cmd_verify(const Options& o) {
  const auto start = std::chrono::steady_clock::now();
  const TaskFile task = load_task_file(o.spec);
  const NierGraph graph = load_model(o.model);
  const auto solvers = pick_solvers(o);
  const std::string smt_path =
      o.out.empty() ? (fs::temp_directory_path() / (fs::path(o.model).stem().string() + ".task.smt2")).string() : o.out;

  const VerifyResult result =
      verify(VerificationTask{graph, task.simulator, task.property, o.logic, o.fig5_compat}, solvers, smt_path);
  RunReport report;
  report.verdict = result.verdict;
  report.solver = result.verdict.solver;
  report.artifacts = {result.smt_path};
  report.grid = grid_for(result.verdict, task);
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  print_report(report, o.json);
  return exit_code(report.verdict.status);
}

int cmd_oracle(const Options& o) {
  const auto start = std::chrono::steady_clock::now();
  const TaskFile task = load_task_file(o.spec);
  const NierGraph graph = load_model(o.model);
  RunReport report;
  report.verdict = brute_force_verify(graph, task.simulator, task.property, BruteForceOptions{o.max_enum, o.threads});
  report.solver = report.verdict.solver;
  report.grid = grid_for(report.verdict, task);
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  print_report(report, o.json);
  return exit_code(report.verdict.status);
}

int cmd_dump(const Options& o, bool raw) {
  NierGraph graph = load_model(o.model);
  if (!raw) graph = rewrite(graph);
  const std::string text = dump(graph);
  if (o.out.empty() || o.out == "-") {
    std::cout << text;
  } else {
    write_file(o.out, text);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Translate ONNX networks into SMT-LIB verification tasks and check them"};
  app.set_config("--config", "", "TOML/INI file with default option values (command-line flags win)");
  app.require_subcommand(1);
  Options o;
  bool raw = false;

  auto add_logic = [&](CLI::App* cmd) {
    cmd->add_option("--logic", o.logic, "SMT-LIB logic")
        ->check(CLI::IsMember({"QF_NRA", "QF_LRA", "QF_LIRA"}))
        ->capture_default_str();
    cmd->add_flag("--fig5-compat", o.fig5_compat, "print negative fractions as (/ -n d) like the original tool");
  };

  auto* translate = app.add_subcommand("translate", "Emit the SMT-LIB encoding of a model (and optionally a task)");
  translate->add_option("model", o.model, "ONNX model")->required()->check(CLI::ExistingFile);
  translate->add_option("output", o.out, "output file (default: stdout)");
  translate->add_option("--out", o.out, "output file (default: stdout)");
  translate->add_option("--spec", o.spec, "simulator/property file; emits a complete verification task")
      ->check(CLI::ExistingFile);
  add_logic(translate);

  auto* verify_cmd = app.add_subcommand("verify", "Compose the task, run the solver(s), confirm counterexamples");
  verify_cmd->add_option("model", o.model, "ONNX model")->required()->check(CLI::ExistingFile);
  verify_cmd->add_option("spec", o.spec, "simulator/property file")->required()->check(CLI::ExistingFile);
  verify_cmd->add_option("--out", o.out, "where to write the SMT-LIB task");
  verify_cmd->add_option("--solver", o.solvers, "z3, cvc5, cvc4, yices or a path; repeatable");
  verify_cmd->add_option("--timeout", o.timeout, "per-solver time limit in seconds")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  verify_cmd->add_flag("--portfolio", o.portfolio, "race all given (or all installed) solvers");
  verify_cmd->add_flag("--json", o.json, "print the report as JSON");
  add_logic(verify_cmd);

  auto* oracle = app.add_subcommand("oracle", "Exhaustive exact check over every simulator input");
  oracle->add_option("model", o.model, "ONNX model")->required()->check(CLI::ExistingFile);
  oracle->add_option("spec", o.spec, "simulator/property file")->required()->check(CLI::ExistingFile);
  oracle->add_option("--max-enum", o.max_enum, "maximum number of rendered images")->capture_default_str();
  oracle->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  oracle->add_flag("--json", o.json, "print the report as JSON");

  auto* dump_cmd = app.add_subcommand("dump", "Print the intermediate representation");
  dump_cmd->add_option("model", o.model, "ONNX model")->required()->check(CLI::ExistingFile);
  dump_cmd->add_option("--out", o.out, "output file (default: stdout)");
  dump_cmd->add_flag("--raw", raw, "skip the rewrite rules");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }

  try {
    if (*translate) return cmd_translate(o);
    if (*verify_cmd) return cmd_verify(o);
    if (*oracle) return cmd_oracle(o);
    return cmd_dump(o, raw);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
