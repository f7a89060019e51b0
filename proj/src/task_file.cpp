#include <yaml-cpp/yaml.h>

#include <fstream>
#include <sstream>

#include "onnx2smt/camus.hpp"
#include "onnx2smt/error.hpp"

namespace onnx2smt {

namespace {

constexpr int kSchemaVersion = 1;

Error invalid(const std::string& what) { return Error(ErrorKind::InvalidSpec, what); }

Rational rational_at(const YAML::Node& node, const std::string& key, const Rational& fallback) {
  const YAML::Node v = node[key];
  if (!v) return fallback;
  if (!v.IsScalar()) throw invalid("'" + key + "' must be a number");
  return parse_rational(v.as<std::string>());
}

std::int64_t int_at(const YAML::Node& node, const std::string& key, std::int64_t fallback) {
  const YAML::Node v = node[key];
  if (!v) return fallback;
  try {
    return v.as<std::int64_t>();
  } catch (const YAML::Exception&) {
    throw invalid("'" + key + "' must be an integer");
  }
}

std::string string_at(const YAML::Node& node, const std::string& key, const std::string& fallback) {
  const YAML::Node v = node[key];
  if (!v) return fallback;
  if (!v.IsScalar()) throw invalid("'" + key + "' must be a string");
  return v.as<std::string>();
}

std::pair<std::int64_t, std::int64_t> range_at(const YAML::Node& node, const std::string& key,
                                               std::pair<std::int64_t, std::int64_t> fallback) {
  const YAML::Node v = node[key];
  if (!v) return fallback;
  if (!v.IsSequence() || v.size() != 2) throw invalid("'" + key + "' must be a [begin, end) pair");
  return {v[0].as<std::int64_t>(), v[1].as<std::int64_t>()};
}

SimulatorSpec parse_simulator(const YAML::Node& node) {
  if (!node || !node.IsMap()) throw invalid("missing 'simulator' section");
  SimulatorSpec sim;
  const YAML::Node grid = node["grid"];
  if (!grid || !grid.IsMap()) throw invalid("missing 'simulator.grid'");
  sim.grid.height = int_at(grid, "height", 0);
  sim.grid.width = int_at(grid, "width", 0);

  const YAML::Node pixels = node["pixels"];
  if (pixels) {
    const std::string domain = string_at(pixels, "domain", "binary");
    if (domain == "binary") {
      sim.pixels.kind = PixelDomain::Kind::Binary;
    } else if (domain == "interval") {
      sim.pixels.kind = PixelDomain::Kind::Interval;
    } else {
      throw invalid("unknown pixel domain '" + domain + "'");
    }
    sim.pixels.lo = rational_at(pixels, "lo", Rational(0));
    sim.pixels.hi = rational_at(pixels, "hi", Rational(1));
  }
  sim.validate();
  return sim;
}

PropertyKind kind_from(const std::string& s) {
  for (auto k : {PropertyKind::DangerZoneAlert, PropertyKind::NoFalseAlert, PropertyKind::IdentityReconstruction,
                 PropertyKind::ToleranceReconstruction, PropertyKind::IoContract}) {
    if (to_string(k) == s) return k;
  }
  throw invalid("unknown property kind '" + s + "'");
}

std::vector<LinearConstraint> constraints_at(const YAML::Node& node, const std::string& key) {
  std::vector<LinearConstraint> out;
  const YAML::Node v = node[key];
  if (!v) return out;
  if (!v.IsSequence()) throw invalid("'" + key + "' must be a list of constraints");
  for (const auto& item : v) out.push_back(parse_linear_constraint(item.as<std::string>()));
  return out;
}

PropertySpec parse_property(const YAML::Node& node, const SimulatorSpec& sim) {
  if (!node || !node.IsMap()) throw invalid("missing 'property' section");
  PropertySpec prop;
  prop.kind = kind_from(string_at(node, "kind", ""));

  if (const YAML::Node zone = node["danger_zone"]) {
    const PixelRegion fallback = bottom_half(sim.grid);
    const auto rows = range_at(zone, "rows", {fallback.row_begin, fallback.row_end});
    const auto cols = range_at(zone, "cols", {fallback.col_begin, fallback.col_end});
    prop.danger_zone = PixelRegion{rows.first, rows.second, cols.first, cols.second};
  }

  if (const YAML::Node d = node["directive"]) {
    const std::string form = string_at(d, "form", "two_logit");
    if (form == "two_logit") {
      prop.directive.form = Directive::Form::TwoLogit;
      prop.directive.alert_output = int_at(d, "alert_output", 1);
      prop.directive.no_alert_output = int_at(d, "no_alert_output", 0);
    } else if (form == "threshold") {
      prop.directive.form = Directive::Form::Threshold;
      prop.directive.output = int_at(d, "output", 0);
      prop.directive.threshold = rational_at(d, "threshold", Rational(0));
    } else {
      throw invalid("unknown directive form '" + form + "'");
    }
  }

  prop.epsilon = rational_at(node, "epsilon", Rational(0));
  const std::string norm = string_at(node, "norm", "linf");
  if (norm == "linf") {
    prop.norm = Norm::LInf;
  } else if (norm == "l1") {
    prop.norm = Norm::L1;
  } else {
    throw Error(ErrorKind::UnsupportedNorm, "norm '" + norm + "' (supported: linf, l1)");
  }
  prop.preconditions = constraints_at(node, "preconditions");
  prop.postconditions = constraints_at(node, "postconditions");
  return prop;
}

}  // namespace

TaskFile parse_task_file(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw invalid(std::string("YAML: ") + e.what());
  }
  if (!root.IsMap()) throw invalid("task file must be a mapping");
  const auto version = int_at(root, "version", -1);
  if (version != kSchemaVersion) {
    throw invalid("unsupported task file version " + std::to_string(version) + " (expected " +
                  std::to_string(kSchemaVersion) + ")");
  }
  try {
    TaskFile task;
    task.simulator = parse_simulator(root["simulator"]);
    task.property = parse_property(root["property"], task.simulator);
    return task;
  } catch (const YAML::Exception& e) {
    throw invalid(std::string("YAML: ") + e.what());
  }
}

TaskFile load_task_file(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
  std::stringstream ss;
  ss << file.rdbuf();
  return parse_task_file(ss.str());
}

}  // namespace onnx2smt
