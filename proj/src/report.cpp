#include "onnx2smt/report.hpp"

#include <algorithm>
#include <cstdio>
#include <json.hpp>
#include <sstream>

namespace onnx2smt {

std::string render_image(const RationalTensor& image, const SimulatorSpec& sim, const PixelRegion& zone) {
  const std::int64_t h = sim.grid.height;
  const std::int64_t w = sim.grid.width;
  const bool binary = sim.pixels.kind == PixelDomain::Kind::Binary;

  std::vector<std::string> cells;
  std::size_t width = 1;
  for (const auto& v : image.data) {
    std::string s = binary ? (v == sim.pixels.hi ? "1" : "0") : v.get_str();
    width = std::max(width, s.size());
    cells.push_back(std::move(s));
  }
  const bool framed = zone.row_begin < zone.row_end && zone.col_begin < zone.col_end;
  auto in_cols = [&](std::int64_t c) { return c >= zone.col_begin && c < zone.col_end; };

  // Column c is preceded by one separator character; zone edges use ':' on
  // cell rows and '+' on the dashed rules.
  auto line = [&](auto cell_text, char edge) {
    std::string s;
    for (std::int64_t c = 0; c <= w; ++c) {
      const bool edge_here = c == zone.col_begin || c == zone.col_end;
      s += edge_here && edge != ' ' ? edge : (edge == '+' && in_cols(c) && c > zone.col_begin ? '-' : ' ');
      if (c < w) s += cell_text(c);
    }
    while (!s.empty() && s.back() == ' ') s.pop_back();
    return s + "\n";
  };
  auto rule = [&] {
    return line([&](std::int64_t c) { return std::string(width, in_cols(c) ? '-' : ' '); }, '+');
  };

  std::string out;
  for (std::int64_t r = 0; r < h; ++r) {
    if (framed && r == zone.row_begin) out += rule();
    const bool zone_row = framed && r >= zone.row_begin && r < zone.row_end;
    out += line(
        [&](std::int64_t c) {
          const std::string& cell = cells[static_cast<std::size_t>(r * w + c)];
          return std::string(width - cell.size(), ' ') + cell;
        },
        zone_row ? ':' : ' ');
    if (framed && r == zone.row_end - 1) out += rule();
  }
  return out;
}

int exit_code(VerdictStatus status) {
  switch (status) {
    case VerdictStatus::Proven: return 0;
    case VerdictStatus::Falsified: return 1;
    case VerdictStatus::Unknown:
    case VerdictStatus::Timeout: return 2;
    case VerdictStatus::SolverError: return 3;
  }
  return 3;
}

std::string format_report(const RunReport& report) {
  std::ostringstream os;
  char secs[32];
  std::snprintf(secs, sizeof secs, "%.3f", report.wall_seconds);
  os << "verdict: " << to_string(report.verdict.status) << "\n";
  os << "solver: " << report.solver << "\n";
  os << "wall_time_s: " << secs << "\n";
  if (report.verdict.evaluations > 0) os << "evaluations: " << report.verdict.evaluations << "\n";
  for (const auto& a : report.artifacts) os << "artifact: " << a << "\n";
  if (!report.verdict.diagnostic.empty()) os << "diagnostic: " << report.verdict.diagnostic << "\n";
  if (report.verdict.witness) {
    os << "counterexample (" << (report.verdict.witness->confirmed ? "confirmed" : "unconfirmed") << "):";
    if (report.verdict.witness->obstacles.empty()) os << " no obstacles";
    for (const auto& [r, c] : report.verdict.witness->obstacles) os << " (" << r << "," << c << ")";
    os << "\n" << report.grid;
  }
  return os.str();
}

std::string format_report_json(const RunReport& report) {
  nlohmann::ordered_json j;
  j["verdict"] = std::string(to_string(report.verdict.status));
  j["solver"] = report.solver;
  j["wall_time_s"] = report.wall_seconds;
  j["evaluations"] = report.verdict.evaluations;
  j["artifacts"] = report.artifacts;
  j["diagnostic"] = report.verdict.diagnostic;
  if (report.verdict.witness) {
    const auto& w = *report.verdict.witness;
    nlohmann::ordered_json cx;
    cx["confirmed"] = w.confirmed;
    auto& obs = cx["obstacles"] = nlohmann::ordered_json::array();
    for (const auto& [r, c] : w.obstacles) obs.push_back({r, c});
    auto& pixels = cx["pixels"] = nlohmann::ordered_json::array();
    for (const auto& v : w.image.data) pixels.push_back(v.get_str());
    cx["grid"] = report.grid;
    j["counterexample"] = std::move(cx);
  }
  return j.dump(2) + "\n";
}

}  // namespace onnx2smt
