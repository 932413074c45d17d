// Acceptance criteria: one PASS/FAIL line each, nonzero exit if any fails.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "wavelab/analysis.hpp"
#include "wavelab/config.hpp"
#include "wavelab/io.hpp"
#include "wavelab/runner.hpp"

using namespace wavelab;
using namespace wavelab::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

/// Runs the standard sweep twice through cmd_sweep; shared by criteria 4, 5, 6 and 9.
struct StandardSweep {
  fs::path root;
  json first;
  std::string bytes_a, bytes_b;
  int code_a = -1, code_b = -1;

  StandardSweep() {
    root = fs::temp_directory_path() / "wavelab_acceptance";
    fs::remove_all(root);
    auto cfg = load_config(fs::path(WAVELAB_SOURCE_DIR) / "configs" / "standard_sweep.ini");
    std::ostringstream log;
    cfg.out_dir = (root / "a").string();
    code_a = cmd_sweep(cfg, log);
    cfg.out_dir = (root / "b").string();
    code_b = cmd_sweep(cfg, log);
    bytes_a = slurp(root / "a" / "sweep.json");
    bytes_b = slurp(root / "b" / "sweep.json");
    first = json::parse(bytes_a);
  }

  json report(const json& row) const {
    return read_json_file(root / "a" / "cells" / row["name"].get<std::string>() / "wave.report.json");
  }
};

const StandardSweep& sweep() {
  static const StandardSweep s;
  return s;
}

std::string status_of(const json& row, const std::string& name) {
  if (!row.contains("verdicts") || !row["verdicts"].contains(name)) return "missing";
  return row["verdicts"][name]["status"].get<std::string>();
}

Outcome manufactured_convergence() {
  const auto a = manufactured_run(33, 17), b = manufactured_run(65, 33), c = manufactured_run(129, 65);
  const double o1 = observed_order(a.error, b.error), o2 = observed_order(b.error, c.error);
  const bool ok = a.status == SolveStatus::converged && b.status == SolveStatus::converged &&
                  c.status == SolveStatus::converged && o1 >= 1.9 && o2 >= 1.9;
  return {ok, fmt("errors %.3e, %.3e, %.3e; observed orders %.3f, %.3f (need >= 1.9)", a.error, b.error, c.error, o1, o2)};
}

Outcome dispersion() {
  const double p0 = unit_depth_p0();
  const auto b = bifurcation_head(VorticitySpec::zero(), g_earth, p0, 257);
  const double hp = b.laminar.hp.back();
  const double c2 = 1.0 / (hp * hp);
  const double exact = g_earth * std::tanh(1.0);
  const double rel = std::abs(c2 - exact) / exact;
  const double depth_err = std::abs(b.laminar.depth() - 1.0);
  return {rel <= 1e-4 && depth_err <= 1e-4,
          fmt("c0^2 = %.8f vs g tanh(1) = %.8f, relative %.2e; laminar depth %.8f", c2, exact, rel, b.laminar.depth())};
}

Outcome linear_wave() {
  const auto p = standard_params();
  const auto trace = continue_in_amplitude(VorticitySpec::zero(), p, Grid(129, 65, p.p0), 1e-3, 1);
  if (!trace.complete) return {false, "solve failed: " + trace.message};
  const auto cmp = compare_with_linear_wave(trace.members.back().field);
  return {cmp.eta_error <= 0.02 && cmp.v_error <= 0.02,
          fmt("sup relative error: eta %.3e, v %.3e (need <= 0.02)", cmp.eta_error, cmp.v_error)};
}

Outcome theorem_battery() {
  const auto& s = sweep();
  const std::vector<std::string> checks = {"v_positive",     "inflection_parity", "curvature_monotonicity_law",
                                           "rise_then_fall", "u_decreasing",      "displacement_monotone"};
  std::string failures;
  int failed = 0, cells = 0;
  for (const auto& row : s.first["cells"]) {
    ++cells;
    if (!row.contains("verdicts")) {
      failures += " " + row["name"].get<std::string>() + "[no analysis]";
      ++failed;
      continue;
    }
    std::string bad;
    for (const auto& c : checks) {
      const auto st = status_of(row, c);
      if (st == "fail" || st == "missing") bad += (bad.empty() ? "" : ",") + c;
    }
    if (!bad.empty()) {
      ++failed;
      failures += " " + row["name"].get<std::string>() + "[" + bad + "]";
    }
  }
  return {failed == 0 && cells == 10, fmt("%d of %d cells clean", cells - failed, cells) + (failures.empty() ? "" : ";" + failures)};
}

Outcome max_v_location() {
  const auto& s = sweep();
  int checked = 0, failed = 0;
  std::string detail;
  for (const auto& row : s.first["cells"]) {
    const auto st = status_of(row, "max_v_location");
    if (st == "not-applicable") continue;
    ++checked;
    if (st != "pass") {
      ++failed;
      const auto rep = s.report(row);
      for (const auto& v : rep["verdicts"]) {
        if (v["name"] != "max_v_location") continue;
        const auto& m = v["metrics"];
        detail += fmt(" %s[argmax x %.4f level %.0f, inflection %.4f, miss %.4f > cell %.4f, predicted offset %.4f]",
                      row["name"].get<std::string>().c_str(), m["x_argmax"].get<double>(),
                      m["argmax_level"].get<double>(), m["x_inflection"].get<double>(),
                      v["worst_violation"].get<double>(), v["tolerance"].get<double>(),
                      m["offset_predicted"].get<double>());
      }
    }
  }
  return {checked > 0 && failed == 0, fmt("%d of %d applicable cells pass", checked - failed, checked) + (detail.empty() ? "" : ";" + detail)};
}

Outcome identities() {
  const auto& s = sweep();
  const std::vector<std::string> names = {"bridge_identity", "lhq_identity", "laplacian_identity",
                                          "divergence",      "vorticity",    "bernoulli_constancy"};
  int failed = 0;
  double worst_order = 1e300;
  std::string detail;
  for (const auto& row : s.first["cells"]) {
    const auto rep = s.report(row);
    for (const auto& v : rep["verdicts"]) {
      const auto name = v["name"].get<std::string>();
      if (std::find(names.begin(), names.end(), name) == names.end()) continue;
      const auto& m = v["metrics"];
      if (m["fine"].get<double>() > m["floor"].get<double>()) worst_order = std::min(worst_order, m["observed_order"].get<double>());
      if (v["status"] != "pass") {
        ++failed;
        detail += " " + row["name"].get<std::string>() + ":" + name;
      }
    }
  }
  return {failed == 0, fmt("lowest observed order %.3f over %zu cells x %zu identities (need >= 1)", worst_order,
                           s.first["cells"].size(), names.size()) + detail};
}

Outcome eigenvalue() {
  const auto p = standard_params();
  const auto bif = bifurcation_head(VorticitySpec::zero(), p.g, p.p0, 129);
  const auto f = laminar_field(bif.laminar, 129, p, VorticitySpec::zero());
  const auto e = first_dirichlet_eigenvalue(f);
  const double closed = 1.0 + pi * pi / (f.depth * f.depth);
  const double rel = std::abs(e.discrete - e.rectangle_bound) / e.rectangle_bound;
  return {e.rectangle_bound == closed && rel <= 1e-4,
          fmt("rectangle %.8f (closed form %.8f), discrete %.8f, relative gap %.2e (need <= 1e-4)", e.rectangle_bound,
              closed, e.discrete, rel)};
}

Outcome harness_self_tests() {
  std::vector<std::string> bad;
  // Injected defects.
  const auto wave = solve_wave(VorticitySpec::zero(), 65, 33, 0.05);
  auto vf = velocity_from_height(wave);
  flip_v(vf);
  const auto flipped = check_v_positive(vf);
  if (!flipped.failed() || flipped.locations.empty()) bad.push_back("sign-flipped v not caught");
  const auto bump = double_bump_streamline(129);
  const auto rise = check_rise_then_fall(bump, find_inflection_points(bump, bump.dx), bump.dx);
  if (!rise.failed() || rise.locations.empty()) bad.push_back("double-bump v not caught");
  const auto mc = manufactured_field(65, 33), mf = manufactured_field(129, 65);
  const auto rc = lhq_residual(mc), rf = lhq_residual(mf);
  const auto non = convergence_verdict("lhq_identity", rc.value, rf.value, 1.0, 1e-9, rf.where);
  if (!non.failed() || non.locations.empty()) bad.push_back("manufactured non-solution not caught");

  // Oracle fields: every judged check passes with a tenfold margin.
  const auto lin = linear_wave_oracle(g_earth, 1.0, 0.005);
  const auto of = lin.height_field(129, 65);
  const auto ovf = velocity_from_height(of);
  int margins = 0;
  auto margin = [&](const PropertyVerdict& v, const std::string& what) {
    ++margins;
    if (!v.passed_with_margin(10.0)) bad.push_back(what + " lacks 10x margin");
  };
  margin(check_v_positive(ovf), "v_positive on linear field");
  margin(check_displacement_monotone(displacement_points(of), of.vorticity, of.params.p0),
         "displacement on linear field");
  for (double y0 : {-0.75, -0.5, -0.25, 0.0}) {
    const auto sl = linear_streamline(lin, y0, 129);
    const auto in = find_inflection_points(sl, sl.dx);
    if (in.count() != 1 || std::abs(in.positions[0] - pi / 2) > 1e-12) bad.push_back("linear inflection misplaced");
    margin(check_rise_then_fall(sl, in, sl.dx), "rise_then_fall on linear streamline");
    margin(check_curvature_monotonicity_law(sl, sl.dx), "curvature law on linear streamline");
    margin(check_u_decreasing(sl, VorticitySpec::zero(), -1.0, sl.dx), "u_decreasing on linear streamline");
  }
  std::string detail = fmt("3 injected defects, %d oracle checks", margins);
  for (const auto& b : bad) detail += "; " + b;
  if (bad.empty()) {
    detail += fmt("; defect locations (%.3f, %.3f), (%.3f, %.3f), (%.3f, %.3f)", flipped.locations[0].x,
                  flipped.locations[0].y, rise.locations[0].x, rise.locations[0].y, non.locations[0].x, non.locations[0].y);
  }
  return {bad.empty(), detail};
}

Outcome determinism() {
  const auto& s = sweep();
  const bool same = !s.bytes_a.empty() && s.bytes_a == s.bytes_b && s.code_a == s.code_b;
  return {same, fmt("two cmd_sweep runs, seed %d: %zu and %zu bytes, %s", s.first["seed"].get<int>(), s.bytes_a.size(),
                    s.bytes_b.size(), same ? "identical" : "different")};
}

} // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"manufactured-solution convergence", manufactured_convergence},
      {"dispersion relation at the bifurcation", dispersion},
      {"linear-wave agreement", linear_wave},
      {"property battery on the standard sweep", theorem_battery},
      {"max-v location", max_v_location},
      {"identity convergence", identities},
      {"eigenvalue bound", eigenvalue},
      {"harness self-tests", harness_self_tests},
      {"determinism", determinism},
  };
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << k + 1 << ": " << criteria[k].first << " -- " << o.detail
              << std::endl;
  }
  std::cout << (failures ? "acceptance: " + std::to_string(failures) + " criteria failed" : std::string("acceptance: all criteria pass"))
            << std::endl;
  return failures ? 1 : 0;
}
